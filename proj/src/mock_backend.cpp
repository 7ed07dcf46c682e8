#include <cctype>
#include <cmath>
#include <random>
#include <set>
#include <unordered_set>

#include "snipcrs/errors.hpp"
#include "snipcrs/gateway.hpp"
#include "snipcrs/text.hpp"

namespace snipcrs {

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a", "an", "the", "this", "that", "these", "those", "is", "are", "was",
      "were", "be", "been", "it", "its", "place", "restaurant", "book", "item",
      "clothing", "of", "and", "or", "to", "in", "for", "with", "ha", "has",
      "have", "had", "as", "at", "on", "by", "i", "im", "my", "me", "we",
      "our", "you", "your", "they", "their", "there", "here", "very", "really",
      "just", "so", "some", "any", "also", "what", "which", "who", "m", "s",
      "t", "d", "ll", "re", "ve"};
  return words;
}

const std::unordered_set<std::string>& negations() {
  static const std::unordered_set<std::string> words = {
      "not", "no", "never", "lack", "lacks", "lacking", "without", "nor",
      "none", "nothing", "cannot"};
  return words;
}

// Stems left in front of "t" when "n't" is split off.
const std::unordered_set<std::string>& contraction_stems() {
  static const std::unordered_set<std::string> words = {
      "don", "doesn", "didn", "isn", "aren", "wasn", "weren", "can", "won",
      "hasn", "haven", "hadn", "shouldn", "couldn", "wouldn", "ain"};
  return words;
}

std::string stem(std::string t) {
  if (t.size() > 3 && t.back() == 's' && t[t.size() - 2] != 's') t.pop_back();
  return t;
}

std::vector<std::string> raw_tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

struct Analyzed {
  std::set<std::string> content;
  bool negated = false;
};

Analyzed analyze(std::string_view s) {
  Analyzed a;
  std::string prev;
  for (auto& tok : raw_tokens(s)) {
    bool contraction = tok == "t" && contraction_stems().count(prev);
    prev = tok;
    if (negations().count(tok) || contraction) {
      a.negated = true;
      continue;
    }
    if (contraction_stems().count(tok)) continue;
    auto t = stem(tok);
    if (stopwords().count(tok) || stopwords().count(t)) continue;
    a.content.insert(t);
  }
  return a;
}

void add_token_vector(std::vector<double>& acc, std::string_view token,
                      std::uint64_t seed) {
  std::mt19937_64 rng(text::fnv1a64(token, 0xcbf29ce484222325ULL ^ seed));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(acc.size());
  double norm = 0.0;
  for (auto& x : v) {
    x = normal(rng);
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < v.size(); ++i) acc[i] += v[i] / norm;
}

}  // namespace

EmbeddingVector mock_embedding(std::string_view text, std::uint64_t seed,
                               std::size_t dim) {
  std::vector<double> acc(dim, 0.0);
  auto a = analyze(text);
  std::vector<std::string> tokens(a.content.begin(), a.content.end());
  if (a.negated) tokens.push_back("<not>");
  if (tokens.empty()) tokens = raw_tokens(text);
  if (tokens.empty()) tokens.emplace_back(text);
  for (const auto& t : tokens) add_token_vector(acc, t, seed);

  double norm = 0.0;
  for (double x : acc) norm += x * x;
  norm = std::sqrt(norm);
  EmbeddingVector out;
  out.values.resize(dim);
  for (std::size_t i = 0; i < dim; ++i)
    out.values[i] = static_cast<float>(norm > 0 ? acc[i] / norm : 0.0);
  return out;
}

NliScores mock_nli(std::string_view premise, std::string_view hypothesis) {
  auto p = analyze(premise);
  auto h = analyze(hypothesis);
  double coverage = 0.0;
  if (!h.content.empty()) {
    std::size_t hit = 0;
    for (const auto& t : h.content) hit += p.content.count(t);
    coverage = static_cast<double>(hit) / static_cast<double>(h.content.size());
  }
  const double strength = 0.98 * coverage * coverage;
  NliScores s;
  if (p.negated == h.negated) {
    s.entail = 0.01 + strength;
    s.contradict = 0.01;
  } else {
    s.entail = 0.01;
    s.contradict = 0.01 + strength;
  }
  s.neutral = 1.0 - s.entail - s.contradict;
  return normalize(s);
}

MockBackend::MockBackend(std::uint64_t seed, std::size_t dim)
    : seed_(seed), dim_(dim) {
  if (dim_ == 0) throw ConfigError("mock embedding dimension must be positive");
}

MockBackend& MockBackend::on(const std::string& tag_regex,
                             std::string fixed_response) {
  return on(tag_regex, [r = std::move(fixed_response)](const ChatRequest&) { return r; });
}

MockBackend& MockBackend::on(const std::string& tag_regex, Responder responder) {
  rules_.push_back({std::regex(tag_regex), std::move(responder)});
  return *this;
}

std::string MockBackend::chat(const ChatRequest& req) {
  chat_calls_.fetch_add(1);
  for (const auto& rule : rules_) {
    if (std::regex_match(req.tag, rule.pattern)) return rule.respond(req);
  }
  throw BackendError("mock backend has no script for tag '" + req.tag + "'", false);
}

std::vector<EmbeddingVector> MockBackend::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(mock_embedding(t, seed_, dim_));
  return out;
}

NliScores MockBackend::nli(const std::string& premise, const std::string& hypothesis) {
  return mock_nli(premise, hypothesis);
}

}  // namespace snipcrs
