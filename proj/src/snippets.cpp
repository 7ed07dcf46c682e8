#include "snipcrs/snippets.hpp"

#include <cctype>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "snipcrs/errors.hpp"
#include "snipcrs/parallel.hpp"
#include "snipcrs/prompts.hpp"
#include "snipcrs/text.hpp"

namespace snipcrs {

namespace {

std::string strip_fences(std::string_view raw) {
  std::string out;
  for (const auto& line : text::split(raw, '\n')) {
    if (text::trim(line).rfind("```", 0) == 0) continue;
    out += line;
    out += '\n';
  }
  return out;
}

// A quote opens a string only at a list position: start of text, or after
// '[', ',', a newline or a bullet marker. This keeps apostrophes in stray
// prose from being read as string openers.
bool opens_string(const std::string& s, std::size_t pos) {
  std::size_t j = pos;
  while (j > 0 && (s[j - 1] == ' ' || s[j - 1] == '\t')) --j;
  if (j == 0) return true;
  char prev = s[j - 1];
  return prev == '[' || prev == ',' || prev == '\n' || prev == '-' || prev == '*' ||
         prev == '.' || prev == ')';
}

// A quote closes the string when what follows (after blanks) is a list
// delimiter or the end. An apostrophe inside 'It's ok' therefore does not.
bool closes_string(const std::string& s, std::size_t pos) {
  std::size_t j = pos + 1;
  while (j < s.size() && (s[j] == ' ' || s[j] == '\t' || s[j] == '\r')) ++j;
  return j == s.size() || s[j] == ',' || s[j] == ']' || s[j] == '\n';
}

}  // namespace

std::vector<std::string> parse_string_list(std::string_view raw) {
  const std::string s = strip_fences(raw);
  std::vector<std::string> out;
  std::string residue;
  std::size_t i = 0;
  while (i < s.size()) {
    char c = s[i];
    if ((c == '"' || c == '\'') && opens_string(s, i)) {
      std::string value;
      std::size_t j = i + 1;
      bool closed = false;
      for (; j < s.size(); ++j) {
        if (s[j] == '\\' && j + 1 < s.size()) {
          char e = s[++j];
          value += e == 'n' || e == 't' ? ' ' : e;
          continue;
        }
        if (s[j] == c && closes_string(s, j)) {
          closed = true;
          break;
        }
        value += s[j];
      }
      if (!closed) throw ParseError("unterminated string in model list output", std::string(raw));
      auto cleaned = text::collapse_whitespace(value);
      if (!cleaned.empty()) out.push_back(std::move(cleaned));
      i = j + 1;
      continue;
    }
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '[' && c != ']' && c != ',')
      residue += c;
    ++i;
  }
  if (out.empty() && !residue.empty())
    throw ParseError("model output is not a list of quoted strings", std::string(raw));
  return out;
}

std::vector<Snippet> decompose_review(const Review& review, Domain domain,
                                      Gateway& gateway) {
  if (text::trim(review.text).empty())
    throw CorpusError("review " + review.review_id + " has no text");
  const std::string raw = gateway.chat(prompts::decompose_review(domain, review.text));
  std::vector<Snippet> out;
  std::size_t n = 0;
  for (auto& statement : parse_string_list(raw)) {
    out.push_back({fmt::format("{}#s{}", review.review_id, ++n), review.item_id,
                   std::move(statement), SnippetOrigin::review, review.review_id});
  }
  return out;
}

SnippetBuild build_item_snippets(const Corpus& corpus, Domain domain, Gateway& gateway,
                                 const SnippetBuildOptions& options) {
  const auto& reviews = corpus.reviews();
  std::vector<std::vector<Snippet>> per_review(reviews.size());
  std::vector<std::string> errors(reviews.size());
  parallel_for(reviews.size(), options.parallelism, [&](std::size_t i) {
    try {
      per_review[i] = decompose_review(reviews[i], domain, gateway);
    } catch (const ParseError& e) {
      errors[i] = e.what();
    }
  });

  SnippetBuild build;
  build.reviews = reviews.size();
  std::unordered_map<std::string, std::size_t> review_pos;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    review_pos.emplace(reviews[i].review_id, i);
    if (!errors[i].empty()) build.failures.push_back({reviews[i].review_id, errors[i]});
  }
  if (!reviews.empty() &&
      static_cast<double>(build.failures.size()) >
          options.max_failure_rate * static_cast<double>(reviews.size())) {
    throw Error(fmt::format("snippet extraction failed for {} of {} reviews",
                            build.failures.size(), reviews.size()));
  }
  for (const auto& f : build.failures)
    spdlog::warn("review {} produced no snippets: {}", f.review_id, f.message);

  for (const auto& item : corpus.items()) {
    std::unordered_set<std::string> seen;
    auto keep = [&](Snippet s) {
      if (seen.insert(s.text).second) build.snippets.push_back(std::move(s));
      else ++build.duplicates_dropped;
    };
    for (const auto& rid : item.review_ids)
      for (auto& s : per_review[review_pos.at(rid)]) keep(std::move(s));
    for (auto& s : attribute_to_snippets(item)) keep(std::move(s));
  }
  return build;
}

std::vector<Snippet> build_baseline_units(const Corpus& corpus, Granularity granularity) {
  if (granularity == Granularity::snippet)
    throw ConfigError("baseline units are document or sentence granularity");
  std::vector<Snippet> out;
  for (const auto& item : corpus.items()) {
    for (const Review* r : corpus.reviews_of(item)) {
      if (granularity == Granularity::document) {
        out.push_back({r->review_id + "#d", item.item_id,
                       text::collapse_whitespace(r->text), SnippetOrigin::document,
                       r->review_id});
        continue;
      }
      std::size_t n = 0;
      for (auto& sentence : split_sentences(r->text)) {
        out.push_back({fmt::format("{}#t{}", r->review_id, ++n), item.item_id,
                       text::collapse_whitespace(sentence), SnippetOrigin::sentence,
                       r->review_id});
      }
    }
    auto attrs = attribute_to_snippets(item);
    if (attrs.empty()) continue;
    if (granularity == Granularity::document) {
      std::string doc;
      for (const auto& a : attrs) doc += (doc.empty() ? "" : " ") + a.text;
      out.push_back({item.item_id + "#d-attr", item.item_id, std::move(doc),
                     SnippetOrigin::document, std::nullopt});
    } else {
      for (auto& a : attrs) {
        a.origin = SnippetOrigin::sentence;
        out.push_back(std::move(a));
      }
    }
  }
  return out;
}

}  // namespace snipcrs
