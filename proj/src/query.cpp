#include "snipcrs/query.hpp"

#include <cctype>
#include <regex>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "snipcrs/errors.hpp"
#include "snipcrs/prompts.hpp"
#include "snipcrs/text.hpp"

namespace snipcrs {

using nlohmann::json;

std::string to_string(Sentiment s) { return s == Sentiment::prefer ? "prefer" : "dislike"; }

Sentiment parse_sentiment(std::string_view tag) {
  auto t = text::to_lower(text::trim(tag));
  if (t == "prefer" || t == "preference") return Sentiment::prefer;
  if (t == "dislike") return Sentiment::dislike;
  throw ParseError("unknown sentiment '" + std::string(tag) + "'", std::string(tag));
}

std::string to_string(Expansion e) {
  switch (e) {
    case Expansion::original: return "original";
    case Expansion::paraphrase: return "paraphrase";
    case Expansion::support: return "support";
    case Expansion::opposite: return "opposite";
  }
  return "original";
}

Expansion parse_expansion(std::string_view tag) {
  for (auto e : {Expansion::original, Expansion::paraphrase, Expansion::support,
                 Expansion::opposite})
    if (tag == to_string(e)) return e;
  throw ConfigError("unknown expansion '" + std::string(tag) + "'");
}

json to_json(const QuerySnippet& qs) {
  json j = {{"text", qs.text},
            {"sentiment", to_string(qs.sentiment)},
            {"turn", qs.turn},
            {"expansion", to_string(qs.expansion)}};
  if (qs.parent) j["parent"] = to_json(*qs.parent);
  return j;
}

QuerySnippet query_snippet_from_json(const json& j) {
  QuerySnippet qs;
  qs.text = j.at("text").get<std::string>();
  qs.sentiment = parse_sentiment(j.at("sentiment").get<std::string>());
  qs.turn = j.at("turn").get<int>();
  qs.expansion = parse_expansion(j.at("expansion").get<std::string>());
  if (j.contains("parent"))
    qs.parent = std::make_shared<const QuerySnippet>(query_snippet_from_json(j.at("parent")));
  return qs;
}

std::vector<std::pair<std::string, Sentiment>> parse_intents(std::string_view raw) {
  static const std::regex record(
      R"re(Intent\s*\(\s*prop\s*=\s*(["'])([\s\S]*?)\1\s*,\s*sentiment\s*=\s*(["'])(\w+)\3\s*\))re");
  const std::string s(raw);
  std::vector<std::pair<std::string, Sentiment>> out;
  bool matched = false;
  for (std::sregex_iterator it(s.begin(), s.end(), record), end; it != end; ++it) {
    matched = true;
    auto prop = text::collapse_whitespace((*it)[2].str());
    if (prop.empty()) continue;
    try {
      out.emplace_back(std::move(prop), parse_sentiment((*it)[4].str()));
    } catch (const ParseError&) {
      spdlog::warn("skipping intent with sentiment '{}'", (*it)[4].str());
    }
  }
  if (matched) return out;
  // Nothing parsed: fine for a blank answer or an empty list, not for prose.
  std::string residue;
  for (const auto& line : text::split(s, '\n')) {
    auto t = text::trim(line);
    if (t.rfind("```", 0) == 0) continue;
    for (char c : t)
      if (!std::isspace(static_cast<unsigned char>(c)) && c != '[' && c != ']') residue += c;
  }
  if (!residue.empty()) throw ParseError("no Intent records in model output", s);
  return out;
}

std::vector<QuerySnippet> decompose_response(std::string_view question,
                                             std::string_view response,
                                             const std::vector<QuerySnippet>& known_intents,
                                             int turn, Domain domain, Gateway& gateway) {
  if (text::trim(response).empty()) throw StateError("seeker response is empty");
  std::vector<prompts::KnownIntent> known;
  std::unordered_set<std::string> seen;
  for (const auto& k : known_intents) {
    known.push_back({k.text, k.sentiment == Sentiment::prefer});
    seen.insert(text::normalize_statement(k.text));
  }
  const std::string raw =
      gateway.chat(prompts::decompose_response(domain, question, response, known));
  std::vector<QuerySnippet> out;
  for (auto& [prop, sentiment] : parse_intents(raw)) {
    if (!seen.insert(text::normalize_statement(prop)).second) continue;
    QuerySnippet qs;
    qs.text = std::move(prop);
    qs.sentiment = sentiment;
    qs.turn = turn;
    out.push_back(std::move(qs));
  }
  return out;
}

namespace {

std::string clean_transform(const std::string& raw) {
  std::string line = text::first_line(raw);
  if (line.size() >= 2 && (line.front() == '"' || line.front() == '\'') &&
      line.back() == line.front())
    line = text::trim(std::string_view(line).substr(1, line.size() - 2));
  return line;
}

}  // namespace

std::vector<QuerySnippet> expand_query_snippet(const QuerySnippet& qs, Domain domain,
                                               Gateway& gateway) {
  if (qs.expansion != Expansion::original)
    throw StateError("only original query snippets are expanded");
  auto parent = std::make_shared<const QuerySnippet>(qs);
  std::vector<QuerySnippet> out{qs};
  struct Transform {
    Expansion kind;
    ChatRequest request;
    Sentiment sentiment;
  };
  const Transform transforms[] = {
      {Expansion::paraphrase, prompts::paraphrase(domain, qs.text), qs.sentiment},
      {Expansion::support, prompts::support(domain, qs.text), qs.sentiment},
      {Expansion::opposite, prompts::opposite(domain, qs.text), flipped(qs.sentiment)},
  };
  for (const auto& t : transforms) {
    std::string produced;
    try {
      produced = clean_transform(gateway.chat(t.request));
    } catch (const ReplayMissError&) {
      throw;  // a determinism break, not a flaky transform
    } catch (const Error& e) {
      spdlog::warn("{} of '{}' failed: {}", to_string(t.kind), qs.text, e.what());
      continue;
    }
    if (produced.empty()) continue;
    QuerySnippet x;
    x.text = std::move(produced);
    x.sentiment = t.sentiment;
    x.turn = qs.turn;
    x.expansion = t.kind;
    x.parent = parent;
    out.push_back(std::move(x));
  }
  return out;
}

}  // namespace snipcrs
