#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "snipcrs/domain.hpp"
#include "snipcrs/gateway.hpp"

namespace snipcrs {

enum class Sentiment { prefer, dislike };
enum class Expansion { original, paraphrase, support, opposite };

std::string to_string(Sentiment s);
Sentiment parse_sentiment(std::string_view tag);  // also accepts "preference"
std::string to_string(Expansion e);
Expansion parse_expansion(std::string_view tag);

inline int sign(Sentiment s) { return s == Sentiment::prefer ? 1 : -1; }
inline Sentiment flipped(Sentiment s) {
  return s == Sentiment::prefer ? Sentiment::dislike : Sentiment::prefer;
}

struct QuerySnippet {
  std::string text;
  Sentiment sentiment = Sentiment::prefer;
  int turn = 1;
  Expansion expansion = Expansion::original;
  std::shared_ptr<const QuerySnippet> parent;  // set iff expansion != original
};

nlohmann::json to_json(const QuerySnippet& qs);
QuerySnippet query_snippet_from_json(const nlohmann::json& j);

// (prop, sentiment) pairs from an answer made of Intent(prop="...",
// sentiment="...") records. Blank output and "[]" give nothing; output with
// neither records nor an empty list throws ParseError.
std::vector<std::pair<std::string, Sentiment>> parse_intents(std::string_view raw);

// Original query snippets for one seeker response. Anything whose normalized
// text equals a known intent, or an earlier snippet of the same response, is
// dropped.
std::vector<QuerySnippet> decompose_response(std::string_view question,
                                             std::string_view response,
                                             const std::vector<QuerySnippet>& known_intents,
                                             int turn, Domain domain, Gateway& gateway);

// [qs, paraphrase, support, opposite]; a transform that fails or answers
// blank is left out.
std::vector<QuerySnippet> expand_query_snippet(const QuerySnippet& qs, Domain domain,
                                               Gateway& gateway);

}  // namespace snipcrs
