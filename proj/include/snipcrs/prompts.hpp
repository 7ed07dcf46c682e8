#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "snipcrs/domain.hpp"
#include "snipcrs/gateway.hpp"

// Prompt builders for every model-backed step. Each returns a request whose
// tag names the step ("snippet.decompose", "query.paraphrase", ...), which is
// what mock scripts match on.
namespace snipcrs::prompts {

namespace tags {
inline constexpr std::string_view decompose_review = "snippet.decompose";
inline constexpr std::string_view decompose_response = "query.decompose";
inline constexpr std::string_view paraphrase = "query.paraphrase";
inline constexpr std::string_view support = "query.support";
inline constexpr std::string_view opposite = "query.opposite";
inline constexpr std::string_view clarify = "dialogue.clarify";
inline constexpr std::string_view clarify_retry = "dialogue.clarify.retry";
inline constexpr std::string_view summarize_positive = "sim.summarize.positive";
inline constexpr std::string_view summarize_negative = "sim.summarize.negative";
inline constexpr std::string_view simulate = "sim.respond";
inline constexpr std::string_view simulate_retry = "sim.respond.retry";
inline constexpr std::string_view judge = "eval.judge";
inline constexpr std::string_view judge_retry = "eval.judge.retry";
}  // namespace tags

// Replaces each "{name}" found in `tmpl` in one left-to-right pass;
// substituted text is never rescanned. Unknown placeholders stay verbatim.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& values);

struct KnownIntent {
  std::string text;
  bool prefer = true;
};

// "None", or the nested preference/dislike bullet list.
std::string render_known_intents(const std::vector<KnownIntent>& intents);

ChatRequest decompose_review(Domain domain, std::string_view review_text);
ChatRequest decompose_response(Domain domain, std::string_view question,
                               std::string_view response,
                               const std::vector<KnownIntent>& known);
ChatRequest paraphrase(Domain domain, std::string_view sentence);
ChatRequest support(Domain domain, std::string_view sentence);
ChatRequest opposite(Domain domain, std::string_view sentence);
ChatRequest clarification(Domain domain, std::string_view dialogue_context);
ChatRequest summarize(Domain domain, std::string_view item_info,
                      const std::vector<std::string>& reviews, bool positive);
ChatRequest simulate(Domain domain, std::string_view item_info,
                     std::string_view review_summary, std::string_view review_text,
                     std::string_view dialogue_context);
ChatRequest judge(Domain domain, std::string_view proposition,
                  std::string_view review_text);

}  // namespace snipcrs::prompts
