#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "snipcrs/config.hpp"
#include "snipcrs/fusion.hpp"
#include "snipcrs/gateway.hpp"
#include "snipcrs/query.hpp"
#include "snipcrs/snippet_index.hpp"

namespace snipcrs {

std::string opening_question(Domain domain);

// "Recommender: ...\nSeeker: ..." one utterance per line.
std::string render_history(const std::vector<Utterance>& history);

// One-line question from the history alone. A blank answer is asked once
// more under a retry tag, then replaced by `fallback`.
std::string generate_clarification(const std::vector<Utterance>& history, Domain domain,
                                   Gateway& gateway, const std::string& fallback);

// Fresh state whose history holds the opener as the pending question.
SessionState start_session(std::string session_id, const RecommenderConfig& config,
                           std::uint64_t rng_seed);

// Appends a recommender question. Throws StateError if one is already pending.
void ask(SessionState& state, std::string question);

inline bool question_pending(const SessionState& state) {
  return !state.history.empty() && state.history.back().role == Role::recommender;
}

struct TurnResult {
  int turn = 0;
  std::string question;
  std::string response;
  std::vector<QuerySnippet> query_snippets;  // originals and expansions
  std::size_t groups = 0;
  RankedList ranking;
};

nlohmann::json to_json(const TurnResult& t, std::size_t ranking_limit = 10);

// Parses the response, retrieves and gates one group per query snippet, and
// folds all groups into the scores. The input state is never modified; on
// any exception nothing of the turn is applied.
std::pair<SessionState, TurnResult> process_turn(const SessionState& state,
                                                 std::string_view response,
                                                 const SnippetIndex& index,
                                                 const RecommenderConfig& config,
                                                 Gateway& gateway);

}  // namespace snipcrs
