#include "snipcrs/dialogue.hpp"

#include "snipcrs/errors.hpp"
#include "snipcrs/parallel.hpp"
#include "snipcrs/prompts.hpp"
#include "snipcrs/retrieval.hpp"
#include "snipcrs/text.hpp"

namespace snipcrs {

using nlohmann::json;

std::string opening_question(Domain domain) {
  switch (domain) {
    case Domain::restaurant:
      return "Hello, what category of restaurant are you looking for?";
    case Domain::book:
      return "Hello, what category of books are you looking for?";
    case Domain::clothing:
      return "Hello, what category of clothing items are you looking for?";
  }
  throw ConfigError("unknown domain");
}

std::string render_history(const std::vector<Utterance>& history) {
  std::string out;
  for (const auto& u : history) {
    if (!out.empty()) out += '\n';
    out += u.role == Role::recommender ? "Recommender: " : "Seeker: ";
    out += text::collapse_whitespace(u.text);
  }
  return out;
}

std::string generate_clarification(const std::vector<Utterance>& history, Domain domain,
                                   Gateway& gateway, const std::string& fallback) {
  bool answered = false;
  for (const auto& u : history) answered = answered || u.role == Role::seeker;
  if (history.empty() || !answered)
    throw StateError("a clarification needs the opener and at least one answer");
  auto request = prompts::clarification(domain, render_history(history));
  auto question = text::first_line(gateway.chat(request));
  if (!question.empty()) return question;
  request.tag = std::string(prompts::tags::clarify_retry);
  question = text::first_line(gateway.chat(request));
  return question.empty() ? fallback : question;
}

SessionState start_session(std::string session_id, const RecommenderConfig& config,
                           std::uint64_t rng_seed) {
  SessionState s;
  s.session_id = std::move(session_id);
  s.kappa = config.kappa;
  s.rng_seed = rng_seed;
  s.history.push_back({Role::recommender, opening_question(config.domain)});
  return s;
}

void ask(SessionState& state, std::string question) {
  if (question_pending(state)) throw StateError("a question is already pending");
  if (text::trim(question).empty()) throw StateError("question is empty");
  state.history.push_back({Role::recommender, std::move(question)});
}

json to_json(const TurnResult& t, std::size_t ranking_limit) {
  json snippets = json::array();
  for (const auto& q : t.query_snippets) {
    json j = {{"text", q.text},
              {"sentiment", to_string(q.sentiment)},
              {"turn", q.turn},
              {"expansion", to_string(q.expansion)}};
    if (q.parent) j["parent"] = q.parent->text;
    snippets.push_back(std::move(j));
  }
  return {{"turn", t.turn},
          {"question", t.question},
          {"response", t.response},
          {"query_snippets", snippets},
          {"groups", t.groups},
          {"ranking", to_json(t.ranking, ranking_limit)}};
}

std::pair<SessionState, TurnResult> process_turn(const SessionState& state,
                                                 std::string_view response,
                                                 const SnippetIndex& index,
                                                 const RecommenderConfig& config,
                                                 Gateway& gateway) {
  if (!question_pending(state)) throw StateError("no question is pending");
  if (text::trim(response).empty()) throw StateError("seeker response is empty");
  if (index.empty()) throw StateError("snippet index is empty");
  const int turn = state.turn + 1;
  const std::string& question = state.history.back().text;

  std::vector<QuerySnippet> originals;
  if (config.query_decomposition) {
    originals = decompose_response(question, response, state.known_intents, turn,
                                   config.domain, gateway);
  } else {
    QuerySnippet whole;
    whole.text = text::collapse_whitespace(response);
    whole.turn = turn;
    originals.push_back(std::move(whole));
  }

  std::vector<QuerySnippet> queries;
  for (const auto& qs : originals) {
    if (config.expansion && config.query_decomposition) {
      for (auto& x : expand_query_snippet(qs, config.domain, gateway))
        queries.push_back(std::move(x));
    } else {
      queries.push_back(qs);
    }
  }

  std::vector<RankedGroup> groups(queries.size());
  parallel_for(queries.size(), config.parallelism, [&](std::size_t i) {
    auto candidates = retrieve_topk(index, queries[i], config.k, gateway);
    groups[i] = entailment_filter_rank(candidates, queries[i], config.t_entailment, gateway);
  });

  SessionState next = update_scores(state, groups);
  next.history.push_back({Role::seeker, std::string(response)});
  for (const auto& qs : originals) next.known_intents.push_back(qs);

  TurnResult result;
  result.turn = turn;
  result.question = question;
  result.response = std::string(response);
  result.query_snippets = std::move(queries);
  result.groups = groups.size();
  result.ranking = rank_items(next);
  return {std::move(next), std::move(result)};
}

}  // namespace snipcrs
