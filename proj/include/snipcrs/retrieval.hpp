#pragma once

#include <vector>

#include "json.hpp"
#include "snipcrs/gateway.hpp"
#include "snipcrs/query.hpp"
#include "snipcrs/snippet_index.hpp"

namespace snipcrs {

// Pointers refer into the SnippetIndex, which must outlive them.
struct Candidate {
  const Snippet* snippet = nullptr;
  double similarity = 0.0;
};

struct RetrievedSnippet {
  const Snippet* snippet = nullptr;
  double similarity = 0.0;
  double entailment = 0.0;
  int rank = 0;  // 1-based within the group
};

// Survivors of the entailment gate for one query snippet, best first.
struct RankedGroup {
  QuerySnippet query;
  std::vector<RetrievedSnippet> members;
};

nlohmann::json to_json(const RankedGroup& group);

std::vector<Candidate> retrieve_topk(const SnippetIndex& index, const QuerySnippet& qs,
                                     std::size_t k, Gateway& gateway);

// Scores nli(premise = snippet, hypothesis = query) for every candidate,
// drops entailment < t_entailment, orders by entailment desc, similarity
// desc, snippet_id asc and numbers the survivors 1..n. A candidate whose NLI
// call fails is dropped with a warning.
RankedGroup entailment_filter_rank(const std::vector<Candidate>& candidates,
                                   const QuerySnippet& qs, double t_entailment,
                                   Gateway& gateway, std::size_t parallelism = 1);

// The ordering used inside a group, exposed for oracles and tests.
bool group_order(const RetrievedSnippet& a, const RetrievedSnippet& b);

}  // namespace snipcrs
