#include "snipcrs/retrieval.hpp"

#include <algorithm>
#include <optional>

#include <spdlog/spdlog.h>

#include "snipcrs/errors.hpp"
#include "snipcrs/parallel.hpp"

namespace snipcrs {

using nlohmann::json;

json to_json(const RankedGroup& group) {
  json members = json::array();
  for (const auto& m : group.members) {
    members.push_back({{"rank", m.rank},
                       {"snippet_id", m.snippet->snippet_id},
                       {"item_id", m.snippet->item_id},
                       {"text", m.snippet->text},
                       {"similarity", m.similarity},
                       {"entailment", m.entailment}});
  }
  return {{"query", to_json(group.query)}, {"members", members}};
}

std::vector<Candidate> retrieve_topk(const SnippetIndex& index, const QuerySnippet& qs,
                                     std::size_t k, Gateway& gateway) {
  if (k == 0) throw ConfigError("k must be positive");
  if (index.empty()) throw StateError("snippet index is empty");
  auto embedded = gateway.embed({qs.text});
  std::vector<Candidate> out;
  for (const auto& hit : index.search(embedded.front().values, k))
    out.push_back({&index.snippet(hit.index), hit.similarity});
  return out;
}

bool group_order(const RetrievedSnippet& a, const RetrievedSnippet& b) {
  if (a.entailment != b.entailment) return a.entailment > b.entailment;
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.snippet->snippet_id < b.snippet->snippet_id;
}

RankedGroup entailment_filter_rank(const std::vector<Candidate>& candidates,
                                   const QuerySnippet& qs, double t_entailment,
                                   Gateway& gateway, std::size_t parallelism) {
  if (!(t_entailment >= 0.0 && t_entailment <= 1.0))
    throw ConfigError("entailment threshold must lie in [0, 1]");
  std::vector<std::optional<double>> scores(candidates.size());
  parallel_for(candidates.size(), parallelism, [&](std::size_t i) {
    try {
      scores[i] = gateway.nli(candidates[i].snippet->text, qs.text).entail;
    } catch (const ReplayMissError&) {
      throw;
    } catch (const GatewayError& e) {
      spdlog::warn("nli failed for snippet {}: {}", candidates[i].snippet->snippet_id,
                   e.what());
    }
  });

  RankedGroup group{qs, {}};
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!scores[i] || *scores[i] < t_entailment) continue;
    group.members.push_back({candidates[i].snippet, candidates[i].similarity, *scores[i], 0});
  }
  std::sort(group.members.begin(), group.members.end(), group_order);
  for (std::size_t r = 0; r < group.members.size(); ++r)
    group.members[r].rank = static_cast<int>(r + 1);
  return group;
}

}  // namespace snipcrs
