#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "snipcrs/config.hpp"
#include "snipcrs/corpus.hpp"
#include "snipcrs/dialogue.hpp"
#include "snipcrs/gateway.hpp"
#include "snipcrs/snippet_index.hpp"

namespace snipcrs {

struct EpisodeLog {
  SeedPair seed_pair;
  std::string target_item_id;
  std::vector<TurnResult> turns;
  std::vector<int> per_turn_metric_rank;
  std::string config_fingerprint;
  std::uint64_t rng_seed = 0;
  bool valid = true;
  std::string invalid_reason;
};

nlohmann::json to_json(const EpisodeLog& log);

// One simulated conversation about the seed pair's item. `corpus` is the
// full corpus (the simulator's view, and the candidate set for metric
// ranks); `index` must have been built without the seed reviews. A leakage
// failure ends the episode and marks it invalid.
EpisodeLog run_episode(const SeedPair& pair, const RecommenderConfig& config,
                       const Corpus& corpus, const SnippetIndex& index, Gateway& gateway,
                       int max_turns, std::uint64_t rng_seed);

// Episode i uses rng_seed + i; logs come back in pair order.
std::vector<EpisodeLog> run_episodes(const std::vector<SeedPair>& pairs,
                                     const RecommenderConfig& config, const Corpus& corpus,
                                     const SnippetIndex& index, Gateway& gateway,
                                     int max_turns, std::uint64_t rng_seed,
                                     std::size_t parallelism = 1);

int hits_at_k(int rank, int k);
double reciprocal_rank(int rank);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct TurnMetrics {
  int turn = 0;
  double hits1 = 0.0, hits5 = 0.0, hits10 = 0.0, mrr = 0.0, avg_pos = 0.0;
  Interval ci_hits1, ci_hits5, ci_hits10, ci_mrr, ci_avg_pos;
};

struct MetricsReport {
  std::vector<TurnMetrics> per_turn;
  std::size_t n_episodes = 0;  // valid episodes behind the means
  std::size_t n_invalid = 0;
  std::string fingerprint;
};

nlohmann::json to_json(const MetricsReport& report);

// Per-turn means over the valid episodes with 95% percentile-bootstrap
// intervals. Every turn and metric is computed from the same resamples.
// Throws ConfigError for an empty set, mixed fingerprints, or valid
// episodes of different lengths.
MetricsReport aggregate(const std::vector<EpisodeLog>& episodes, std::size_t n_boot = 10000,
                        std::uint64_t rng_seed = 0);

std::string render_turn_table(const MetricsReport& report);

enum class Verdict { supported, hallucinated, indeterminate };
std::string to_string(Verdict v);

Verdict judge_faithfulness(const Snippet& snippet, const Review& source_review, Domain domain,
                           Gateway& gateway);

struct FaithfulnessReport {
  std::size_t judged = 0;
  std::size_t supported = 0;
  std::size_t hallucinated = 0;
  std::size_t indeterminate = 0;
  std::vector<std::pair<std::string, Verdict>> verdicts;  // snippet_id, verdict

  // hallucinated / (supported + hallucinated); indeterminate are reported
  // apart.
  double hallucination_rate() const;
};

nlohmann::json to_json(const FaithfulnessReport& r);

// Judges a seeded sample of up to n review-origin snippets.
FaithfulnessReport judge_sample(const std::vector<Snippet>& snippets, const Corpus& corpus,
                                Domain domain, Gateway& gateway, std::size_t n,
                                std::uint64_t rng_seed);

struct ComparisonEntry {
  std::string name;
  RecommenderConfig config;
  const SnippetIndex* index = nullptr;
};

struct Comparison {
  std::vector<std::string> names;
  std::vector<MetricsReport> reports;

  nlohmann::json to_json() const;
  // One row per configuration at the last turn, in the column order Hits@1,
  // Hits@5, Hits@10, MRR, Avg Pos with intervals in brackets.
  std::string render() const;
};

Comparison compare_granularities(const Corpus& corpus, const std::vector<SeedPair>& pairs,
                                 const std::vector<ComparisonEntry>& entries,
                                 Gateway& gateway, int max_turns, std::uint64_t rng_seed,
                                 std::size_t n_boot = 10000, std::size_t parallelism = 1);

}  // namespace snipcrs
