#include "snipcrs/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <random>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "snipcrs/errors.hpp"
#include "snipcrs/parallel.hpp"
#include "snipcrs/prompts.hpp"
#include "snipcrs/simulator.hpp"
#include "snipcrs/text.hpp"

namespace snipcrs {

using nlohmann::json;

json to_json(const EpisodeLog& log) {
  json turns = json::array();
  for (const auto& t : log.turns) turns.push_back(to_json(t));
  json j = {{"seed_pair", {{"user_id", log.seed_pair.user_id}, {"item_id", log.seed_pair.item_id}}},
            {"target_item_id", log.target_item_id},
            {"turns", turns},
            {"per_turn_metric_rank", log.per_turn_metric_rank},
            {"config_fingerprint", log.config_fingerprint},
            {"rng_seed", log.rng_seed},
            {"valid", log.valid}};
  if (!log.valid) j["invalid_reason"] = log.invalid_reason;
  return j;
}

EpisodeLog run_episode(const SeedPair& pair, const RecommenderConfig& config,
                       const Corpus& corpus, const SnippetIndex& index, Gateway& gateway,
                       int max_turns, std::uint64_t rng_seed) {
  if (max_turns < 1) throw ConfigError("an episode needs at least one turn");
  if (index.granularity() != config.granularity)
    throw ConfigError("index granularity " + to_string(index.granularity()) +
                      " does not match the configured " + to_string(config.granularity));
  const Item& target = corpus.item(pair.item_id);
  const Review& seed = seed_review_for(corpus, pair);
  if (index.find(seed.review_id + "#s1") || index.find(seed.review_id + "#d") ||
      index.find(seed.review_id + "#t1"))
    throw ConfigError("seed review " + seed.review_id + " is visible to the recommender");

  EpisodeLog log;
  log.seed_pair = pair;
  log.target_item_id = target.item_id;
  log.rng_seed = rng_seed;
  log.config_fingerprint = config.fingerprint(gateway.fingerprint());

  SimContext ctx = build_sim_context(target, seed, corpus, config.domain, gateway);
  std::mt19937_64 rng(rng_seed);
  SessionState state = start_session(
      fmt::format("episode:{}:{}", pair.user_id, pair.item_id), config, rng_seed);
  for (int t = 1; t <= max_turns; ++t) {
    const std::string question = state.history.back().text;
    std::string answer;
    try {
      answer = simulate_response(ctx, state.history, question, gateway);
    } catch (const LeakageError& e) {
      log.valid = false;
      log.invalid_reason = e.what();
      spdlog::warn("episode for {} aborted: {}", pair.item_id, e.what());
      break;
    }
    auto [next, result] = process_turn(state, answer, index, config, gateway);
    state = std::move(next);
    log.per_turn_metric_rank.push_back(metric_rank_of(result.ranking, target.item_id, corpus, rng));
    log.turns.push_back(std::move(result));
    if (t < max_turns)
      ask(state, generate_clarification(state.history, config.domain, gateway,
                                        config.fallback_question));
  }
  return log;
}

std::vector<EpisodeLog> run_episodes(const std::vector<SeedPair>& pairs,
                                     const RecommenderConfig& config, const Corpus& corpus,
                                     const SnippetIndex& index, Gateway& gateway,
                                     int max_turns, std::uint64_t rng_seed,
                                     std::size_t parallelism) {
  std::vector<EpisodeLog> logs(pairs.size());
  parallel_for(pairs.size(), parallelism, [&](std::size_t i) {
    logs[i] = run_episode(pairs[i], config, corpus, index, gateway, max_turns, rng_seed + i);
  });
  return logs;
}

int hits_at_k(int rank, int k) {
  if (rank < 1 || k < 1) throw ConfigError("hits@k needs rank >= 1 and k >= 1");
  return rank <= k ? 1 : 0;
}

double reciprocal_rank(int rank) {
  if (rank < 1) throw ConfigError("reciprocal rank needs rank >= 1");
  return 1.0 / rank;
}

namespace {

constexpr std::size_t kMetrics = 5;  // hits1, hits5, hits10, mrr, avg_pos

std::array<double, kMetrics> metrics_of(int rank) {
  return {static_cast<double>(hits_at_k(rank, 1)), static_cast<double>(hits_at_k(rank, 5)),
          static_cast<double>(hits_at_k(rank, 10)), reciprocal_rank(rank),
          static_cast<double>(rank)};
}

// Linear interpolation between closest ranks of the sorted sample.
double percentile(std::vector<double>& sorted, double p) {
  if (sorted.size() == 1) return sorted.front();
  double pos = p * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(pos);
  auto hi = std::min(lo + 1, sorted.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

json interval_json(double mean, const Interval& ci) {
  return {{"mean", mean}, {"ci95", {ci.lo, ci.hi}}};
}

}  // namespace

MetricsReport aggregate(const std::vector<EpisodeLog>& episodes, std::size_t n_boot,
                        std::uint64_t rng_seed) {
  if (episodes.empty()) throw ConfigError("no episodes to aggregate");
  MetricsReport report;
  report.fingerprint = episodes.front().config_fingerprint;
  std::vector<const EpisodeLog*> valid;
  for (const auto& e : episodes) {
    if (e.config_fingerprint != report.fingerprint)
      throw ConfigError("episodes were produced under different configurations");
    if (e.valid) valid.push_back(&e);
    else ++report.n_invalid;
  }
  report.n_episodes = valid.size();
  if (valid.empty()) return report;
  const std::size_t turns = valid.front()->per_turn_metric_rank.size();
  for (const auto* e : valid)
    if (e->per_turn_metric_rank.size() != turns)
      throw ConfigError("valid episodes have different numbers of turns");

  // values[t][m][i]: metric m of episode i at turn t.
  const std::size_t n = valid.size();
  std::vector<std::array<std::vector<double>, kMetrics>> values(turns);
  for (std::size_t t = 0; t < turns; ++t) {
    for (auto& column : values[t]) column.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto m = metrics_of(valid[i]->per_turn_metric_rank[t]);
      for (std::size_t k = 0; k < kMetrics; ++k) values[t][k][i] = m[k];
    }
  }

  std::vector<std::array<std::vector<double>, kMetrics>> boot(turns);
  for (auto& per_metric : boot)
    for (auto& samples : per_metric) samples.reserve(n_boot);
  std::mt19937_64 rng(rng_seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> draw(n);
  for (std::size_t b = 0; b < n_boot; ++b) {
    for (auto& d : draw) d = pick(rng);
    for (std::size_t t = 0; t < turns; ++t) {
      for (std::size_t k = 0; k < kMetrics; ++k) {
        double sum = 0.0;
        for (auto d : draw) sum += values[t][k][d];
        boot[t][k].push_back(sum / static_cast<double>(n));
      }
    }
  }

  for (std::size_t t = 0; t < turns; ++t) {
    std::array<double, kMetrics> mean{};
    std::array<Interval, kMetrics> ci{};
    for (std::size_t k = 0; k < kMetrics; ++k) {
      double sum = 0.0;
      for (double v : values[t][k]) sum += v;
      mean[k] = sum / static_cast<double>(n);
      if (n_boot == 0) {
        ci[k] = {mean[k], mean[k]};
        continue;
      }
      auto& samples = boot[t][k];
      std::sort(samples.begin(), samples.end());
      ci[k] = {percentile(samples, 0.025), percentile(samples, 0.975)};
    }
    report.per_turn.push_back({static_cast<int>(t + 1), mean[0], mean[1], mean[2], mean[3],
                               mean[4], ci[0], ci[1], ci[2], ci[3], ci[4]});
  }
  return report;
}

json to_json(const MetricsReport& report) {
  json turns = json::array();
  for (const auto& m : report.per_turn) {
    turns.push_back({{"turn", m.turn},
                     {"hits1", interval_json(m.hits1, m.ci_hits1)},
                     {"hits5", interval_json(m.hits5, m.ci_hits5)},
                     {"hits10", interval_json(m.hits10, m.ci_hits10)},
                     {"mrr", interval_json(m.mrr, m.ci_mrr)},
                     {"avg_pos", interval_json(m.avg_pos, m.ci_avg_pos)}});
  }
  return {{"n_episodes", report.n_episodes},
          {"n_invalid", report.n_invalid},
          {"fingerprint", report.fingerprint},
          {"per_turn", turns}};
}

namespace {

std::string cell(double mean, const Interval& ci, int decimals) {
  return fmt::format("{:.{}f} [{:.{}f}, {:.{}f}]", mean, decimals, ci.lo, decimals, ci.hi,
                     decimals);
}

std::string metrics_row(const std::string& label, const TurnMetrics& m) {
  return fmt::format("{:<12} {:<22} {:<22} {:<22} {:<22} {}", label,
                     cell(m.hits1, m.ci_hits1, 3), cell(m.hits5, m.ci_hits5, 3),
                     cell(m.hits10, m.ci_hits10, 3), cell(m.mrr, m.ci_mrr, 3),
                     cell(m.avg_pos, m.ci_avg_pos, 1));
}

std::string header(const std::string& first) {
  return fmt::format("{:<12} {:<22} {:<22} {:<22} {:<22} {}\n", first, "Hits@1", "Hits@5",
                     "Hits@10", "MRR", "Avg Pos");
}

}  // namespace

std::string render_turn_table(const MetricsReport& report) {
  std::string out = header("Turn");
  for (const auto& m : report.per_turn) out += metrics_row(std::to_string(m.turn), m) + "\n";
  out += fmt::format("episodes: {} valid, {} invalid\n", report.n_episodes, report.n_invalid);
  return out;
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::supported: return "supported";
    case Verdict::hallucinated: return "hallucinated";
    case Verdict::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

namespace {

std::optional<Verdict> read_verdict(const std::string& raw) {
  std::string word;
  for (char c : text::to_lower(text::trim(raw))) {
    if (!std::isalpha(static_cast<unsigned char>(c))) break;
    word += c;
  }
  if (word == "yes") return Verdict::supported;
  if (word == "no") return Verdict::hallucinated;
  return std::nullopt;
}

}  // namespace

Verdict judge_faithfulness(const Snippet& snippet, const Review& source_review, Domain domain,
                           Gateway& gateway) {
  if (snippet.origin != SnippetOrigin::review)
    throw ConfigError("only review snippets can be judged against a review");
  if (snippet.source_review_id != source_review.review_id)
    throw ConfigError("snippet " + snippet.snippet_id + " does not come from review " +
                      source_review.review_id);
  auto req = prompts::judge(domain, snippet.text, source_review.text);
  if (auto v = read_verdict(gateway.chat(req))) return *v;
  req.tag = std::string(prompts::tags::judge_retry);
  if (auto v = read_verdict(gateway.chat(req))) return *v;
  return Verdict::indeterminate;
}

double FaithfulnessReport::hallucination_rate() const {
  auto decided = supported + hallucinated;
  return decided == 0 ? 0.0 : static_cast<double>(hallucinated) / static_cast<double>(decided);
}

json to_json(const FaithfulnessReport& r) {
  json verdicts = json::array();
  for (const auto& [id, v] : r.verdicts) verdicts.push_back({{"snippet_id", id}, {"verdict", to_string(v)}});
  return {{"judged", r.judged},
          {"supported", r.supported},
          {"hallucinated", r.hallucinated},
          {"indeterminate", r.indeterminate},
          {"hallucination_rate", r.hallucination_rate()},
          {"verdicts", verdicts}};
}

FaithfulnessReport judge_sample(const std::vector<Snippet>& snippets, const Corpus& corpus,
                                Domain domain, Gateway& gateway, std::size_t n,
                                std::uint64_t rng_seed) {
  std::vector<const Snippet*> pool;
  for (const auto& s : snippets)
    if (s.origin == SnippetOrigin::review) pool.push_back(&s);
  std::vector<const Snippet*> picked;
  std::sample(pool.begin(), pool.end(), std::back_inserter(picked), n,
              std::mt19937_64(rng_seed));
  FaithfulnessReport report;
  for (const Snippet* s : picked) {
    const Review* review = corpus.find_review(*s->source_review_id);
    if (!review) throw NotFoundError("source review " + *s->source_review_id + " is missing");
    Verdict v = judge_faithfulness(*s, *review, domain, gateway);
    ++report.judged;
    if (v == Verdict::supported) ++report.supported;
    else if (v == Verdict::hallucinated) ++report.hallucinated;
    else ++report.indeterminate;
    report.verdicts.emplace_back(s->snippet_id, v);
  }
  return report;
}

json Comparison::to_json() const {
  json out = json::array();
  for (std::size_t i = 0; i < names.size(); ++i)
    out.push_back({{"name", names[i]}, {"report", snipcrs::to_json(reports[i])}});
  return out;
}

std::string Comparison::render() const {
  std::string out = header("Method");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (reports[i].per_turn.empty()) {
      out += fmt::format("{:<12} (no valid episodes)\n", names[i]);
      continue;
    }
    out += metrics_row(names[i], reports[i].per_turn.back()) + "\n";
  }
  return out;
}

Comparison compare_granularities(const Corpus& corpus, const std::vector<SeedPair>& pairs,
                                 const std::vector<ComparisonEntry>& entries,
                                 Gateway& gateway, int max_turns, std::uint64_t rng_seed,
                                 std::size_t n_boot, std::size_t parallelism) {
  Comparison out;
  for (const auto& e : entries) {
    if (!e.index) throw ConfigError("configuration " + e.name + " has no index");
    auto logs = run_episodes(pairs, e.config, corpus, *e.index, gateway, max_turns, rng_seed,
                             parallelism);
    out.names.push_back(e.name);
    out.reports.push_back(aggregate(logs, n_boot, rng_seed));
  }
  return out;
}

}  // namespace snipcrs
