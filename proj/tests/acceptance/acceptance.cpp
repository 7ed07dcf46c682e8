// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
// failure. Every check compares the library against an oracle from
// tests/support that shares no code with it.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "oracles.hpp"
#include "snipcrs/errors.hpp"
#include "snipcrs/evaluation.hpp"
#include "snipcrs/fusion.hpp"
#include "snipcrs/retrieval.hpp"
#include "snipcrs/simulator.hpp"
#include "snipcrs/text.hpp"
#include "world.hpp"

using namespace snipcrs;
using testing::OracleGroup;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Reports produced by the criteria below; the metric-invariance check
// inspects all of them.
std::vector<MetricsReport> g_reports;

// ---------------------------------------------------------------------------

Outcome fusion_oracle() {
  auto start = Clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_int_distribution<std::size_t> items(1, 20), groups(0, 10), turns(1, 3),
      members(0, 15);
  for (int instance = 0; instance < 1000; ++instance) {
    testing::GroupFactory f;
    std::vector<OracleGroup> all;
    SessionState s;
    const auto n_items = items(rng);
    const auto n_turns = turns(rng);
    for (std::size_t t = 0; t < n_turns; ++t) {
      auto gs = testing::random_groups(rng, groups(rng), n_items, members(rng));
      all.insert(all.end(), gs.begin(), gs.end());
      s = update_scores(s, f.make_all(gs));
    }
    auto expect = testing::formula_order(testing::formula_scores(all, 60.0));
    auto got = rank_items(s);
    if (got.entries.size() != expect.size())
      return {false, fmt::format("instance {}: {} ranked, oracle {}", instance,
                                 got.entries.size(), expect.size())};
    for (std::size_t i = 0; i < expect.size(); ++i)
      if (got.entries[i].item_id != expect[i])
        return {false, fmt::format("instance {} position {}: {} vs oracle {}", instance, i + 1,
                                   got.entries[i].item_id, expect[i])};
  }
  double secs = seconds_since(start);
  return {secs < 5.0, fmt::format("1000 instances identical, {:.2f} s (limit 5 s)", secs)};
}

Outcome rrf_unit_values() {
  testing::GroupFactory f;
  double prefer = update_scores({}, {f.make({1, {"A"}})}).scores.at("A");
  double dislike = update_scores({}, {f.make({-1, {"A"}})}).scores.at("A");
  bool ok = std::abs(prefer - 1.0 / 61) <= 1e-12 && std::abs(dislike + 1.0 / 61) <= 1e-12;
  // Item A holds ranks 2 and 7 in the first group, 5 in the second.
  auto s = update_scores({}, {f.make({1, {"B", "A", "C", "D", "E", "F", "A"}}),
                              f.make({1, {"B", "C", "D", "E", "A"}}),
                              f.make({-1, {"C", "C", "C"}})});
  ok = ok && std::abs(s.scores.at("A") - (1.0 / 62 + 1.0 / 65)) <= 1e-12;
  ok = ok && std::abs(s.scores.at("C") - (1.0 / 63 + 1.0 / 62 - 1.0 / 61)) <= 1e-12;
  return {ok, fmt::format("prefer {:.15f}, dislike {:.15f}, dedup A {:.15f}", prefer, dislike,
                          s.scores.at("A"))};
}

Outcome retrieval_oracle() {
  static const std::vector<std::string> words = {
      "spicy", "tacos", "quiet", "patio",  "cheap",  "wine",   "friendly", "staff",
      "slow",  "noodles", "fresh", "bread", "loud",  "music", "cozy",   "booths"};
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<std::size_t> word(0, words.size() - 1), len(1, 4);
  auto sentence = [&] {
    std::string s;
    for (std::size_t i = 0, n = len(rng); i < n; ++i) s += (i ? " " : "") + words[word(rng)];
    return s;
  };
  std::vector<Snippet> units;
  for (int i = 0; i < 300; ++i)
    units.push_back({fmt::format("r{:03}#s1", (i * 7) % 300), fmt::format("it{}", i % 40),
                     sentence(), SnippetOrigin::review, fmt::format("r{:03}", (i * 7) % 300)});
  auto gw = Gateway::passthrough(std::make_shared<MockBackend>(11, 32));
  auto index = build_index(units, *gw);
  std::size_t compared = 0;
  for (int q = 0; q < 100; ++q) {
    QuerySnippet qs;
    qs.text = sentence();
    auto qv = gw->embed({qs.text})[0].values;
    for (std::size_t k : {1, 25, 100}) {
      auto got = retrieve_topk(index, qs, k, *gw);
      auto expect = testing::exhaustive_topk(index, qv, k);
      if (got.size() != expect.size())
        return {false, fmt::format("query '{}' k={}: size {} vs {}", qs.text, k, got.size(),
                                   expect.size())};
      for (std::size_t i = 0; i < got.size(); ++i)
        if (got[i].snippet != &index.snippet(expect[i]))
          return {false, fmt::format("query '{}' k={} position {} differs", qs.text, k, i + 1)};
      ++compared;
    }
  }
  return {true, fmt::format("{} (query, k) lists identical to the exhaustive scan", compared)};
}

// NLI answers are read back from the premise, which encodes them. The triple
// (e, 1 - e, 0) sums to exactly 1 for the values used below, so the
// gateway's normalization leaves e bit-identical.
class EncodedNli : public MockBackend {
 public:
  NliScores nli(const std::string& premise, const std::string&) override {
    double e = std::stod(premise.substr(0, premise.find('|')));
    return {e, 1.0 - e, 0.0};
  }
};

Outcome nli_gate_totality() {
  const double t = 0.2;
  auto gw = Gateway::passthrough(std::make_shared<EncodedNli>());
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> score(0.0, 1.0);
  std::uniform_int_distribution<int> dyadic(0, 1 << 20);
  std::uniform_int_distribution<int> n_cands(0, 12), item(0, 7), pick(0, 9);
  const double edges[] = {t, std::nextafter(t, 0.0), std::nextafter(t, 1.0), 0.0, 1.0};
  std::size_t dropped = 0, kept = 0;
  for (int c = 0; c < 10000; ++c) {
    std::vector<Snippet> units;
    const int n = n_cands(rng);
    units.reserve(n);
    std::vector<double> entail;
    for (int i = 0; i < n; ++i) {
      int p = pick(rng);
      double e = p < 5 ? edges[p] : std::ldexp(dyadic(rng), -20);
      entail.push_back(e);
      units.push_back({fmt::format("c{}#s{}", c, i), fmt::format("it{}", item(rng)),
                       fmt::format("{:.17g}|{}", e, i), SnippetOrigin::review, "r"});
    }
    std::vector<Candidate> cands;
    for (auto& u : units) cands.push_back({&u, score(rng)});
    QuerySnippet qs;
    qs.text = "q";
    qs.sentiment = c % 2 ? Sentiment::dislike : Sentiment::prefer;
    auto group = entailment_filter_rank(cands, qs, t, *gw);

    // Oracle: only candidates at or above the threshold may score.
    std::vector<std::tuple<double, double, std::string, std::string>> survivors;
    for (int i = 0; i < n; ++i) {
      if (entail[i] < t) {
        ++dropped;
        continue;
      }
      survivors.emplace_back(-entail[i], -cands[i].similarity, units[i].snippet_id,
                             units[i].item_id);
    }
    kept += survivors.size();
    std::sort(survivors.begin(), survivors.end());
    OracleGroup og{qs.sentiment == Sentiment::prefer ? 1 : -1, {}};
    for (const auto& s : survivors) og.items_by_rank.push_back(std::get<3>(s));
    auto expect = testing::formula_scores({og}, 60.0);

    auto state = update_scores({}, {group});
    if (state.scores.size() != expect.size())
      return {false, fmt::format("case {}: {} items scored, oracle {}", c, state.scores.size(),
                                 expect.size())};
    for (const auto& [id, v] : expect)
      if (!state.scores.count(id) || state.scores.at(id) != v)
        return {false, fmt::format("case {}: item {} score differs", c, id)};
    for (const auto& m : group.members)
      if (m.entailment < t) return {false, fmt::format("case {}: member below threshold", c)};
  }
  return {true, fmt::format("10000 cases, {} sub-threshold candidates never scored, {} kept",
                            dropped, kept)};
}

Outcome antisymmetry() {
  std::mt19937_64 rng(505);
  for (int instance = 0; instance < 1000; ++instance) {
    testing::GroupFactory f;
    auto turn = testing::random_groups(rng, 1 + instance % 10, 20, 12);
    auto flipped = turn;
    for (auto& g : flipped) g.sign = -g.sign;
    auto a = update_scores({}, f.make_all(turn));
    auto b = update_scores({}, f.make_all(flipped));
    if (a.touched != b.touched) return {false, fmt::format("instance {}: touched sets differ", instance)};
    for (const auto& [id, v] : a.scores)
      if (b.scores.at(id) != -v)
        return {false, fmt::format("instance {}: {} has {} vs {}", instance, id, v, b.scores.at(id))};
  }
  return {true, "1000 instances, flipped deltas are exact negations"};
}

Outcome metric_correctness() {
  // Extra synthetic reports on top of those from the episode criteria.
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> rank(1, 60);
  for (int r = 0; r < 20; ++r) {
    std::vector<EpisodeLog> logs(30);
    for (auto& l : logs) {
      l.config_fingerprint = "synthetic";
      for (int t = 0; t < 5; ++t) l.per_turn_metric_rank.push_back(rank(rng));
    }
    g_reports.push_back(aggregate(logs, 200, r));
  }
  std::size_t rows = 0;
  for (const auto& rep : g_reports)
    for (const auto& m : rep.per_turn) {
      ++rows;
      if (!(0.0 <= m.hits1 && m.hits1 <= m.hits5 && m.hits5 <= m.hits10 && m.hits10 <= 1.0))
        return {false, fmt::format("turn {} violates hits1 <= hits5 <= hits10", m.turn)};
      if (!(m.mrr > 0.0 && m.mrr <= 1.0)) return {false, "mrr outside (0, 1]"};
    }

  SessionState s;
  s.scores = {{"a", 0.5}, {"b", 0.2}, {"c", 0.2}, {"d", 0.2}, {"e", 0.1}};
  s.touched = {"a", "b", "c", "d", "e"};
  auto ranking = rank_items(s);
  const auto* target = ranking.find("c");
  if (!target || target->tie_lo != 2 || target->tie_hi != 4)
    return {false, "tie span for the target is not 2..4"};
  std::mt19937_64 draw(7);
  double sum = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) sum += metric_rank_of(ranking, "c", 50, draw);
  double mean = sum / n;
  bool ok = std::abs(mean - 3.0) <= 0.05;
  return {ok, fmt::format("{} report rows monotone; tied mean rank {:.4f} (3.0 +- 0.05)", rows, mean)};
}

Outcome planted_end_to_end() {
  auto start = Clock::now();
  auto w = testing::planted_world();
  RecommenderConfig cfg;
  auto run = [&](std::shared_ptr<Cassette> cassette) {
    Gateway gw(testing::scripted_backend(), cassette, CassetteMode::record);
    auto index = w.build_index(gw);
    return run_episode(w.pairs.at(0), cfg, w.corpus, index, gw, 3, 2024);
  };
  auto cassette = Cassette::in_memory();
  auto first = run(cassette);
  auto second = run(Cassette::in_memory());
  const auto a = to_json(first).dump();
  const auto b = to_json(second).dump();

  // Replaying the first run's cassette reproduces it too (the fingerprint
  // names the cassette instead of the backend, so compare without it).
  auto replay = Gateway::replay(cassette);
  auto index = w.build_index(*replay);
  auto replayed = to_json(run_episode(w.pairs.at(0), cfg, w.corpus, index, *replay, 3, 2024));
  auto expected = to_json(first);
  replayed.erase("config_fingerprint");
  expected.erase("config_fingerprint");

  int hit_turn = 0;
  for (std::size_t t = 0; t < first.per_turn_metric_rank.size(); ++t)
    if (first.per_turn_metric_rank[t] == 1) {
      hit_turn = static_cast<int>(t + 1);
      break;
    }
  g_reports.push_back(aggregate({first}, 100, 1));
  double secs = seconds_since(start);
  bool ok = first.valid && hit_turn >= 1 && hit_turn <= 3 && a == b && replayed == expected &&
            secs < 10.0;
  return {ok, fmt::format("ranks {}, Hits@1 at turn {}, logs {} ({} bytes), replay {}, {:.2f} s",
                          fmt::join(first.per_turn_metric_rank, "/"), hit_turn,
                          a == b ? "identical" : "DIFFER", a.size(),
                          replayed == expected ? "identical" : "DIFFERS", secs)};
}

std::vector<EpisodeLog> g_progression_logs;
testing::World g_progression_world;

Outcome progression() {
  g_progression_world = testing::progression_world(120, 100, 11);
  const auto& w = g_progression_world;
  auto gw = Gateway::passthrough(testing::scripted_backend());
  auto index = w.build_index(*gw, 8);
  RecommenderConfig cfg;
  cfg.k = 100;
  g_progression_logs = run_episodes(w.pairs, cfg, w.corpus, index, *gw, 5, 500, 8);
  std::size_t invalid = 0;
  for (const auto& l : g_progression_logs) invalid += !l.valid;
  if (invalid) return {false, fmt::format("{} invalid episodes", invalid)};
  auto report = aggregate(g_progression_logs, 1000, 3);
  g_reports.push_back(report);
  if (report.n_episodes != 100) return {false, fmt::format("{} episodes", report.n_episodes)};
  std::vector<std::string> curve;
  for (const auto& m : report.per_turn) curve.push_back(fmt::format("{:.2f}", m.hits10));
  double first = report.per_turn.front().hits10;
  double last = report.per_turn.back().hits10;
  return {last >= first, fmt::format("Hits@10 by turn {} over {} episodes", fmt::join(curve, " "),
                                     report.n_episodes)};
}

bool leaks(const std::string& response, const Item& target) {
  auto lower = text::to_lower(response);
  for (const auto& alias : item_aliases(target))
    if (lower.find(text::to_lower(alias)) != std::string::npos) return true;
  return text::contains_icase(response, target.name);
}

Outcome leakage() {
  std::size_t responses = 0, episodes = 0, invalid = 0;
  auto scan = [&](const std::vector<EpisodeLog>& logs, const Corpus& corpus) -> std::string {
    for (const auto& l : logs) {
      ++episodes;
      invalid += !l.valid;
      const auto& target = corpus.item(l.target_item_id);
      for (const auto& t : l.turns) {
        ++responses;
        if (leaks(t.response, target))
          return fmt::format("episode for {} turn {} leaked: {}", target.item_id, t.turn, t.response);
      }
    }
    return "";
  };
  if (auto err = scan(g_progression_logs, g_progression_world.corpus); !err.empty())
    return {false, err};

  // Planted world, once with the cooperative simulator and once with one
  // that names the target on its first attempt every turn.
  auto w = testing::planted_world();
  RecommenderConfig cfg;
  auto clean_gw = Gateway::passthrough(testing::scripted_backend());
  auto index = w.build_index(*clean_gw);
  auto honest = testing::scripted_backend(7);
  auto wrapped = std::make_shared<MockBackend>(7);
  wrapped->on("sim\\.respond$", std::string("Golden Lantern is the one I want."))
      .on(".*", [honest](const ChatRequest& r) { return honest->chat(r); });
  std::vector<EpisodeLog> logs{
      run_episode(w.pairs.at(0), cfg, w.corpus, index, *clean_gw, 5, 1),
      run_episode(w.pairs.at(0), cfg, w.corpus, index, *Gateway::passthrough(wrapped), 5, 1)};
  if (auto err = scan(logs, w.corpus); !err.empty()) return {false, err};
  return {invalid == 0 && responses > 0,
          fmt::format("{} responses over {} episodes, none leaked, {} invalid", responses,
                      episodes, invalid)};
}

Outcome matching() {
  std::mt19937_64 rng(1010);
  std::uniform_int_distribution<int> side(1, 8);
  std::bernoulli_distribution edge(0.3);
  for (int g = 0; g < 50; ++g) {
    std::vector<SeedPair> edges;
    int users = side(rng), items = side(rng);
    for (int u = 0; u < users; ++u)
      for (int i = 0; i < items; ++i)
        if (edge(rng)) edges.push_back({fmt::format("u{}", u), fmt::format("i{}", i)});
    auto m = maximum_matching(edges);
    auto expect = testing::exhaustive_matching_size(edges);
    std::set<std::string> us, is;
    for (const auto& p : m) {
      if (std::find(edges.begin(), edges.end(), p) == edges.end())
        return {false, fmt::format("graph {}: matched a non-edge", g)};
      us.insert(p.user_id);
      is.insert(p.item_id);
    }
    if (us.size() != m.size() || is.size() != m.size())
      return {false, fmt::format("graph {}: a vertex is matched twice", g)};
    if (m.size() != expect)
      return {false, fmt::format("graph {}: {} matched, exhaustive {}", g, m.size(), expect)};
  }
  return {true, "50 graphs, cardinality equals exhaustive search"};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"fusion-oracle-equivalence", fusion_oracle},
      {"rrf-unit-values", rrf_unit_values},
      {"retrieval-oracle", retrieval_oracle},
      {"nli-gate-totality", nli_gate_totality},
      {"sentiment-antisymmetry", antisymmetry},
      {"end-to-end-scripted-determinism", planted_end_to_end},
      {"progression-property", progression},
      {"simulator-leakage", leakage},
      {"metric-correctness", metric_correctness},
      {"seed-pair-matching", matching},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
