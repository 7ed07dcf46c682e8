#include "snipcrs/fusion.hpp"

#include <algorithm>
#include <climits>

#include "snipcrs/corpus.hpp"
#include "snipcrs/errors.hpp"

namespace snipcrs {

using nlohmann::json;

std::string to_string(Role r) { return r == Role::recommender ? "recommender" : "seeker"; }

Role parse_role(std::string_view tag) {
  if (tag == "recommender") return Role::recommender;
  if (tag == "seeker") return Role::seeker;
  throw ConfigError("unknown role '" + std::string(tag) + "'");
}

json to_json(const SessionState& s) {
  json intents = json::array();
  for (const auto& q : s.known_intents) intents.push_back(to_json(q));
  json history = json::array();
  for (const auto& u : s.history) history.push_back({{"role", to_string(u.role)}, {"text", u.text}});
  return {{"schema_version", kSessionSchemaVersion},
          {"session_id", s.session_id},
          {"turn", s.turn},
          {"scores", s.scores},
          {"touched", s.touched},
          {"known_intents", intents},
          {"history", history},
          {"kappa", s.kappa},
          {"rng_seed", s.rng_seed}};
}

SessionState session_from_json(const json& j) {
  int version = j.value("schema_version", 0);
  if (version != kSessionSchemaVersion)
    throw ConfigError("unsupported session schema version " + std::to_string(version));
  SessionState s;
  s.session_id = j.at("session_id").get<std::string>();
  s.turn = j.at("turn").get<int>();
  s.scores = j.at("scores").get<std::map<std::string, double>>();
  s.touched = j.at("touched").get<std::set<std::string>>();
  for (const auto& q : j.at("known_intents")) s.known_intents.push_back(query_snippet_from_json(q));
  for (const auto& u : j.at("history"))
    s.history.push_back({parse_role(u.at("role").get<std::string>()), u.at("text").get<std::string>()});
  s.kappa = j.at("kappa").get<double>();
  s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return s;
}

std::map<std::string, double> group_contributions(const RankedGroup& group, double kappa) {
  std::map<std::string, int> best;
  for (const auto& m : group.members) {
    auto [it, inserted] = best.emplace(m.snippet->item_id, m.rank);
    if (!inserted) it->second = std::min(it->second, m.rank);
  }
  const double sgn = sign(group.query.sentiment);
  std::map<std::string, double> out;
  for (const auto& [item, rank] : best) out.emplace(item, sgn / (kappa + rank));
  return out;
}

SessionState update_scores(SessionState state, const std::vector<RankedGroup>& groups) {
  for (const auto& g : groups) {
    for (const auto& [item, delta] : group_contributions(g, state.kappa)) {
      state.scores[item] += delta;
      state.touched.insert(item);
    }
  }
  ++state.turn;
  return state;
}

const RankedEntry* RankedList::find(std::string_view item_id) const {
  for (const auto& e : entries)
    if (e.item_id == item_id) return &e;
  return nullptr;
}

json to_json(const RankedList& list, std::size_t limit) {
  json out = json::array();
  for (const auto& e : list.entries) {
    if (out.size() >= limit) break;
    out.push_back({{"item_id", e.item_id},
                   {"score", e.score},
                   {"rank", e.rank},
                   {"tie_lo", e.tie_lo},
                   {"tie_hi", e.tie_hi}});
  }
  return out;
}

RankedList rank_items(const SessionState& state) {
  RankedList list;
  for (const auto& item : state.touched) {
    auto it = state.scores.find(item);
    list.entries.push_back({item, it == state.scores.end() ? 0.0 : it->second, 0, 0, 0});
  }
  std::sort(list.entries.begin(), list.entries.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.item_id < b.item_id;
  });
  auto& e = list.entries;
  for (std::size_t lo = 0; lo < e.size();) {
    std::size_t hi = lo;
    while (hi + 1 < e.size() && e[hi + 1].score == e[lo].score) ++hi;
    for (std::size_t i = lo; i <= hi; ++i) {
      e[i].rank = static_cast<int>(i + 1);
      e[i].tie_lo = static_cast<int>(lo + 1);
      e[i].tie_hi = static_cast<int>(hi + 1);
    }
    lo = hi + 1;
  }
  return list;
}

int metric_rank_of(const RankedList& ranking, std::string_view target,
                   std::size_t total_items, std::mt19937_64& rng) {
  if (total_items < ranking.entries.size())
    throw ConfigError("total_items is smaller than the number of ranked items");
  int lo = 0;
  int hi = 0;
  if (const auto* e = ranking.find(target)) {
    lo = e->tie_lo;
    hi = e->tie_hi;
  } else {
    if (total_items == ranking.entries.size())
      throw NotFoundError("target is unranked but every item is ranked");
    lo = static_cast<int>(ranking.entries.size() + 1);
    hi = static_cast<int>(total_items);
  }
  if (lo == hi) return lo;
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

int metric_rank_of(const RankedList& ranking, std::string_view target,
                   const Corpus& corpus, std::mt19937_64& rng) {
  if (!corpus.find_item(target))
    throw NotFoundError("target " + std::string(target) + " is not in the corpus");
  return metric_rank_of(ranking, target, corpus.items().size(), rng);
}

}  // namespace snipcrs
