#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "snipcrs/query.hpp"
#include "snipcrs/retrieval.hpp"

namespace snipcrs {

class Corpus;

enum class Role { recommender, seeker };

std::string to_string(Role r);
Role parse_role(std::string_view tag);

struct Utterance {
  Role role = Role::recommender;
  std::string text;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

inline constexpr int kSessionSchemaVersion = 1;

struct SessionState {
  std::string session_id;
  int turn = 0;
  std::map<std::string, double> scores;  // touched items only
  std::set<std::string> touched;
  std::vector<QuerySnippet> known_intents;
  std::vector<Utterance> history;
  double kappa = 60.0;
  std::uint64_t rng_seed = 0;
};

nlohmann::json to_json(const SessionState& s);
SessionState session_from_json(const nlohmann::json& j);  // checks schema version

// sgn(query) / (kappa + best rank of the item in the group), for every item
// present in the group, keyed by item id.
std::map<std::string, double> group_contributions(const RankedGroup& group, double kappa);

// Adds every group's contributions to the cumulative scores, groups in the
// given order, and advances the turn.
SessionState update_scores(SessionState state, const std::vector<RankedGroup>& groups);

struct RankedEntry {
  std::string item_id;
  double score = 0.0;
  int rank = 0;     // position, 1-based; ties ordered by item_id
  int tie_lo = 0;   // first position sharing this exact score
  int tie_hi = 0;   // last position sharing this exact score
};

struct RankedList {
  std::vector<RankedEntry> entries;

  const RankedEntry* find(std::string_view item_id) const;
};

nlohmann::json to_json(const RankedList& list, std::size_t limit = SIZE_MAX);

// Touched items by score descending.
RankedList rank_items(const SessionState& state);

// The rank used for metrics. A touched target draws uniformly from the
// positions of its tie group; an untouched one from (touched + 1)..total.
int metric_rank_of(const RankedList& ranking, std::string_view target,
                   std::size_t total_items, std::mt19937_64& rng);
// Same, but throws NotFoundError when `target` is not a corpus item.
int metric_rank_of(const RankedList& ranking, std::string_view target,
                   const Corpus& corpus, std::mt19937_64& rng);

}  // namespace snipcrs
