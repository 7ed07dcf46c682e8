#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "snipcrs/corpus.hpp"
#include "snipcrs/domain.hpp"
#include "snipcrs/fusion.hpp"
#include "snipcrs/gateway.hpp"

namespace snipcrs {

using AnonymizationMap = std::vector<std::pair<std::string, std::string>>;

// Strings that identify `item`: its name, the name without a leading "The",
// and every run of two or more capitalized name tokens. Longest first.
std::vector<std::string> item_aliases(const Item& item);

// Whole-word, case-insensitive occurrence of any alias.
bool mentions_any(std::string_view text, const std::vector<std::string>& aliases);

// Replaces each alias occurrence (whole words, case-insensitive, longest
// alias first) with the domain's placeholder. The map lists only aliases
// that occurred.
std::pair<std::string, AnonymizationMap> anonymize(std::string_view text, const Item& item,
                                                   Domain domain);

struct ReviewSummaries {
  std::string positive;
  std::string negative;  // empty when there are no negative reviews
};

// Summaries of the five most helpful positive (rating >= 4) and negative
// (rating <= 2) reviews, helpful votes descending then review_id.
ReviewSummaries summarize_reviews(const Item& item, const std::vector<const Review*>& reviews,
                                  Domain domain, std::string_view item_info,
                                  Gateway& gateway);

struct SimContext {
  std::string target_item_id;
  Domain domain = Domain::restaurant;
  std::string item_info_block;
  std::string review_summary_block;
  std::string seed_review_text;
  std::string negative_summary;  // kept for audit; not shown to the simulator
  AnonymizationMap anonymization_map;  // every alias of the target

  std::vector<std::string> originals() const;
};

nlohmann::json to_json(const SimContext& ctx);

// "Category: ..." line (with a dash for the product domains) then one
// "- key: value" line per attribute.
std::string item_info_block(const Item& item, Domain domain);

// The seed review must belong to `target`; every other review of the target
// in `corpus` feeds the summaries.
SimContext build_sim_context(const Item& target, const Review& seed_review,
                             const Corpus& corpus, Domain domain, Gateway& gateway);

// One seeker line answering `question`. An answer naming the target is
// regenerated once under a retry tag; a second leak throws LeakageError.
std::string simulate_response(const SimContext& ctx, const std::vector<Utterance>& history,
                              std::string_view question, Gateway& gateway);

}  // namespace snipcrs
