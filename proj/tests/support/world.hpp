#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <deque>

#include "oracles.hpp"
#include "snipcrs/corpus.hpp"
#include "snipcrs/retrieval.hpp"
#include "snipcrs/gateway.hpp"
#include "snipcrs/snippet_index.hpp"

// Synthetic corpora and a prompt-reading mock used by unit and acceptance
// tests. Everything here is deterministic in its seed.
namespace snipcrs::testing {

// MockBackend whose chat rules read the prompt the way a cooperative model
// would: reviews split into their sentences, seeker answers into one intent
// per sentence, the simulator answers with the next sentence of its own
// review, the judge says yes when the proposition appears in the review.
std::shared_ptr<MockBackend> scripted_backend(std::uint64_t seed = 7, std::size_t dim = 64);

// Text between the last `open` and the next `close` after it; empty if absent.
std::string between_last(const std::string& s, const std::string& open,
                         const std::string& close);

// Mock whose NLI answers come from a table keyed by premise (entailment
// only; the rest splits evenly). Unknown premises fail with a permanent
// backend error.
class TableNliBackend : public MockBackend {
 public:
  explicit TableNliBackend(std::map<std::string, double> entail) : entail_(std::move(entail)) {}
  NliScores nli(const std::string& premise, const std::string& hypothesis) override;

 private:
  std::map<std::string, double> entail_;
};

// Turns oracle groups into engine RankedGroups. Owns the snippets the
// groups point at, so it must outlive them.
class GroupFactory {
 public:
  RankedGroup make(const OracleGroup& g);
  std::vector<RankedGroup> make_all(const std::vector<OracleGroup>& gs);

 private:
  std::deque<Snippet> snippets_;
};

// Random groups over items "it00".."it{n_items-1}"; members may repeat an
// item within a group.
std::vector<OracleGroup> random_groups(std::mt19937_64& rng, std::size_t n_groups,
                                       std::size_t n_items, std::size_t max_members);

struct World {
  Corpus corpus;                  // everything, the simulator's view
  std::vector<SeedPair> pairs;    // selected seed pairs
  std::vector<std::string> hidden_reviews;  // seed review ids
  Corpus visible;                 // corpus minus seed reviews

  SnippetIndex build_index(Gateway& gateway, std::size_t parallelism = 1) const;
};

// 25 restaurants; exactly one serves saffron ice cream, and one eligible
// seeker loves it.
World planted_world();
inline constexpr const char* kPlantedTarget = "p07";

// `n_items` restaurants that each serve five of forty dishes, and `n_seekers`
// eligible users whose seed review lists the five dishes of their item.
World progression_world(std::size_t n_items = 120, std::size_t n_seekers = 100,
                        std::uint64_t seed = 11);

}  // namespace snipcrs::testing
