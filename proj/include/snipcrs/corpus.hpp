#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "snipcrs/snippet.hpp"

namespace snipcrs {

using Attribute = std::pair<std::string, std::string>;

struct Item {
  std::string item_id;
  std::string name;
  std::vector<Attribute> attributes;
  std::vector<std::string> categories;
  std::vector<std::string> review_ids;

  friend bool operator==(const Item&, const Item&) = default;
};

struct Review {
  std::string review_id;
  std::string item_id;
  std::string user_id;
  std::string text;
  int rating = 0;
  int helpful_votes = 0;

  friend bool operator==(const Review&, const Review&) = default;
};

// `review_count` is the user's total review count in the source dataset,
// which may exceed the number of their reviews kept in the corpus.
struct UserRecord {
  std::string user_id;
  int review_count = 0;

  friend bool operator==(const UserRecord&, const UserRecord&) = default;
};

// Immutable after construction. Item::review_ids is always rebuilt from the
// reviews so it resolves by construction.
class Corpus {
 public:
  Corpus() = default;

  // Throws CorpusError on duplicate ids, dangling item references, ratings
  // outside 1..5, or blank review text. Users without an explicit record get
  // a count derived from the corpus reviews.
  static Corpus assemble(std::vector<Item> items, std::vector<Review> reviews,
                         std::vector<UserRecord> user_records = {});

  const std::vector<Item>& items() const { return items_; }
  const std::vector<Review>& reviews() const { return reviews_; }
  const std::vector<UserRecord>& users() const { return users_; }
  // Only the records that came from the source (not derived).
  const std::vector<UserRecord>& user_records() const { return user_records_; }

  const Item* find_item(std::string_view item_id) const;
  const Review* find_review(std::string_view review_id) const;
  const Item& item(std::string_view item_id) const;  // throws NotFoundError
  std::vector<const Review*> reviews_of(const Item& item) const;
  int user_review_count(std::string_view user_id) const;  // 0 if unknown

 private:
  std::vector<Item> items_;
  std::vector<Review> reviews_;
  std::vector<UserRecord> users_;
  std::vector<UserRecord> user_records_;
  std::unordered_map<std::string, std::size_t> item_pos_;
  std::unordered_map<std::string, std::size_t> review_pos_;
  std::unordered_map<std::string, std::size_t> user_pos_;
};

enum class CorpusFormat { yelp_jsonl, amazon_jsonl, native_jsonl };

// Accepts "yelp", "amazon", "native" and the *_jsonl spellings.
CorpusFormat parse_corpus_format(std::string_view tag);

struct LoadResult {
  Corpus corpus;
  std::size_t lines = 0;
  std::size_t skipped = 0;   // malformed or failing integrity
  std::size_t filtered = 0;  // well-formed but excluded by a dataset rule
};

// Reads one file, or every *.json / *.jsonl file of a directory in name
// order. Throws CorpusError when the path is unreadable or more than half of
// the non-blank lines are malformed.
LoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format);

// Writes the native one-record-per-line format.
void save_native_corpus(const Corpus& corpus, const std::filesystem::path& path);

Corpus filter_items(const Corpus& corpus, int min_reviews);
Corpus filter_items_if(const Corpus& corpus,
                       const std::function<bool(const Item&)>& keep);

// Removes the given reviews (e.g. seed reviews hidden from the recommender).
Corpus exclude_reviews(const Corpus& corpus,
                       const std::vector<std::string>& review_ids);

// Templated statements for categories and attributes, in record order.
std::vector<Snippet> attribute_to_snippets(const Item& item);

struct SeedPair {
  std::string user_id;
  std::string item_id;

  friend bool operator==(const SeedPair&, const SeedPair&) = default;
  friend auto operator<=>(const SeedPair&, const SeedPair&) = default;
};

struct SeedEligibility {
  int min_rating = 4;
  int min_helpful_votes = 1;
  int min_user_reviews = 10;
  int max_user_reviews = 99;
};

// Distinct eligible (user, item) edges, sorted.
std::vector<SeedPair> eligible_seed_edges(const Corpus& corpus,
                                          const SeedEligibility& rule = {});

// Maximum-cardinality matching over `edges`, sorted by (user, item).
std::vector<SeedPair> maximum_matching(const std::vector<SeedPair>& edges);

std::vector<SeedPair> select_seed_pairs(const Corpus& corpus, std::size_t n,
                                        std::uint64_t rng_seed,
                                        const SeedEligibility& rule = {});

// The review a seed pair stands for: the user's highest-voted eligible
// review of the item (ties by review_id).
const Review& seed_review_for(const Corpus& corpus, const SeedPair& pair,
                              const SeedEligibility& rule = {});

std::vector<std::string> split_sentences(std::string_view text);

}  // namespace snipcrs
