#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "snipcrs/gateway.hpp"
#include "snipcrs/snippet.hpp"

namespace snipcrs {

struct SearchHit {
  std::size_t index = 0;  // position in SnippetIndex::snippets()
  double similarity = 0.0;
};

// Immutable set of units with L2-normalized vectors and exact cosine search.
// Safe for concurrent searches.
class SnippetIndex {
 public:
  SnippetIndex() = default;
  // `vectors` holds snippets.size() * dim floats, row-major. Rows are
  // normalized here. Throws ConfigError on inconsistent sizes, duplicate ids,
  // blank or multi-line texts, or origins that do not fit `granularity`.
  SnippetIndex(Granularity granularity, std::vector<Snippet> snippets,
               std::vector<float> vectors, std::size_t dim);

  std::size_t size() const { return snippets_.size(); }
  bool empty() const { return snippets_.empty(); }
  std::size_t dim() const { return dim_; }
  Granularity granularity() const { return granularity_; }
  const std::vector<Snippet>& snippets() const { return snippets_; }
  const Snippet& snippet(std::size_t i) const { return snippets_.at(i); }
  std::span<const float> vector(std::size_t i) const;
  const Snippet* find(std::string_view snippet_id) const;

  // Top-k by cosine similarity, similarity descending then snippet_id
  // ascending. The query is normalized first.
  std::vector<SearchHit> search(std::span<const float> query, std::size_t k) const;

  // Writes snippets.jsonl and vectors.bin (little-endian uint32 dim, uint32
  // count, then count*dim float32).
  void save(const std::filesystem::path& dir) const;
  static SnippetIndex load(const std::filesystem::path& dir);

 private:
  Granularity granularity_ = Granularity::snippet;
  std::vector<Snippet> snippets_;
  std::vector<float> vectors_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> pos_;
};

// Granularity implied by the origins of `units`; throws ConfigError when
// they mix granularities or `units` is empty.
Granularity granularity_of(const std::vector<Snippet>& units);

SnippetIndex build_index(const std::vector<Snippet>& units, Gateway& gateway,
                         std::size_t batch_size = 64);

// Cosine of two vectors computed the way the index does (double accumulator).
double dot(std::span<const float> a, std::span<const float> b);

}  // namespace snipcrs
