#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include <fmt/format.h>

#include "oracles.hpp"
#include "snipcrs/errors.hpp"
#include "snipcrs/snippet_index.hpp"

using namespace snipcrs;

namespace {

Snippet review_snippet(std::string id, std::string text = "some statement") {
  return {std::move(id), "item", std::move(text), SnippetOrigin::review, "rev"};
}

std::vector<float> random_vectors(std::size_t n, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> v(n * dim);
  for (auto& x : v) x = normal(rng);
  return v;
}

}  // namespace

TEST_CASE("single unit is its own nearest neighbour") {
  auto gw = Gateway::passthrough(std::make_shared<MockBackend>());
  auto index = build_index({review_snippet("a#s1", "quiet patio")}, *gw);
  CHECK(index.size() == 1);
  auto q = gw->embed({"quiet patio"})[0];
  auto hits = index.search(q.values, 5);
  REQUIRE(hits.size() == 1);
  CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("stored vectors are unit length") {
  auto gw = Gateway::passthrough(std::make_shared<MockBackend>(3, 48));
  std::vector<Snippet> units;
  for (int i = 0; i < 100; ++i)
    units.push_back(review_snippet(fmt::format("r{}#s1", i), fmt::format("dish {} tastes {}", i, i % 7)));
  auto index = build_index(units, *gw, 16);
  CHECK(index.dim() == 48);
  for (std::size_t i = 0; i < index.size(); ++i) {
    double n = 0;
    for (float x : index.vector(i)) n += static_cast<double>(x) * x;
    CHECK(std::sqrt(n) == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("search equals an exhaustive scan on random vectors") {
  std::mt19937_64 rng(21);
  const std::size_t n = 200, dim = 16;
  std::vector<Snippet> units;
  for (std::size_t i = 0; i < n; ++i) units.push_back(review_snippet(fmt::format("s{:03}", (i * 37) % n)));
  auto vecs = random_vectors(n, dim, rng);
  // A few exact duplicates force ties, which must break by snippet_id.
  for (std::size_t d = 0; d < dim; ++d) vecs[5 * dim + d] = vecs[6 * dim + d] = vecs[7 * dim + d];
  SnippetIndex index(Granularity::snippet, units, vecs, dim);
  for (int q = 0; q < 50; ++q) {
    auto query = random_vectors(1, dim, rng);
    if (q == 0) query.assign(vecs.begin() + 5 * dim, vecs.begin() + 6 * dim);
    for (std::size_t k : {1, 10, 200, 500}) {
      auto hits = index.search(query, k);
      auto oracle = testing::exhaustive_topk(index, query, k);
      REQUIRE(hits.size() == oracle.size());
      for (std::size_t i = 0; i < hits.size(); ++i) {
        CHECK(hits[i].index == oracle[i]);
        if (i) CHECK(hits[i - 1].similarity >= hits[i].similarity);
      }
    }
  }
}

TEST_CASE("orthogonal vectors") {
  SnippetIndex index(Granularity::snippet, {review_snippet("e1"), review_snippet("e2")},
                     {1, 0, 0, 3}, 2);
  auto hits = index.search(std::vector<float>{2, 0}, 1);
  REQUIRE(hits.size() == 1);
  CHECK(index.snippet(hits[0].index).snippet_id == "e1");
  CHECK(hits[0].similarity == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(index.search(std::vector<float>{0, 1}, 10).size() == 2);
}

TEST_CASE("index construction rejects inconsistent input") {
  CHECK_THROWS_AS(SnippetIndex(Granularity::snippet, {review_snippet("a")}, {1, 0, 0}, 2),
                  ConfigError);
  CHECK_THROWS_AS(SnippetIndex(Granularity::snippet, {review_snippet("a"), review_snippet("a")},
                               {1, 0, 0, 1}, 2),
                  ConfigError);
  CHECK_THROWS_AS(SnippetIndex(Granularity::snippet, {review_snippet("a", "two\nlines")}, {1, 0}, 2),
                  ConfigError);
  CHECK_THROWS_AS(SnippetIndex(Granularity::snippet, {review_snippet("a")}, {0, 0}, 2),
                  ConfigError);
  CHECK_THROWS_AS(SnippetIndex(Granularity::document, {review_snippet("a")}, {1, 0}, 2),
                  ConfigError);
  Snippet orphan = review_snippet("a");
  orphan.source_review_id.reset();
  CHECK_THROWS_AS(SnippetIndex(Granularity::snippet, {orphan}, {1, 0}, 2), ConfigError);
  SnippetIndex ok(Granularity::snippet, {review_snippet("a")}, {1, 0}, 2);
  CHECK_THROWS_AS(ok.search(std::vector<float>{1, 0, 0}, 1), ConfigError);
}

TEST_CASE("granularity is inferred from origins") {
  Snippet attr{"x#a000", "x", "it has WiFi as free.", SnippetOrigin::attribute, std::nullopt};
  Snippet doc{"r#d", "x", "Whole review.", SnippetOrigin::document, "r"};
  CHECK(granularity_of({review_snippet("a"), attr}) == Granularity::snippet);
  CHECK(granularity_of({doc}) == Granularity::document);
  CHECK_THROWS_AS(granularity_of({doc, attr}), ConfigError);
  CHECK_THROWS_AS(granularity_of({}), ConfigError);
}

TEST_CASE("save and load round trip") {
  std::mt19937_64 rng(4);
  std::vector<Snippet> units{review_snippet("a"), review_snippet("b", "other"),
                             {"x#a000", "x", "it has WiFi as free.", SnippetOrigin::attribute,
                              std::nullopt}};
  SnippetIndex index(Granularity::snippet, units, random_vectors(3, 8, rng), 8);
  auto dir = std::filesystem::temp_directory_path() / "snipcrs_index_test";
  std::filesystem::remove_all(dir);
  index.save(dir);
  CHECK(std::filesystem::file_size(dir / "vectors.bin") == 8 + 3 * 8 * 4);
  auto loaded = SnippetIndex::load(dir);
  CHECK(loaded.snippets() == index.snippets());
  CHECK(loaded.granularity() == Granularity::snippet);
  for (std::size_t i = 0; i < 3; ++i) {
    auto a = index.vector(i);
    auto b = loaded.vector(i);
    for (std::size_t d = 0; d < 8; ++d) CHECK(a[d] == doctest::Approx(b[d]).epsilon(1e-7));
  }
  std::filesystem::resize_file(dir / "vectors.bin", 20);
  CHECK_THROWS_AS(SnippetIndex::load(dir), ConfigError);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(SnippetIndex::load(dir), ConfigError);
}
