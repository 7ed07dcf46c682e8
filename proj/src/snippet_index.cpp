#include "snipcrs/snippet_index.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "json.hpp"
#include "snipcrs/errors.hpp"
#include "snipcrs/text.hpp"

namespace snipcrs {

using nlohmann::json;

namespace {

void normalize_row(std::span<float> row) {
  double norm = 0.0;
  for (float x : row) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw ConfigError("cannot index a zero vector");
  for (float& x : row) x = static_cast<float>(x / norm);
}

template <typename T>
void put_le(std::ostream& out, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), bytes.size());
  } else {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
}

template <typename T>
T get_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes{};
  if (!in.read(bytes.data(), bytes.size())) throw ConfigError("truncated vectors.bin");
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

json snippet_to_json(const Snippet& s) {
  json j = {{"snippet_id", s.snippet_id},
            {"item_id", s.item_id},
            {"text", s.text},
            {"origin", to_string(s.origin)}};
  if (s.source_review_id) j["source_review_id"] = *s.source_review_id;
  return j;
}

Snippet snippet_from_json(const json& j) {
  Snippet s;
  s.snippet_id = j.at("snippet_id").get<std::string>();
  s.item_id = j.at("item_id").get<std::string>();
  s.text = j.at("text").get<std::string>();
  s.origin = parse_origin(j.at("origin").get<std::string>());
  if (j.contains("source_review_id"))
    s.source_review_id = j.at("source_review_id").get<std::string>();
  return s;
}

}  // namespace

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

Granularity granularity_of(const std::vector<Snippet>& units) {
  if (units.empty()) throw ConfigError("no units to index");
  for (auto g : {Granularity::snippet, Granularity::document, Granularity::sentence}) {
    if (std::all_of(units.begin(), units.end(),
                    [g](const Snippet& s) { return origin_fits(s.origin, g); }))
      return g;
  }
  throw ConfigError("units mix granularities");
}

SnippetIndex::SnippetIndex(Granularity granularity, std::vector<Snippet> snippets,
                           std::vector<float> vectors, std::size_t dim)
    : granularity_(granularity),
      snippets_(std::move(snippets)),
      vectors_(std::move(vectors)),
      dim_(dim) {
  if (dim_ == 0 && !snippets_.empty()) throw ConfigError("index dimension is zero");
  if (vectors_.size() != snippets_.size() * dim_)
    throw ConfigError(fmt::format("index has {} snippets but {} floats at dim {}",
                                  snippets_.size(), vectors_.size(), dim_));
  pos_.reserve(snippets_.size());
  for (std::size_t i = 0; i < snippets_.size(); ++i) {
    const auto& s = snippets_[i];
    if (text::trim(s.text).empty() || s.text.find('\n') != std::string::npos)
      throw ConfigError("snippet " + s.snippet_id + " must be one nonempty line");
    if (!origin_fits(s.origin, granularity_))
      throw ConfigError("snippet " + s.snippet_id + " of origin " + to_string(s.origin) +
                        " does not fit a " + to_string(granularity_) + " index");
    if (s.origin == SnippetOrigin::review && !s.source_review_id)
      throw ConfigError("review snippet " + s.snippet_id + " has no source review");
    if (!pos_.emplace(s.snippet_id, i).second)
      throw ConfigError("duplicate snippet id " + s.snippet_id);
    normalize_row(std::span<float>(vectors_.data() + i * dim_, dim_));
  }
}

std::span<const float> SnippetIndex::vector(std::size_t i) const {
  if (i >= snippets_.size()) throw NotFoundError("index position out of range");
  return {vectors_.data() + i * dim_, dim_};
}

const Snippet* SnippetIndex::find(std::string_view snippet_id) const {
  auto it = pos_.find(std::string(snippet_id));
  return it == pos_.end() ? nullptr : &snippets_[it->second];
}

std::vector<SearchHit> SnippetIndex::search(std::span<const float> query,
                                            std::size_t k) const {
  if (query.size() != dim_)
    throw ConfigError(fmt::format("query has dim {}, index has {}", query.size(), dim_));
  std::vector<float> q(query.begin(), query.end());
  normalize_row(q);

  std::vector<SearchHit> hits(snippets_.size());
  for (std::size_t i = 0; i < snippets_.size(); ++i) hits[i] = {i, dot(q, vector(i))};
  auto before = [this](const SearchHit& a, const SearchHit& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return snippets_[a.index].snippet_id < snippets_[b.index].snippet_id;
  };
  k = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k),
                    hits.end(), before);
  hits.resize(k);
  return hits;
}

void SnippetIndex::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ofstream meta(dir / "snippets.jsonl");
  if (!meta) throw ConfigError("cannot write " + (dir / "snippets.jsonl").string());
  for (const auto& s : snippets_) meta << snippet_to_json(s).dump() << '\n';

  std::ofstream bin(dir / "vectors.bin", std::ios::binary);
  if (!bin) throw ConfigError("cannot write " + (dir / "vectors.bin").string());
  put_le<std::uint32_t>(bin, static_cast<std::uint32_t>(dim_));
  put_le<std::uint32_t>(bin, static_cast<std::uint32_t>(snippets_.size()));
  for (float x : vectors_) put_le<float>(bin, x);
  if (!bin) throw ConfigError("failed writing vectors.bin");
}

SnippetIndex SnippetIndex::load(const std::filesystem::path& dir) {
  std::ifstream meta(dir / "snippets.jsonl");
  if (!meta) throw ConfigError("no index at " + dir.string());
  std::vector<Snippet> snippets;
  std::string line;
  while (std::getline(meta, line)) {
    if (text::trim(line).empty()) continue;
    try {
      snippets.push_back(snippet_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ConfigError("corrupt snippets.jsonl: " + std::string(e.what()));
    }
  }
  std::ifstream bin(dir / "vectors.bin", std::ios::binary);
  if (!bin) throw ConfigError("missing vectors.bin in " + dir.string());
  auto dim = get_le<std::uint32_t>(bin);
  auto count = get_le<std::uint32_t>(bin);
  if (count != snippets.size())
    throw ConfigError(fmt::format("vectors.bin holds {} rows for {} snippets", count,
                                  snippets.size()));
  std::vector<float> vectors(static_cast<std::size_t>(dim) * count);
  for (float& x : vectors) x = get_le<float>(bin);
  const Granularity g = granularity_of(snippets);
  return SnippetIndex(g, std::move(snippets), std::move(vectors), dim);
}

SnippetIndex build_index(const std::vector<Snippet>& units, Gateway& gateway,
                         std::size_t batch_size) {
  const Granularity g = granularity_of(units);
  if (batch_size == 0) throw ConfigError("embedding batch size must be positive");
  std::vector<float> flat;
  std::size_t dim = 0;
  for (std::size_t start = 0; start < units.size(); start += batch_size) {
    std::size_t end = std::min(units.size(), start + batch_size);
    std::vector<std::string> texts;
    texts.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) texts.push_back(units[i].text);
    for (const auto& v : gateway.embed(texts)) {
      if (dim == 0) {
        dim = v.dim();
        flat.reserve(dim * units.size());
      }
      if (v.dim() != dim) throw GatewayError("embedding dimension changed mid-build");
      flat.insert(flat.end(), v.values.begin(), v.values.end());
    }
  }
  return SnippetIndex(g, units, std::move(flat), dim);
}

}  // namespace snipcrs
