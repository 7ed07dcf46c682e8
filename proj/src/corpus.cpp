#include "snipcrs/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <unordered_set>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/max_cardinality_matching.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "snipcrs/errors.hpp"
#include "snipcrs/text.hpp"

namespace snipcrs {

using nlohmann::json;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Corpus

Corpus Corpus::assemble(std::vector<Item> items, std::vector<Review> reviews,
                        std::vector<UserRecord> user_records) {
  Corpus c;
  c.items_ = std::move(items);
  c.reviews_ = std::move(reviews);

  for (std::size_t i = 0; i < c.items_.size(); ++i) {
    auto& item = c.items_[i];
    if (item.item_id.empty()) throw CorpusError("item with empty item_id");
    if (!c.item_pos_.emplace(item.item_id, i).second)
      throw CorpusError("duplicate item_id " + item.item_id);
    item.review_ids.clear();
  }

  std::unordered_map<std::string, int> derived_counts;
  std::vector<std::string> user_order;
  for (std::size_t r = 0; r < c.reviews_.size(); ++r) {
    const auto& review = c.reviews_[r];
    if (review.review_id.empty()) throw CorpusError("review with empty id");
    if (!c.review_pos_.emplace(review.review_id, r).second)
      throw CorpusError("duplicate review_id " + review.review_id);
    auto it = c.item_pos_.find(review.item_id);
    if (it == c.item_pos_.end())
      throw CorpusError(fmt::format("review {} references unknown item {}",
                                    review.review_id, review.item_id));
    if (review.rating < 1 || review.rating > 5)
      throw CorpusError("review " + review.review_id + " has rating out of 1..5");
    if (text::trim(review.text).empty())
      throw CorpusError("review " + review.review_id + " has blank text");
    c.items_[it->second].review_ids.push_back(review.review_id);
    if (derived_counts[review.user_id]++ == 0) user_order.push_back(review.user_id);
  }

  std::unordered_map<std::string, int> explicit_counts;
  for (auto& rec : user_records) {
    if (!explicit_counts.emplace(rec.user_id, rec.review_count).second)
      throw CorpusError("duplicate user record " + rec.user_id);
  }
  // Only records for users present in the corpus are kept.
  for (auto& rec : user_records) {
    if (derived_counts.count(rec.user_id)) c.user_records_.push_back(rec);
  }
  for (const auto& uid : user_order) {
    auto e = explicit_counts.find(uid);
    int count = e != explicit_counts.end() ? e->second : derived_counts[uid];
    c.user_pos_.emplace(uid, c.users_.size());
    c.users_.push_back({uid, count});
  }
  return c;
}

const Item* Corpus::find_item(std::string_view item_id) const {
  auto it = item_pos_.find(std::string(item_id));
  return it == item_pos_.end() ? nullptr : &items_[it->second];
}

const Review* Corpus::find_review(std::string_view review_id) const {
  auto it = review_pos_.find(std::string(review_id));
  return it == review_pos_.end() ? nullptr : &reviews_[it->second];
}

const Item& Corpus::item(std::string_view item_id) const {
  const Item* item = find_item(item_id);
  if (!item) throw NotFoundError("unknown item " + std::string(item_id));
  return *item;
}

std::vector<const Review*> Corpus::reviews_of(const Item& item) const {
  std::vector<const Review*> out;
  out.reserve(item.review_ids.size());
  for (const auto& id : item.review_ids) out.push_back(find_review(id));
  return out;
}

int Corpus::user_review_count(std::string_view user_id) const {
  auto it = user_pos_.find(std::string(user_id));
  return it == user_pos_.end() ? 0 : users_[it->second].review_count;
}

// ---------------------------------------------------------------------------
// Loading

CorpusFormat parse_corpus_format(std::string_view tag) {
  if (tag == "yelp" || tag == "yelp_jsonl") return CorpusFormat::yelp_jsonl;
  if (tag == "amazon" || tag == "amazon_jsonl") return CorpusFormat::amazon_jsonl;
  if (tag == "native" || tag == "native_jsonl") return CorpusFormat::native_jsonl;
  throw ConfigError("unknown corpus format '" + std::string(tag) + "'");
}

namespace {

struct RawRecords {
  std::vector<Item> items;
  std::vector<Review> reviews;
  std::vector<UserRecord> users;
  std::size_t filtered = 0;
};

enum class LineOutcome { ok, malformed, filtered };

std::string json_scalar_string(const ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "None";
  if (v.is_boolean()) return v.get<bool>() ? "True" : "False";
  return v.dump();
}

int rating_from(const ordered_json& v) {
  double r = v.get<double>();
  int rounded = static_cast<int>(r + 0.5);
  if (rounded < 1 || rounded > 5 || std::abs(r - rounded) > 1e-9)
    throw std::invalid_argument("rating out of range");
  return rounded;
}

LineOutcome parse_native(const ordered_json& j, RawRecords& out) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "item") {
    Item item;
    item.item_id = j.at("item_id").get<std::string>();
    item.name = j.value("name", "");
    if (j.contains("attributes")) {
      for (const auto& pair : j.at("attributes")) {
        if (!pair.is_array() || pair.size() != 2) return LineOutcome::malformed;
        item.attributes.emplace_back(pair[0].get<std::string>(),
                                     pair[1].get<std::string>());
      }
    }
    if (j.contains("categories"))
      item.categories = j.at("categories").get<std::vector<std::string>>();
    if (item.item_id.empty()) return LineOutcome::malformed;
    out.items.push_back(std::move(item));
    return LineOutcome::ok;
  }
  if (kind == "review") {
    Review r;
    r.review_id = j.at("review_id").get<std::string>();
    r.item_id = j.at("item_id").get<std::string>();
    r.user_id = j.at("user_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.rating = rating_from(j.at("rating"));
    r.helpful_votes = j.value("helpful_votes", 0);
    if (r.helpful_votes < 0 || text::trim(r.text).empty() || r.review_id.empty())
      return LineOutcome::malformed;
    out.reviews.push_back(std::move(r));
    return LineOutcome::ok;
  }
  if (kind == "user") {
    UserRecord u{j.at("user_id").get<std::string>(), j.at("review_count").get<int>()};
    if (u.review_count < 0) return LineOutcome::malformed;
    out.users.push_back(std::move(u));
    return LineOutcome::ok;
  }
  return LineOutcome::malformed;
}

// Yelp stores some attribute values as Python literals: "u'none'",
// "{'touristy': False, 'casual': True}".
std::string strip_python_quotes(std::string v) {
  v = text::trim(v);
  if (v.size() >= 3 && v[0] == 'u' && (v[1] == '\'' || v[1] == '"'))
    v = v.substr(1);
  if (v.size() >= 2 && (v.front() == '\'' || v.front() == '"') &&
      v.back() == v.front())
    v = v.substr(1, v.size() - 2);
  return v;
}

std::vector<Attribute> parse_python_dict(const std::string& raw) {
  std::vector<Attribute> out;
  std::string body = text::trim(raw);
  if (body.size() < 2 || body.front() != '{' || body.back() != '}') return out;
  body = body.substr(1, body.size() - 2);
  for (const auto& part : text::split(body, ',')) {
    auto colon = part.find(':');
    if (colon == std::string::npos) continue;
    out.emplace_back(strip_python_quotes(part.substr(0, colon)),
                     strip_python_quotes(part.substr(colon + 1)));
  }
  return out;
}

std::string yelp_price_range(const std::string& level) {
  if (level == "1") return "under $10";
  if (level == "2") return "$11-$30";
  if (level == "3") return "$31-$60";
  if (level == "4") return "above $61";
  return level;
}

std::string yelp_top_level_value(std::string v) {
  v = strip_python_quotes(v);
  if (v == "True") return "Yes";
  if (v == "False") return "No";
  return v;
}

LineOutcome parse_yelp(const ordered_json& j, RawRecords& out) {
  if (j.contains("review_id")) {
    Review r;
    r.review_id = j.at("review_id").get<std::string>();
    r.item_id = j.at("business_id").get<std::string>();
    r.user_id = j.at("user_id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    r.rating = rating_from(j.at("stars"));
    r.helpful_votes = j.value("useful", 0);
    if (text::trim(r.text).empty() || r.helpful_votes < 0)
      return LineOutcome::malformed;
    out.reviews.push_back(std::move(r));
    return LineOutcome::ok;
  }
  if (j.contains("business_id")) {
    Item item;
    item.item_id = j.at("business_id").get<std::string>();
    item.name = j.at("name").get<std::string>();
    if (j.contains("categories") && j["categories"].is_string()) {
      for (const auto& c : text::split(j["categories"].get<std::string>(), ',')) {
        auto t = text::trim(c);
        if (!t.empty()) item.categories.push_back(t);
      }
    }
    if (j.contains("attributes") && j["attributes"].is_object()) {
      for (const auto& [key, value] : j["attributes"].items()) {
        std::string v = json_scalar_string(value);
        if (key == "RestaurantsPriceRange2") {
          item.attributes.emplace_back("Price Range", yelp_price_range(v));
        } else if (text::trim(v).starts_with("{")) {
          for (auto& [sub, subv] : parse_python_dict(v))
            item.attributes.emplace_back(key + "/" + sub, subv);
        } else {
          item.attributes.emplace_back(key, yelp_top_level_value(v));
        }
      }
    }
    out.items.push_back(std::move(item));
    return LineOutcome::ok;
  }
  if (j.contains("user_id") && j.contains("review_count")) {
    out.users.push_back({j.at("user_id").get<std::string>(),
                         j.at("review_count").get<int>()});
    return LineOutcome::ok;
  }
  return LineOutcome::malformed;
}

std::string join_json_strings(const ordered_json& v, std::string_view sep) {
  if (v.is_string()) return v.get<std::string>();
  std::string out;
  if (!v.is_array()) return out;
  for (const auto& e : v) {
    if (!e.is_string()) continue;
    auto s = text::trim(e.get<std::string>());
    if (s.empty()) continue;
    if (!out.empty()) out += sep;
    out += s;
  }
  return out;
}

LineOutcome parse_amazon(const ordered_json& j, RawRecords& out) {
  if (j.contains("user_id") && j.contains("rating")) {
    Review r;
    r.item_id = j.contains("parent_asin") ? j["parent_asin"].get<std::string>()
                                          : j.at("asin").get<std::string>();
    r.user_id = j.at("user_id").get<std::string>();
    r.review_id = j.contains("review_id")
                      ? j["review_id"].get<std::string>()
                      : fmt::format("{}:{}:{}", r.user_id, r.item_id,
                                    j.value("timestamp", std::int64_t{0}));
    r.text = text::replace_all(j.at("text").get<std::string>(), "<br />", "\n");
    r.rating = rating_from(j.at("rating"));
    r.helpful_votes = j.value("helpful_vote", 0);
    if (text::trim(r.text).empty() || r.helpful_votes < 0)
      return LineOutcome::malformed;
    // Unverified purchases are excluded from the corpus outright.
    if (!j.value("verified_purchase", true)) return LineOutcome::filtered;
    out.reviews.push_back(std::move(r));
    return LineOutcome::ok;
  }
  if (j.contains("parent_asin")) {
    Item item;
    item.item_id = j.at("parent_asin").get<std::string>();
    item.name = j.value("title", "");
    if (j.contains("categories")) {
      auto path = join_json_strings(j["categories"], " > ");
      if (!path.empty()) item.categories.push_back(path);
    }
    if (item.categories.empty() && j.contains("main_category") &&
        j["main_category"].is_string())
      item.categories.push_back(j["main_category"].get<std::string>());
    if (j.contains("author")) {
      const auto& a = j["author"];
      std::string name = a.is_object() ? a.value("name", "") : json_scalar_string(a);
      if (!name.empty()) item.attributes.emplace_back("Author", name);
    }
    if (j.contains("features")) {
      auto f = join_json_strings(j["features"], " ");
      if (!f.empty()) item.attributes.emplace_back("Features", f);
    }
    if (j.contains("description")) {
      auto d = join_json_strings(j["description"], " ");
      if (!d.empty()) item.attributes.emplace_back("Description", d);
    }
    if (j.contains("price"))
      item.attributes.emplace_back("Price", "$" + json_scalar_string(j["price"]));
    out.items.push_back(std::move(item));
    return LineOutcome::ok;
  }
  return LineOutcome::malformed;
}

std::vector<std::filesystem::path> input_files(const std::filesystem::path& path) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(path)) {
      auto ext = entry.path().extension();
      if (entry.is_regular_file() && (ext == ".json" || ext == ".jsonl"))
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
  }
  return {path};
}

}  // namespace

LoadResult load_corpus(const std::filesystem::path& path, CorpusFormat format) {
  RawRecords raw;
  std::size_t lines = 0;
  std::size_t malformed = 0;

  for (const auto& file : input_files(path)) {
    std::ifstream in(file);
    if (!in) throw CorpusError("cannot read " + file.string());
    std::string line;
    while (std::getline(in, line)) {
      if (text::trim(line).empty()) continue;
      ++lines;
      LineOutcome outcome = LineOutcome::malformed;
      try {
        auto j = ordered_json::parse(line);
        if (j.is_object()) {
          switch (format) {
            case CorpusFormat::native_jsonl: outcome = parse_native(j, raw); break;
            case CorpusFormat::yelp_jsonl: outcome = parse_yelp(j, raw); break;
            case CorpusFormat::amazon_jsonl: outcome = parse_amazon(j, raw); break;
          }
        }
      } catch (const std::exception&) {
        outcome = LineOutcome::malformed;
      }
      if (outcome == LineOutcome::malformed) ++malformed;
      if (outcome == LineOutcome::filtered) ++raw.filtered;
    }
  }
  if (lines > 0 && malformed * 2 > lines)
    throw CorpusError(fmt::format(
        "{} of {} lines in {} are malformed; wrong format?", malformed, lines,
        path.string()));

  // Integrity pass: first occurrence wins, dangling references are dropped.
  std::size_t skipped = malformed;
  std::vector<Item> items;
  std::unordered_set<std::string> item_ids;
  for (auto& item : raw.items) {
    if (item_ids.insert(item.item_id).second) items.push_back(std::move(item));
    else ++skipped;
  }
  std::vector<Review> reviews;
  std::unordered_set<std::string> review_ids;
  for (auto& r : raw.reviews) {
    if (item_ids.count(r.item_id) && review_ids.insert(r.review_id).second)
      reviews.push_back(std::move(r));
    else
      ++skipped;
  }
  std::vector<UserRecord> users;
  std::unordered_set<std::string> user_ids;
  for (auto& u : raw.users) {
    if (user_ids.insert(u.user_id).second) users.push_back(std::move(u));
    else ++skipped;
  }
  if (skipped > 0)
    spdlog::warn("corpus {}: skipped {} of {} records", path.string(), skipped,
                 lines);

  LoadResult result;
  result.corpus = Corpus::assemble(std::move(items), std::move(reviews),
                                   std::move(users));
  result.lines = lines;
  result.skipped = skipped;
  result.filtered = raw.filtered;
  return result;
}

void save_native_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw CorpusError("cannot write " + path.string());
  for (const auto& item : corpus.items()) {
    ordered_json j;
    j["kind"] = "item";
    j["item_id"] = item.item_id;
    j["name"] = item.name;
    j["attributes"] = ordered_json::array();
    for (const auto& [k, v] : item.attributes) j["attributes"].push_back({k, v});
    j["categories"] = item.categories;
    j["review_ids"] = item.review_ids;
    out << j.dump() << '\n';
  }
  for (const auto& r : corpus.reviews()) {
    ordered_json j;
    j["kind"] = "review";
    j["review_id"] = r.review_id;
    j["item_id"] = r.item_id;
    j["user_id"] = r.user_id;
    j["text"] = r.text;
    j["rating"] = r.rating;
    j["helpful_votes"] = r.helpful_votes;
    out << j.dump() << '\n';
  }
  for (const auto& u : corpus.user_records()) {
    ordered_json j;
    j["kind"] = "user";
    j["user_id"] = u.user_id;
    j["review_count"] = u.review_count;
    out << j.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Filtering

Corpus filter_items_if(const Corpus& corpus,
                       const std::function<bool(const Item&)>& keep) {
  std::vector<Item> items;
  std::unordered_set<std::string> kept;
  for (const auto& item : corpus.items()) {
    if (keep(item)) {
      items.push_back(item);
      kept.insert(item.item_id);
    }
  }
  std::vector<Review> reviews;
  for (const auto& r : corpus.reviews())
    if (kept.count(r.item_id)) reviews.push_back(r);
  return Corpus::assemble(std::move(items), std::move(reviews),
                          corpus.user_records());
}

Corpus filter_items(const Corpus& corpus, int min_reviews) {
  return filter_items_if(corpus, [min_reviews](const Item& item) {
    return static_cast<long>(item.review_ids.size()) >= min_reviews;
  });
}

Corpus exclude_reviews(const Corpus& corpus,
                       const std::vector<std::string>& review_ids) {
  std::unordered_set<std::string> drop(review_ids.begin(), review_ids.end());
  std::vector<Review> reviews;
  for (const auto& r : corpus.reviews())
    if (!drop.count(r.review_id)) reviews.push_back(r);
  return Corpus::assemble(corpus.items(), std::move(reviews),
                          corpus.user_records());
}

// ---------------------------------------------------------------------------
// Attribute snippets

std::vector<Snippet> attribute_to_snippets(const Item& item) {
  std::vector<Snippet> out;
  out.reserve(item.categories.size() + item.attributes.size());
  std::size_t n = 0;
  for (const auto& category : item.categories) {
    out.push_back({fmt::format("{}#a{:03}", item.item_id, n++), item.item_id,
                   text::collapse_whitespace(fmt::format(
                       "This place is categorized as {}.", text::to_lower(category))),
                   SnippetOrigin::attribute, std::nullopt});
  }
  for (const auto& [key, value] : item.attributes) {
    out.push_back({fmt::format("{}#a{:03}", item.item_id, n++), item.item_id,
                   text::collapse_whitespace(fmt::format("it has {} as {}.", key, value)),
                   SnippetOrigin::attribute, std::nullopt});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seed pairs

std::vector<SeedPair> eligible_seed_edges(const Corpus& corpus,
                                          const SeedEligibility& rule) {
  std::set<SeedPair> edges;
  for (const auto& r : corpus.reviews()) {
    int count = corpus.user_review_count(r.user_id);
    if (r.rating >= rule.min_rating && r.helpful_votes >= rule.min_helpful_votes &&
        count >= rule.min_user_reviews && count <= rule.max_user_reviews)
      edges.insert({r.user_id, r.item_id});
  }
  return {edges.begin(), edges.end()};
}

std::vector<SeedPair> maximum_matching(const std::vector<SeedPair>& edges) {
  using Graph =
      boost::adjacency_list<boost::vecS, boost::vecS, boost::undirectedS>;
  std::vector<std::string> users;
  std::vector<std::string> items;
  std::unordered_map<std::string, std::size_t> user_idx;
  std::unordered_map<std::string, std::size_t> item_idx;
  for (const auto& e : edges) {
    if (user_idx.emplace(e.user_id, users.size()).second) users.push_back(e.user_id);
    if (item_idx.emplace(e.item_id, items.size()).second) items.push_back(e.item_id);
  }
  const std::size_t nu = users.size();
  Graph g(nu + items.size());
  for (const auto& e : edges)
    boost::add_edge(user_idx[e.user_id], nu + item_idx[e.item_id], g);

  std::vector<boost::graph_traits<Graph>::vertex_descriptor> mate(
      boost::num_vertices(g));
  boost::edmonds_maximum_cardinality_matching(g, mate.data());

  std::vector<SeedPair> out;
  const auto null = boost::graph_traits<Graph>::null_vertex();
  for (std::size_t u = 0; u < nu; ++u) {
    if (mate[u] != null) out.push_back({users[u], items[mate[u] - nu]});
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<SeedPair> select_seed_pairs(const Corpus& corpus, std::size_t n,
                                        std::uint64_t rng_seed,
                                        const SeedEligibility& rule) {
  auto matching = maximum_matching(eligible_seed_edges(corpus, rule));
  std::vector<SeedPair> out;
  std::mt19937_64 rng(rng_seed);
  std::sample(matching.begin(), matching.end(), std::back_inserter(out),
              std::min(n, matching.size()), rng);
  return out;
}

const Review& seed_review_for(const Corpus& corpus, const SeedPair& pair,
                              const SeedEligibility& rule) {
  const Review* best = nullptr;
  for (const auto& r : corpus.reviews()) {
    if (r.user_id != pair.user_id || r.item_id != pair.item_id) continue;
    if (r.rating < rule.min_rating || r.helpful_votes < rule.min_helpful_votes)
      continue;
    if (!best || r.helpful_votes > best->helpful_votes ||
        (r.helpful_votes == best->helpful_votes && r.review_id < best->review_id))
      best = &r;
  }
  if (!best)
    throw NotFoundError(fmt::format("no eligible review for seed pair ({}, {})",
                                    pair.user_id, pair.item_id));
  return *best;
}

// ---------------------------------------------------------------------------
// Sentence splitting

namespace {

const std::unordered_set<std::string>& abbreviations() {
  static const std::unordered_set<std::string> abbrevs = {
      "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "ave", "blvd", "rd",
      "vs", "etc", "e.g", "i.e", "approx", "vol", "inc", "ltd", "co",
      "mt", "ft", "oz", "lb", "lbs", "min", "hr", "hrs", "jan", "feb", "mar",
      "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec", "u.s",
      "a.m", "p.m"};
  return abbrevs;
}

bool is_closer(char c) {
  return c == '"' || c == '\'' || c == ')' || c == ']';
}

bool ends_with_abbreviation(std::string_view text, std::size_t period_pos) {
  std::size_t start = period_pos;
  while (start > 0 &&
         !std::isspace(static_cast<unsigned char>(text[start - 1])) &&
         text[start - 1] != '(' && text[start - 1] != '"')
    --start;
  std::string word = text::to_lower(text.substr(start, period_pos - start));
  if (word.empty()) return false;
  if (word.size() == 1 && std::isalpha(static_cast<unsigned char>(word[0])))
    return true;  // initials such as "J."
  return abbreviations().count(word) > 0;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  auto emit = [&](std::size_t end) {
    auto s = text::trim(text.substr(start, end - start));
    if (!s.empty()) out.push_back(std::move(s));
    start = end;
  };

  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n' || c == '\r') {
      emit(i);
      ++i;
      continue;
    }
    if (c != '.' && c != '!' && c != '?') {
      ++i;
      continue;
    }
    std::size_t end = i + 1;
    bool single_period = c == '.';
    while (end < text.size() &&
           (text[end] == '.' || text[end] == '!' || text[end] == '?')) {
      single_period = false;
      ++end;
    }
    while (end < text.size() && is_closer(text[end])) ++end;
    bool boundary = end == text.size() ||
                    std::isspace(static_cast<unsigned char>(text[end]));
    if (boundary && single_period && ends_with_abbreviation(text, i))
      boundary = false;
    if (boundary) emit(end);
    i = end;
  }
  emit(text.size());
  return out;
}

}  // namespace snipcrs
