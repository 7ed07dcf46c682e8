#include "snipcrs/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include <spdlog/spdlog.h>

#include "snipcrs/errors.hpp"
#include "snipcrs/text.hpp"

namespace snipcrs {

using nlohmann::json;

NliScores normalize(NliScores s) {
  s.entail = std::max(0.0, s.entail);
  s.neutral = std::max(0.0, s.neutral);
  s.contradict = std::max(0.0, s.contradict);
  double total = s.entail + s.neutral + s.contradict;
  if (!(total > 0.0) || !std::isfinite(total)) return {0.0, 1.0, 0.0};
  return {s.entail / total, s.neutral / total, s.contradict / total};
}

namespace {

json canonicalize(const json& j) {
  if (j.is_string()) return text::rtrim(j.get<std::string>());
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = canonicalize(v);
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(canonicalize(v));
    return out;
  }
  return j;
}

json scores_to_json(const NliScores& s) {
  return {{"entail", s.entail}, {"neutral", s.neutral}, {"contradict", s.contradict}};
}

NliScores scores_from_json(const json& j) {
  return normalize({j.at("entail").get<double>(), j.at("neutral").get<double>(),
                    j.at("contradict").get<double>()});
}

json vector_to_json(const EmbeddingVector& v) { return v.values; }

EmbeddingVector vector_from_json(const json& j) {
  EmbeddingVector v;
  v.values = j.get<std::vector<float>>();
  for (float x : v.values)
    if (!std::isfinite(x)) throw GatewayError("non-finite embedding value");
  return v;
}

}  // namespace

std::string request_digest(std::string_view endpoint, const json& body) {
  // nlohmann::json objects iterate in key order, so dump() is canonical.
  return text::sha256_hex(std::string(endpoint) + "\n" + canonicalize(body).dump());
}

// ---------------------------------------------------------------------------
// Cassette

std::shared_ptr<Cassette> Cassette::in_memory() {
  return std::shared_ptr<Cassette>(new Cassette());
}

std::shared_ptr<Cassette> Cassette::open(const std::filesystem::path& path) {
  std::shared_ptr<Cassette> c(new Cassette());
  c->load(path);
  return c;
}

void Cassette::load(const std::filesystem::path& path) {
  path_ = path;
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    if (!in) throw GatewayError("cannot read cassette " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (text::trim(line).empty()) continue;
      try {
        auto j = json::parse(line);
        CassetteEntry e{j.at("digest").get<std::string>(),
                        j.at("endpoint").get<std::string>(), j.at("response")};
        if (entries_.emplace(e.digest, e).second) order_.push_back(e.digest);
      } catch (const json::exception& ex) {
        throw GatewayError("corrupt cassette " + path.string() + " line " +
                           std::to_string(lineno) + ": " + ex.what());
      }
    }
  }
}

std::optional<json> Cassette::find(const std::string& digest) const {
  if (frozen_.load()) {
    auto it = entries_.find(digest);
    if (it == entries_.end()) return std::nullopt;
    return it->second.response;
  }
  std::shared_lock lock(mutex_);
  auto it = entries_.find(digest);
  if (it == entries_.end()) return std::nullopt;
  return it->second.response;
}

void Cassette::append(const CassetteEntry& entry) {
  if (frozen_.load()) throw GatewayError("cassette is frozen");
  std::unique_lock lock(mutex_);
  if (!entries_.emplace(entry.digest, entry).second) return;
  order_.push_back(entry.digest);
  if (path_) {
    if (!sink_.is_open()) {
      sink_.open(*path_, std::ios::app);
      if (!sink_) throw GatewayError("cannot append to cassette " + path_->string());
    }
    json line = {{"digest", entry.digest},
                 {"endpoint", entry.endpoint},
                 {"response", entry.response}};
    sink_ << line.dump() << '\n';
    sink_.flush();
  }
}

void Cassette::freeze() {
  std::unique_lock lock(mutex_);
  frozen_.store(true);
}

std::size_t Cassette::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

std::vector<CassetteEntry> Cassette::entries() const {
  std::shared_lock lock(mutex_);
  std::vector<CassetteEntry> out;
  out.reserve(order_.size());
  for (const auto& d : order_) out.push_back(entries_.at(d));
  return out;
}

std::string Cassette::content_digest() const {
  auto all = entries();
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.digest < b.digest; });
  std::string blob;
  for (const auto& e : all) {
    blob += e.digest;
    blob += '\t';
    blob += e.response.dump();
    blob += '\n';
  }
  return text::sha256_hex(blob);
}

CassetteMode parse_cassette_mode(std::string_view tag) {
  if (tag == "record") return CassetteMode::record;
  if (tag == "replay") return CassetteMode::replay;
  if (tag == "passthrough") return CassetteMode::passthrough;
  throw ConfigError("unknown cassette mode '" + std::string(tag) + "'");
}

// ---------------------------------------------------------------------------
// Gateway

Gateway::Gateway(std::shared_ptr<Backend> backend,
                 std::shared_ptr<Cassette> cassette, CassetteMode mode,
                 RetryPolicy retry)
    : backend_(std::move(backend)),
      cassette_(std::move(cassette)),
      mode_(mode),
      retry_(retry) {
  if (mode_ != CassetteMode::passthrough && !cassette_)
    throw ConfigError("record and replay modes need a cassette");
  if (mode_ != CassetteMode::replay && !backend_)
    throw ConfigError("record and passthrough modes need a backend");
  if (mode_ == CassetteMode::replay) {
    cassette_->freeze();
    fingerprint_ = "cassette:" + cassette_->content_digest();
  } else {
    fingerprint_ = "backend:" + backend_->name();
  }
}

std::shared_ptr<Gateway> Gateway::replay(std::shared_ptr<Cassette> cassette) {
  return std::make_shared<Gateway>(nullptr, std::move(cassette),
                                   CassetteMode::replay);
}

std::shared_ptr<Gateway> Gateway::passthrough(std::shared_ptr<Backend> backend,
                                              RetryPolicy retry) {
  return std::make_shared<Gateway>(std::move(backend), nullptr,
                                   CassetteMode::passthrough, retry);
}

json Gateway::call_with_retry(const std::function<json()>& call) {
  for (int attempt = 1;; ++attempt) {
    try {
      backend_calls_.fetch_add(1);
      return call();
    } catch (const BackendError& e) {
      if (!e.transient() || attempt >= retry_.attempts) throw;
      auto delay = retry_.base_delay * (1 << (attempt - 1));
      spdlog::warn("transient backend failure (attempt {}/{}): {}", attempt,
                   retry_.attempts, e.what());
      std::this_thread::sleep_for(delay);
    }
  }
}

json Gateway::fetch(const std::string& endpoint, const json& body,
                    const std::function<json()>& call) {
  if (mode_ == CassetteMode::passthrough) return call_with_retry(call);
  const std::string digest = request_digest(endpoint, body);
  if (auto hit = cassette_->find(digest)) return *hit;
  if (mode_ == CassetteMode::replay) throw ReplayMissError(endpoint, digest);
  json response = call_with_retry(call);
  cassette_->append({digest, endpoint, response});
  return response;
}

std::string Gateway::chat(const ChatRequest& req) {
  if (text::trim(req.user_prompt).empty())
    throw GatewayError("chat request with an empty user prompt");
  json body = {{"system", req.system_prompt},
               {"user", req.user_prompt},
               {"temperature", req.temperature},
               {"tag", req.tag}};
  return fetch("chat", body, [&] { return json(backend_->chat(req)); })
      .get<std::string>();
}

std::vector<EmbeddingVector> Gateway::embed(const std::vector<std::string>& texts) {
  std::vector<EmbeddingVector> out(texts.size());
  std::vector<std::size_t> missing;
  std::vector<std::string> digests(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (text::trim(texts[i]).empty()) throw GatewayError("cannot embed empty text");
    if (mode_ == CassetteMode::passthrough) {
      missing.push_back(i);
      continue;
    }
    digests[i] = request_digest("embed", json{{"input", texts[i]}});
    if (auto hit = cassette_->find(digests[i])) out[i] = vector_from_json(*hit);
    else missing.push_back(i);
  }
  auto check_dims = [&out] {
    const std::size_t dim = out.empty() ? 0 : out.front().dim();
    for (const auto& v : out) {
      if (v.dim() != dim || dim == 0)
        throw GatewayError("embedding backend returned mixed dimensions");
    }
  };
  if (missing.empty()) {
    check_dims();
    return out;
  }
  if (mode_ == CassetteMode::replay)
    throw ReplayMissError("embed", digests[missing.front()]);

  std::vector<std::string> batch;
  batch.reserve(missing.size());
  for (auto i : missing) batch.push_back(texts[i]);
  json fetched = call_with_retry([&] {
    json arr = json::array();
    for (const auto& v : backend_->embed(batch)) arr.push_back(vector_to_json(v));
    return arr;
  });
  if (fetched.size() != batch.size())
    throw GatewayError("embedding backend returned a wrong number of vectors");
  for (std::size_t m = 0; m < missing.size(); ++m) {
    out[missing[m]] = vector_from_json(fetched[m]);
    if (mode_ == CassetteMode::record)
      cassette_->append({digests[missing[m]], "embed", fetched[m]});
  }
  check_dims();
  return out;
}

NliScores Gateway::nli(std::string_view premise, std::string_view hypothesis) {
  if (text::trim(premise).empty() || text::trim(hypothesis).empty())
    throw GatewayError("nli needs a nonempty premise and hypothesis");
  json body = {{"premise", premise}, {"hypothesis", hypothesis}};
  std::string p(premise);
  std::string h(hypothesis);
  return scores_from_json(
      fetch("nli", body, [&] { return scores_to_json(normalize(backend_->nli(p, h))); }));
}

}  // namespace snipcrs
