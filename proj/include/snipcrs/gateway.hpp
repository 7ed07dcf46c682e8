#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

namespace snipcrs {

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  std::string tag;  // part of the cassette key; also routes mock scripts
};

struct EmbeddingVector {
  std::vector<float> values;

  std::size_t dim() const { return values.size(); }
};

// Probability triple; always normalized to sum 1 within 1e-6.
struct NliScores {
  double entail = 0.0;
  double neutral = 1.0;
  double contradict = 0.0;
};

// Clamps negatives to zero and rescales to sum 1. An all-zero triple maps to
// pure neutral.
NliScores normalize(NliScores s);

// A model provider. Implementations must be callable from several threads.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual std::string chat(const ChatRequest& req) = 0;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
  virtual NliScores nli(const std::string& premise, const std::string& hypothesis) = 0;
};

// Stable hash of (endpoint, request body). Object keys are compared in
// sorted order and trailing whitespace of every string value is ignored.
std::string request_digest(std::string_view endpoint, const nlohmann::json& body);

struct CassetteEntry {
  std::string digest;
  std::string endpoint;
  nlohmann::json response;
};

// Request digest -> recorded response. Backed by an append-only JSON Lines
// file, or purely in memory. Once frozen, lookups take no lock.
class Cassette {
 public:
  static std::shared_ptr<Cassette> in_memory();
  // Loads existing entries (if the file exists) and appends new ones to it.
  static std::shared_ptr<Cassette> open(const std::filesystem::path& path);

  std::optional<nlohmann::json> find(const std::string& digest) const;
  // Appends unless the digest is already present. Throws once frozen.
  void append(const CassetteEntry& entry);
  void freeze();
  bool frozen() const { return frozen_.load(); }

  std::size_t size() const;
  // Hash over all entries in digest order.
  std::string content_digest() const;
  std::vector<CassetteEntry> entries() const;

 private:
  Cassette() = default;
  void load(const std::filesystem::path& path);

  mutable std::shared_mutex mutex_;
  std::atomic<bool> frozen_{false};
  std::unordered_map<std::string, CassetteEntry> entries_;
  std::vector<std::string> order_;
  std::optional<std::filesystem::path> path_;
  std::ofstream sink_;
};

enum class CassetteMode { record, replay, passthrough };

CassetteMode parse_cassette_mode(std::string_view tag);

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds base_delay{250};
};

// Uniform entry point for chat, embedding and NLI calls.
//
// replay: answers only from the cassette; never touches the backend.
// record: answers from the cassette when possible, otherwise calls the
//         backend and records the response.
// passthrough: always calls the backend, records nothing.
//
// Embeddings are keyed per text, so any batching of the same texts hits the
// same entries. Transient backend failures are retried with exponential
// backoff.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<Cassette> cassette,
          CassetteMode mode, RetryPolicy retry = {});

  static std::shared_ptr<Gateway> replay(std::shared_ptr<Cassette> cassette);
  static std::shared_ptr<Gateway> passthrough(std::shared_ptr<Backend> backend,
                                              RetryPolicy retry = {});

  std::string chat(const ChatRequest& req);
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts);
  NliScores nli(std::string_view premise, std::string_view hypothesis);

  CassetteMode mode() const { return mode_; }
  const std::shared_ptr<Cassette>& cassette() const { return cassette_; }
  // Identifies what answers requests: the cassette contents in replay mode,
  // the backend otherwise.
  const std::string& fingerprint() const { return fingerprint_; }

  std::uint64_t backend_calls() const { return backend_calls_.load(); }

 private:
  nlohmann::json fetch(const std::string& endpoint, const nlohmann::json& body,
                       const std::function<nlohmann::json()>& call);
  nlohmann::json call_with_retry(const std::function<nlohmann::json()>& call);

  std::shared_ptr<Backend> backend_;
  std::shared_ptr<Cassette> cassette_;
  CassetteMode mode_;
  RetryPolicy retry_;
  std::string fingerprint_;
  std::atomic<std::uint64_t> backend_calls_{0};
};

// ---------------------------------------------------------------------------
// Mock backend

// Deterministic, offline backend.
//  chat:  first rule whose regex matches the request tag answers.
//  embed: sum of seeded per-token unit vectors, so shared words mean
//         similar vectors.
//  nli:   content-word coverage of the hypothesis by the premise, with a
//         negation mismatch turning coverage into contradiction.
class MockBackend : public Backend {
 public:
  using Responder = std::function<std::string(const ChatRequest&)>;

  explicit MockBackend(std::uint64_t seed = 7, std::size_t dim = 64);

  MockBackend& on(const std::string& tag_regex, std::string fixed_response);
  MockBackend& on(const std::string& tag_regex, Responder responder);

  std::string name() const override { return "mock"; }
  std::string chat(const ChatRequest& req) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  NliScores nli(const std::string& premise, const std::string& hypothesis) override;

  std::size_t dim() const { return dim_; }
  std::uint64_t chat_calls() const { return chat_calls_.load(); }

 private:
  struct Rule {
    std::regex pattern;
    Responder respond;
  };
  std::uint64_t seed_;
  std::size_t dim_;
  std::vector<Rule> rules_;
  std::atomic<std::uint64_t> chat_calls_{0};
};

EmbeddingVector mock_embedding(std::string_view text, std::uint64_t seed,
                               std::size_t dim);
NliScores mock_nli(std::string_view premise, std::string_view hypothesis);

// ---------------------------------------------------------------------------
// HTTP backend

struct HttpResponse {
  int status = 0;  // <= 0: no response (connection failure)
  std::string body;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

std::shared_ptr<Transport> make_http_transport(std::chrono::seconds timeout =
                                                   std::chrono::seconds(60));

// Endpoints speak the chat-completions and embeddings JSON shapes. The NLI
// endpoint takes {"premise", "hypothesis"} and answers with
// {"entailment", "neutral", "contradiction"}.
struct BackendConfig {
  std::string chat_url;
  std::string chat_model;
  std::string embed_url;
  std::string embed_model;
  std::string nli_url;
  std::string api_key_env = "SNIPCRS_API_KEY";

  static BackendConfig from_json(const nlohmann::json& j);
  // SNIPCRS_CHAT_URL, SNIPCRS_CHAT_MODEL, SNIPCRS_EMBED_URL,
  // SNIPCRS_EMBED_MODEL and SNIPCRS_NLI_URL override the file values.
  void apply_environment();
};

class HttpBackend : public Backend {
 public:
  HttpBackend(BackendConfig config, std::shared_ptr<Transport> transport);

  std::string name() const override;
  std::string chat(const ChatRequest& req) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;
  NliScores nli(const std::string& premise, const std::string& hypothesis) override;

 private:
  nlohmann::json post_json(const std::string& url, const nlohmann::json& body);

  BackendConfig config_;
  std::shared_ptr<Transport> transport_;
};

}  // namespace snipcrs
