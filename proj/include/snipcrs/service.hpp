#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "json.hpp"
#include "snipcrs/config.hpp"
#include "snipcrs/corpus.hpp"
#include "snipcrs/domain.hpp"
#include "snipcrs/gateway.hpp"
#include "snipcrs/snippet_index.hpp"

namespace snipcrs {

// What the service needs to answer sessions of one domain.
struct DomainRuntime {
  RecommenderConfig config;
  std::shared_ptr<const SnippetIndex> index;   // null: not loaded (503)
  std::shared_ptr<const Corpus> corpus;        // optional, for item names
};

struct ServiceOptions {
  std::map<Domain, DomainRuntime> domains;
  std::shared_ptr<Gateway> gateway;
  std::string bearer_token;                           // empty: no auth
  std::optional<std::filesystem::path> session_file;  // load at start, save on stop
  std::string closing_message = "Thanks! Those are my recommendations.";
};

// HTTP facade over live sessions:
//   POST /sessions                     {domain, config_overrides?}
//   POST /sessions/{id}/message        {text}
//   GET  /sessions/{id}/ranking?n=N
//   GET  /sessions/{id}                history and turn
//   GET  /healthz
// Messages on one session are serialized; a second message while one is in
// flight gets 409.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds to an ephemeral port and serves on a background thread.
  int start(const std::string& host = "127.0.0.1");
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

  std::size_t session_count() const;
  void save_sessions(const std::filesystem::path& path) const;
  void load_sessions(const std::filesystem::path& path);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// 32 lowercase hex characters from the system CSPRNG.
std::string random_session_id();

}  // namespace snipcrs
