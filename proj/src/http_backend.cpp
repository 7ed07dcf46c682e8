#include "httplib.h"

#include <cstdlib>

#include <fmt/format.h>

#include "snipcrs/errors.hpp"
#include "snipcrs/gateway.hpp"

namespace snipcrs {

using nlohmann::json;

namespace {

// Splits "https://host:port/v1/chat" into ("https://host:port", "/v1/chat").
std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("backend url needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport : public Transport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

  HttpResponse post(const std::string& url, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& headers) override {
    auto [base, path] = split_url(url);
    httplib::Client client(base);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(path, h, body, "application/json");
    if (!res) return {-1, httplib::to_string(res.error())};
    return {res->status, res->body};
  }

 private:
  std::chrono::seconds timeout_;
};

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

}  // namespace

std::shared_ptr<Transport> make_http_transport(std::chrono::seconds timeout) {
  return std::make_shared<HttplibTransport>(timeout);
}

BackendConfig BackendConfig::from_json(const json& j) {
  BackendConfig c;
  c.chat_url = j.value("chat_url", c.chat_url);
  c.chat_model = j.value("chat_model", c.chat_model);
  c.embed_url = j.value("embed_url", c.embed_url);
  c.embed_model = j.value("embed_model", c.embed_model);
  c.nli_url = j.value("nli_url", c.nli_url);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  return c;
}

void BackendConfig::apply_environment() {
  chat_url = env_or("SNIPCRS_CHAT_URL", chat_url);
  chat_model = env_or("SNIPCRS_CHAT_MODEL", chat_model);
  embed_url = env_or("SNIPCRS_EMBED_URL", embed_url);
  embed_model = env_or("SNIPCRS_EMBED_MODEL", embed_model);
  nli_url = env_or("SNIPCRS_NLI_URL", nli_url);
}

HttpBackend::HttpBackend(BackendConfig config, std::shared_ptr<Transport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {}

std::string HttpBackend::name() const {
  return fmt::format("http({}|{}|{})", config_.chat_model, config_.embed_model,
                     config_.nli_url);
}

json HttpBackend::post_json(const std::string& url, const json& body) {
  if (url.empty()) throw ConfigError("backend endpoint not configured");
  std::vector<std::pair<std::string, std::string>> headers;
  std::string key = env_or(config_.api_key_env.c_str(), "");
  if (!key.empty()) headers.emplace_back("Authorization", "Bearer " + key);
  HttpResponse res = transport_->post(url, body.dump(), headers);
  if (res.status <= 0)
    throw BackendError("connection to " + url + " failed: " + res.body, true);
  if (res.status == 429 || res.status >= 500)
    throw BackendError(fmt::format("{} answered {}", url, res.status), true);
  if (res.status >= 400)
    throw BackendError(fmt::format("{} answered {}: {}", url, res.status, res.body),
                       false);
  try {
    return json::parse(res.body);
  } catch (const json::exception& e) {
    throw BackendError("invalid JSON from " + url + ": " + e.what(), false);
  }
}

std::string HttpBackend::chat(const ChatRequest& req) {
  json messages = json::array();
  if (!req.system_prompt.empty())
    messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", req.user_prompt}});
  json body = {{"model", config_.chat_model},
               {"messages", messages},
               {"temperature", req.temperature}};
  json res = post_json(config_.chat_url, body);
  try {
    return res.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(std::string("unexpected chat response shape: ") + e.what(), false);
  }
}

std::vector<EmbeddingVector> HttpBackend::embed(const std::vector<std::string>& texts) {
  json body = {{"model", config_.embed_model}, {"input", texts}};
  json res = post_json(config_.embed_url, body);
  std::vector<EmbeddingVector> out(texts.size());
  try {
    for (const auto& row : res.at("data")) {
      std::size_t idx = row.value("index", std::size_t{0});
      if (idx >= out.size()) throw BackendError("embedding index out of range", false);
      out[idx].values = row.at("embedding").get<std::vector<float>>();
    }
  } catch (const json::exception& e) {
    throw BackendError(std::string("unexpected embedding response shape: ") + e.what(),
                       false);
  }
  return out;
}

NliScores HttpBackend::nli(const std::string& premise, const std::string& hypothesis) {
  json res = post_json(config_.nli_url, {{"premise", premise}, {"hypothesis", hypothesis}});
  try {
    return normalize({res.at("entailment").get<double>(), res.at("neutral").get<double>(),
                      res.at("contradiction").get<double>()});
  } catch (const json::exception& e) {
    throw BackendError(std::string("unexpected nli response shape: ") + e.what(), false);
  }
}

}  // namespace snipcrs
