#include "snipcrs/service.hpp"

#include <chrono>
#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <openssl/rand.h>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "snipcrs/dialogue.hpp"
#include "snipcrs/errors.hpp"
#include "snipcrs/text.hpp"

namespace snipcrs {

using nlohmann::json;

std::string random_session_id() {
  unsigned char bytes[16];
  if (RAND_bytes(bytes, sizeof bytes) != 1) throw Error("system random source failed");
  std::string out;
  for (unsigned char b : bytes) out += fmt::format("{:02x}", b);
  return out;
}

namespace {

struct Session {
  Domain domain = Domain::restaurant;
  RecommenderConfig config;
  std::int64_t created_at = 0;  // unix seconds
  std::mutex turn_mu;           // held for a whole turn
  mutable std::mutex state_mu;  // guards `state`
  SessionState state;

  SessionState snapshot() const {
    std::lock_guard lock(state_mu);
    return state;
  }
};

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void fail(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, {{"error", message}});
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::thread worker;
  mutable std::shared_mutex sessions_mu;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions;

  explicit Impl(ServiceOptions o) : options(std::move(o)) {
    if (!options.gateway) throw ConfigError("service needs a gateway");
    routes();
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock lock(sessions_mu);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  std::string item_name(Domain domain, const std::string& item_id) const {
    auto it = options.domains.find(domain);
    if (it == options.domains.end() || !it->second.corpus) return "";
    const Item* item = it->second.corpus->find_item(item_id);
    return item ? item->name : "";
  }

  json top_items(const Session& s, const SessionState& state, std::size_t n) const {
    json out = json::array();
    for (const auto& e : rank_items(state).entries) {
      if (out.size() >= n) break;
      out.push_back({{"item_id", e.item_id},
                     {"name", item_name(s.domain, e.item_id)},
                     {"score", e.score},
                     {"rank", e.rank}});
    }
    return out;
  }

  void routes() {
    server.set_pre_routing_handler([this](const httplib::Request& req, httplib::Response& res) {
      if (options.bearer_token.empty() || req.path == "/healthz")
        return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("Authorization") != "Bearer " + options.bearer_token) {
        fail(res, 401, "missing or wrong bearer token");
        return httplib::Server::HandlerResponse::Handled;
      }
      return httplib::Server::HandlerResponse::Unhandled;
    });

    server.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
      json domains = json::object();
      for (const auto& [d, rt] : options.domains)
        domains[to_string(d)] = rt.index ? "ready" : "not loaded";
      reply(res, 200, {{"status", "ok"}, {"domains", domains}, {"sessions", count()}});
    });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      create(req, res);
    });
    server.Post(R"(/sessions/([0-9a-f]+)/message)",
                [this](const httplib::Request& req, httplib::Response& res) { message(req, res); });
    server.Get(R"(/sessions/([0-9a-f]+)/ranking)",
               [this](const httplib::Request& req, httplib::Response& res) { ranking(req, res); });
    server.Get(R"(/sessions/([0-9a-f]+))",
               [this](const httplib::Request& req, httplib::Response& res) { history(req, res); });
  }

  std::size_t count() const {
    std::shared_lock lock(sessions_mu);
    return sessions.size();
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body.empty() ? "{}" : req.body);
    } catch (const json::exception&) {
      return fail(res, 400, "body is not JSON");
    }
    if (!body.is_object() || !body.contains("domain") || !body["domain"].is_string())
      return fail(res, 400, "domain is required");
    Domain domain;
    try {
      domain = parse_domain(body["domain"].get<std::string>());
    } catch (const ConfigError& e) {
      return fail(res, 400, e.what());
    }
    auto rt = options.domains.find(domain);
    if (rt == options.domains.end() || !rt->second.index)
      return fail(res, 503, "no index loaded for " + to_string(domain));

    auto session = std::make_shared<Session>();
    session->domain = domain;
    try {
      session->config = rt->second.config;
      if (body.contains("config_overrides")) {
        const auto& o = body["config_overrides"];
        if (o.is_object() && (o.contains("domain") || o.contains("granularity")))
          return fail(res, 400, "domain and granularity are fixed by the loaded index");
        session->config = session->config.with_overrides(o);
      }
    } catch (const ConfigError& e) {
      return fail(res, 400, e.what());
    }
    session->created_at = std::chrono::duration_cast<std::chrono::seconds>(
                              std::chrono::system_clock::now().time_since_epoch())
                              .count();
    std::string id = random_session_id();
    std::uint64_t seed = std::stoull(id.substr(0, 16), nullptr, 16);
    session->state = start_session(id, session->config, seed);
    const std::string opener = session->state.history.back().text;
    {
      std::unique_lock lock(sessions_mu);
      sessions.emplace(id, std::move(session));
    }
    reply(res, 201, {{"session_id", id}, {"opening_question", opener}});
  }

  void message(const httplib::Request& req, httplib::Response& res) {
    auto session = find(req.matches[1]);
    if (!session) return fail(res, 404, "unknown session");
    std::string text;
    try {
      auto body = json::parse(req.body);
      text = body.at("text").get<std::string>();
    } catch (const json::exception&) {
      return fail(res, 400, "body must be {\"text\": string}");
    }
    if (text::trim(text).empty()) return fail(res, 400, "text is empty");

    std::unique_lock turn(session->turn_mu, std::try_to_lock);
    if (!turn.owns_lock()) return fail(res, 409, "a message for this session is in flight");
    SessionState state = session->snapshot();
    const auto& config = session->config;
    if (state.turn >= config.max_turns || !question_pending(state))
      return fail(res, 429, fmt::format("turn cap of {} reached", config.max_turns));
    const auto& rt = options.domains.at(session->domain);
    if (!rt.index) return fail(res, 503, "index not loaded");

    try {
      auto [next, result] = process_turn(state, text, *rt.index, config, *options.gateway);
      std::string next_question;
      bool done = next.turn >= config.max_turns;
      if (done) {
        next_question = options.closing_message;
      } else {
        next_question = generate_clarification(next.history, session->domain, *options.gateway,
                                               config.fallback_question);
        ask(next, next_question);
      }
      json snippets = to_json(result)["query_snippets"];
      json top = top_items(*session, next, 10);
      {
        std::lock_guard lock(session->state_mu);
        session->state = std::move(next);
      }
      reply(res, 200, {{"turn", result.turn},
                       {"next_question", next_question},
                       {"done", done},
                       {"top_items", top},
                       {"query_snippets", snippets}});
    } catch (const StateError& e) {
      fail(res, 400, e.what());
    } catch (const Error& e) {
      spdlog::error("turn failed for session {}: {}", state.session_id, e.what());
      fail(res, 502, e.what());
    }
  }

  void ranking(const httplib::Request& req, httplib::Response& res) {
    auto session = find(req.matches[1]);
    if (!session) return fail(res, 404, "unknown session");
    std::size_t n = 10;
    if (req.has_param("n")) {
      try {
        std::size_t used = 0;
        auto raw = req.get_param_value("n");
        long long v = std::stoll(raw, &used);
        if (used != raw.size() || v < 0) throw std::invalid_argument("n");
        n = static_cast<std::size_t>(v);
      } catch (const std::exception&) {
        return fail(res, 400, "n must be a non-negative integer");
      }
    }
    auto state = session->snapshot();
    reply(res, 200, {{"turn", state.turn}, {"entries", top_items(*session, state, n)}});
  }

  void history(const httplib::Request& req, httplib::Response& res) {
    auto session = find(req.matches[1]);
    if (!session) return fail(res, 404, "unknown session");
    auto state = session->snapshot();
    json h = json::array();
    for (const auto& u : state.history) h.push_back({{"role", to_string(u.role)}, {"text", u.text}});
    reply(res, 200, {{"session_id", state.session_id},
                     {"domain", to_string(session->domain)},
                     {"turn", state.turn},
                     {"max_turns", session->config.max_turns},
                     {"history", h}});
  }

  json dump() const {
    std::shared_lock lock(sessions_mu);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sessions) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    json out = json::array();
    for (const auto& id : ids) {
      const auto& s = sessions.at(id);
      out.push_back({{"domain", to_string(s->domain)},
                     {"config", s->config.to_json()},
                     {"created_at", s->created_at},
                     {"state", to_json(s->snapshot())}});
    }
    return {{"sessions", out}};
  }

  void restore(const json& j) {
    std::unique_lock lock(sessions_mu);
    for (const auto& entry : j.at("sessions")) {
      auto s = std::make_shared<Session>();
      s->domain = parse_domain(entry.at("domain").get<std::string>());
      s->config = RecommenderConfig::from_json(entry.at("config"));
      s->created_at = entry.at("created_at").get<std::int64_t>();
      s->state = session_from_json(entry.at("state"));
      sessions[s->state.session_id] = std::move(s);
    }
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  if (impl_->options.session_file && std::filesystem::exists(*impl_->options.session_file))
    load_sessions(*impl_->options.session_file);
}

Service::~Service() { stop(); }

int Service::start(const std::string& host) {
  int port = impl_->server.bind_to_any_port(host);
  if (port <= 0) throw Error("could not bind to " + host);
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void Service::listen(const std::string& host, int port) {
  spdlog::info("listening on {}:{}", host, port);
  if (!impl_->server.listen(host, port))
    throw Error(fmt::format("could not listen on {}:{}", host, port));
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
  if (impl_->options.session_file) {
    try {
      save_sessions(*impl_->options.session_file);
    } catch (const std::exception& e) {
      spdlog::error("could not persist sessions: {}", e.what());
    }
  }
}

std::size_t Service::session_count() const { return impl_->count(); }

void Service::save_sessions(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << impl_->dump().dump(2) << '\n';
}

void Service::load_sessions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    impl_->restore(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError("corrupt session file " + path.string() + ": " + e.what());
  }
}

}  // namespace snipcrs
