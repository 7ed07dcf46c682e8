#include "snipcrs/config.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>

#include "snipcrs/errors.hpp"

namespace snipcrs {

using nlohmann::json;

namespace {

bool parse_switch(const json& v, const char* key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    auto s = v.get<std::string>();
    if (s == "on") return true;
    if (s == "off") return false;
  }
  throw ConfigError(fmt::format("'{}' must be true/false or \"on\"/\"off\"", key));
}

}  // namespace

RecommenderConfig RecommenderConfig::from_json(const json& j) {
  return RecommenderConfig{}.with_overrides(j);
}

RecommenderConfig RecommenderConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not JSON: " + e.what());
  }
}

RecommenderConfig RecommenderConfig::with_overrides(const json& o) const {
  if (!o.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "domain", "granularity", "k", "kappa", "t_entailment", "expansion",
      "query_decomposition", "max_turns", "fallback_question", "parallelism",
      "embed_batch"};
  for (const auto& [key, _] : o.items())
    if (!known.count(key)) throw ConfigError("unknown config key '" + key + "'");

  RecommenderConfig c = *this;
  try {
    if (o.contains("domain")) c.domain = parse_domain(o["domain"].get<std::string>());
    if (o.contains("granularity"))
      c.granularity = parse_granularity(o["granularity"].get<std::string>());
    if (o.contains("k")) c.k = o["k"].get<std::size_t>();
    if (o.contains("kappa")) c.kappa = o["kappa"].get<double>();
    if (o.contains("t_entailment")) c.t_entailment = o["t_entailment"].get<double>();
    if (o.contains("expansion")) c.expansion = parse_switch(o["expansion"], "expansion");
    if (o.contains("query_decomposition"))
      c.query_decomposition = parse_switch(o["query_decomposition"], "query_decomposition");
    if (o.contains("max_turns")) c.max_turns = o["max_turns"].get<int>();
    if (o.contains("fallback_question"))
      c.fallback_question = o["fallback_question"].get<std::string>();
    if (o.contains("parallelism")) c.parallelism = o["parallelism"].get<std::size_t>();
    if (o.contains("embed_batch")) c.embed_batch = o["embed_batch"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

void RecommenderConfig::validate() const {
  if (k == 0) throw ConfigError("k must be positive");
  if (!(kappa >= 0.0)) throw ConfigError("kappa must be non-negative");
  if (!(t_entailment >= 0.0 && t_entailment <= 1.0))
    throw ConfigError("t_entailment must lie in [0, 1]");
  if (max_turns < 1) throw ConfigError("max_turns must be at least 1");
  if (fallback_question.empty()) throw ConfigError("fallback_question is empty");
  if (parallelism == 0) throw ConfigError("parallelism must be at least 1");
  if (embed_batch == 0) throw ConfigError("embed_batch must be at least 1");
}

json RecommenderConfig::to_json() const {
  return {{"domain", to_string(domain)},
          {"granularity", to_string(granularity)},
          {"k", k},
          {"kappa", kappa},
          {"t_entailment", t_entailment},
          {"expansion", expansion},
          {"query_decomposition", query_decomposition},
          {"max_turns", max_turns},
          {"fallback_question", fallback_question},
          {"parallelism", parallelism},
          {"embed_batch", embed_batch}};
}

std::string RecommenderConfig::fingerprint(const std::string& gateway_fingerprint) const {
  return fmt::format("{}|{}|k={}|kappa={}|t={}|expansion={}|decompose={}|{}",
                     to_string(domain), to_string(granularity), k, kappa, t_entailment,
                     expansion ? "on" : "off", query_decomposition ? "on" : "off",
                     gateway_fingerprint);
}

}  // namespace snipcrs
