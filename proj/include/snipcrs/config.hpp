#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "snipcrs/domain.hpp"
#include "snipcrs/snippet.hpp"

namespace snipcrs {

struct RecommenderConfig {
  Domain domain = Domain::restaurant;
  Granularity granularity = Granularity::snippet;
  std::size_t k = 500;
  double kappa = 60.0;
  double t_entailment = 0.2;
  bool expansion = true;
  // Off for the raw-review baselines: the whole response is one prefer query.
  bool query_decomposition = true;
  int max_turns = 5;
  std::string fallback_question =
      "Could you tell me a bit more about what you are looking for?";
  std::size_t parallelism = 1;
  std::size_t embed_batch = 64;

  // Unknown keys are rejected so that typos do not silently fall back to
  // defaults. Values are validated.
  static RecommenderConfig from_json(const nlohmann::json& j);
  static RecommenderConfig load(const std::filesystem::path& path);
  // Applies `overrides` (same keys as from_json) on top of this config.
  RecommenderConfig with_overrides(const nlohmann::json& overrides) const;
  nlohmann::json to_json() const;
  void validate() const;

  // Pins everything that changes rankings, plus what answers model calls.
  std::string fingerprint(const std::string& gateway_fingerprint) const;
};

}  // namespace snipcrs
