// Command-line front end: corpus preparation, index building, one-off
// queries, batch evaluation and the HTTP service.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "snipcrs/config.hpp"
#include "snipcrs/corpus.hpp"
#include "snipcrs/errors.hpp"
#include "snipcrs/evaluation.hpp"
#include "snipcrs/query.hpp"
#include "snipcrs/retrieval.hpp"
#include "snipcrs/service.hpp"
#include "snipcrs/snippets.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace snipcrs;

namespace {

struct GatewayFlags {
  std::string backend = "http";
  std::string backend_config;
  std::string cassette;
  std::string mode = "record";
  std::uint64_t mock_seed = 7;

  void add(CLI::App* cmd) {
    cmd->add_option("--backend", backend, "http or mock (mock answers embeddings and NLI only)")
        ->check(CLI::IsMember({"http", "mock"}));
    cmd->add_option("--backend-config", backend_config, "JSON file with endpoint URLs and models");
    cmd->add_option("--cassette", cassette, "JSON Lines cassette file");
    cmd->add_option("--mode", mode, "record, replay or passthrough")
        ->check(CLI::IsMember({"record", "replay", "passthrough"}));
    cmd->add_option("--mock-seed", mock_seed, "seed of the mock embedding space");
  }

  std::shared_ptr<Gateway> make() const {
    auto mode_tag = parse_cassette_mode(mode);
    if (mode_tag != CassetteMode::passthrough && cassette.empty())
      throw ConfigError("--cassette is required in " + mode + " mode");
    if (mode_tag == CassetteMode::replay) {
      auto c = Cassette::open(cassette);
      c->freeze();
      return Gateway::replay(c);
    }
    std::shared_ptr<Backend> b;
    if (backend == "mock") {
      b = std::make_shared<MockBackend>(mock_seed);
    } else {
      BackendConfig cfg;
      if (!backend_config.empty()) {
        std::ifstream in(backend_config);
        if (!in) throw ConfigError("cannot read " + backend_config);
        cfg = BackendConfig::from_json(json::parse(in));
      }
      cfg.apply_environment();
      b = std::make_shared<HttpBackend>(cfg, make_http_transport());
    }
    if (mode_tag == CassetteMode::passthrough) return Gateway::passthrough(b);
    return std::make_shared<Gateway>(b, Cassette::open(cassette), CassetteMode::record);
  }
};

Corpus load_native(const std::string& path) {
  auto res = load_corpus(path, CorpusFormat::native_jsonl);
  if (res.skipped) spdlog::warn("{}: skipped {} malformed lines", path, res.skipped);
  return res.corpus;
}

std::vector<SeedPair> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read pairs file " + path);
  std::vector<SeedPair> pairs;
  for (const auto& p : json::parse(in))
    pairs.push_back({p.at("user_id").get<std::string>(), p.at("item_id").get<std::string>()});
  return pairs;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

RecommenderConfig load_config(const std::string& path) {
  return path.empty() ? RecommenderConfig{} : RecommenderConfig::load(path);
}

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Snippet-based conversational recommender"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error");

  // corpus ------------------------------------------------------------------
  auto* corpus_cmd = app.add_subcommand("corpus", "prepare corpora")->require_subcommand(1);

  std::string ingest_input, ingest_format = "native", ingest_out;
  int min_reviews = 0;
  auto* ingest = corpus_cmd->add_subcommand("ingest", "load a dataset and write the native format");
  ingest->add_option("--input", ingest_input, "file or directory")->required();
  ingest->add_option("--format", ingest_format, "yelp, amazon or native");
  ingest->add_option("--min-reviews", min_reviews, "drop items with fewer reviews");
  ingest->add_option("--out", ingest_out, "native JSON Lines output")->required();

  std::string pairs_corpus, pairs_out;
  std::size_t pairs_n = 100;
  std::uint64_t pairs_seed = 0;
  auto* seed_pairs = corpus_cmd->add_subcommand("seed-pairs", "select simulator seed pairs");
  seed_pairs->add_option("--corpus", pairs_corpus, "native corpus")->required();
  seed_pairs->add_option("--n", pairs_n, "number of pairs");
  seed_pairs->add_option("--seed", pairs_seed, "sampling seed");
  seed_pairs->add_option("--out", pairs_out, "pairs JSON output")->required();

  // index -------------------------------------------------------------------
  auto* index_cmd = app.add_subcommand("index", "snippet indexes")->require_subcommand(1);
  std::string build_corpus, build_out, build_domain = "restaurant", build_granularity = "snippet",
                                       build_exclude;
  std::size_t build_parallelism = 4;
  GatewayFlags build_gw;
  auto* build = index_cmd->add_subcommand("build", "decompose reviews and embed the units");
  build->add_option("--corpus", build_corpus, "native corpus")->required();
  build->add_option("--out", build_out, "index directory")->required();
  build->add_option("--domain", build_domain);
  build->add_option("--granularity", build_granularity, "snippet, sentence or document");
  build->add_option("--exclude-pairs", build_exclude, "hide these seed reviews from the index");
  build->add_option("--parallelism", build_parallelism);
  build_gw.add(build);

  // query / retrieve ----------------------------------------------------------
  auto* query_cmd = app.add_subcommand("query", "query snippets")->require_subcommand(1);
  std::string parse_question, parse_text, parse_domain_tag = "restaurant";
  bool parse_expand = false;
  GatewayFlags parse_gw;
  auto* parse = query_cmd->add_subcommand("parse", "decompose one seeker response");
  parse->add_option("--question", parse_question)->required();
  parse->add_option("--text", parse_text)->required();
  parse->add_option("--domain", parse_domain_tag);
  parse->add_flag("--expand", parse_expand, "also paraphrase, support and oppose");
  parse_gw.add(parse);

  std::string retrieve_index, retrieve_text, retrieve_sentiment = "prefer";
  std::size_t retrieve_k = 500;
  double retrieve_t = 0.2;
  GatewayFlags retrieve_gw;
  auto* retrieve = app.add_subcommand("retrieve", "retrieve and gate snippets for one statement");
  retrieve->add_option("--index", retrieve_index)->required();
  retrieve->add_option("--text", retrieve_text)->required();
  retrieve->add_option("--sentiment", retrieve_sentiment, "prefer or dislike");
  retrieve->add_option("--k", retrieve_k);
  retrieve->add_option("--t-entailment", retrieve_t);
  retrieve_gw.add(retrieve);

  // eval --------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "simulated evaluation")->require_subcommand(1);
  std::string run_config, run_pairs, run_corpus, run_index, run_out = "eval-out";
  int run_turns = 5;
  std::uint64_t run_seed = 0;
  std::size_t run_boot = 10000, run_parallelism = 4;
  GatewayFlags run_gw;
  auto* run = eval_cmd->add_subcommand("run", "run episodes and report per-turn metrics");
  run->add_option("--config", run_config, "recommender config JSON");
  run->add_option("--pairs", run_pairs)->required();
  run->add_option("--corpus", run_corpus, "full native corpus (simulator view)")->required();
  run->add_option("--index", run_index, "index built without the seed reviews")->required();
  run->add_option("--turns", run_turns);
  run->add_option("--seed", run_seed);
  run->add_option("--bootstrap", run_boot);
  run->add_option("--parallelism", run_parallelism);
  run->add_option("--out", run_out);
  run_gw.add(run);

  std::string judge_corpus, judge_out, judge_domain = "restaurant";
  std::size_t judge_n = 1000, judge_parallelism = 4;
  std::uint64_t judge_seed = 0;
  GatewayFlags judge_gw;
  auto* judge = eval_cmd->add_subcommand("judge-faithfulness", "judge a sample of review snippets");
  judge->add_option("--corpus", judge_corpus)->required();
  judge->add_option("--domain", judge_domain);
  judge->add_option("--n", judge_n);
  judge->add_option("--seed", judge_seed);
  judge->add_option("--parallelism", judge_parallelism);
  judge->add_option("--out", judge_out);
  judge_gw.add(judge);

  // serve -------------------------------------------------------------------
  std::string serve_host = "127.0.0.1", serve_config, serve_sessions;
  int serve_port = 8080;
  std::vector<std::string> serve_indexes, serve_corpora;
  std::string serve_token_env = "SNIPCRS_SERVICE_TOKEN";
  GatewayFlags serve_gw;
  auto* serve = app.add_subcommand("serve", "HTTP service for live sessions");
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port);
  serve->add_option("--config", serve_config, "recommender config JSON");
  serve->add_option("--index", serve_indexes, "domain=DIR, repeatable")->required();
  serve->add_option("--corpus", serve_corpora, "domain=FILE for item names, repeatable");
  serve->add_option("--sessions", serve_sessions, "persist sessions to this file");
  serve->add_option("--token-env", serve_token_env, "variable holding the bearer token");
  serve_gw.add(serve);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (ingest->parsed()) {
      auto res = load_corpus(ingest_input, parse_corpus_format(ingest_format));
      auto corpus = filter_items(res.corpus, min_reviews);
      save_native_corpus(corpus, ingest_out);
      std::cout << json{{"lines", res.lines},
                        {"skipped", res.skipped},
                        {"filtered", res.filtered},
                        {"items", corpus.items().size()},
                        {"reviews", corpus.reviews().size()},
                        {"users", corpus.users().size()}}
                       .dump(2)
                << '\n';
    } else if (seed_pairs->parsed()) {
      auto corpus = load_native(pairs_corpus);
      json out = json::array();
      for (const auto& p : select_seed_pairs(corpus, pairs_n, pairs_seed))
        out.push_back({{"user_id", p.user_id}, {"item_id", p.item_id}});
      write_json(pairs_out, out);
      std::cout << out.size() << " pairs written to " << pairs_out << '\n';
    } else if (build->parsed()) {
      auto corpus = load_native(build_corpus);
      if (!build_exclude.empty()) {
        std::vector<std::string> hidden;
        for (const auto& p : read_pairs(build_exclude))
          hidden.push_back(seed_review_for(corpus, p).review_id);
        corpus = exclude_reviews(corpus, hidden);
      }
      auto gw = build_gw.make();
      auto granularity = parse_granularity(build_granularity);
      std::vector<Snippet> units;
      if (granularity == Granularity::snippet) {
        auto b = build_item_snippets(corpus, parse_domain(build_domain), *gw,
                                     {build_parallelism, 0.2});
        spdlog::info("{} reviews, {} snippets, {} failures, {} duplicates dropped", b.reviews,
                     b.snippets.size(), b.failures.size(), b.duplicates_dropped);
        units = std::move(b.snippets);
      } else {
        units = build_baseline_units(corpus, granularity);
      }
      auto index = build_index(units, *gw);
      index.save(build_out);
      std::cout << index.size() << " units of dimension " << index.dim() << " saved to "
                << build_out << '\n';
    } else if (parse->parsed()) {
      auto gw = parse_gw.make();
      auto domain = parse_domain(parse_domain_tag);
      json out = json::array();
      for (const auto& q : decompose_response(parse_question, parse_text, {}, 1, domain, *gw)) {
        if (!parse_expand) {
          out.push_back(to_json(q));
          continue;
        }
        for (const auto& x : expand_query_snippet(q, domain, *gw)) out.push_back(to_json(x));
      }
      std::cout << out.dump(2) << '\n';
    } else if (retrieve->parsed()) {
      auto index = SnippetIndex::load(retrieve_index);
      auto gw = retrieve_gw.make();
      QuerySnippet qs;
      qs.text = retrieve_text;
      qs.sentiment = parse_sentiment(retrieve_sentiment);
      qs.turn = 1;
      auto group = entailment_filter_rank(retrieve_topk(index, qs, retrieve_k, *gw), qs,
                                          retrieve_t, *gw);
      std::cout << to_json(group).dump(2) << '\n';
    } else if (run->parsed()) {
      auto config = load_config(run_config);
      auto corpus = load_native(run_corpus);
      auto index = SnippetIndex::load(run_index);
      auto pairs = read_pairs(run_pairs);
      auto gw = run_gw.make();
      auto logs = run_episodes(pairs, config, corpus, index, *gw, run_turns, run_seed,
                               run_parallelism);
      auto report = aggregate(logs, run_boot, run_seed);
      fs::create_directories(run_out);
      json episodes = json::array();
      for (const auto& l : logs) episodes.push_back(to_json(l));
      write_json(fs::path(run_out) / "episodes.json", episodes);
      write_json(fs::path(run_out) / "report.json", to_json(report));
      std::ofstream(fs::path(run_out) / "report.txt") << render_turn_table(report);
      std::cout << render_turn_table(report);
    } else if (judge->parsed()) {
      auto corpus = load_native(judge_corpus);
      auto gw = judge_gw.make();
      auto domain = parse_domain(judge_domain);
      auto b = build_item_snippets(corpus, domain, *gw, {judge_parallelism, 0.2});
      auto report = judge_sample(b.snippets, corpus, domain, *gw, judge_n, judge_seed);
      auto j = to_json(report);
      if (!judge_out.empty()) write_json(judge_out, j);
      std::cout << fmt::format("judged {}: {} supported, {} hallucinated ({:.1f}%), {} indeterminate\n",
                               report.judged, report.supported, report.hallucinated,
                               100.0 * report.hallucination_rate(), report.indeterminate);
    } else if (serve->parsed()) {
      auto base = load_config(serve_config);
      ServiceOptions options;
      options.gateway = serve_gw.make();
      auto split = [](const std::string& spec) {
        auto eq = spec.find('=');
        if (eq == std::string::npos) throw ConfigError("expected domain=PATH, got " + spec);
        return std::make_pair(parse_domain(spec.substr(0, eq)), spec.substr(eq + 1));
      };
      for (const auto& spec : serve_indexes) {
        auto [domain, dir] = split(spec);
        auto& rt = options.domains[domain];
        rt.config = base.with_overrides({{"domain", to_string(domain)}});
        rt.index = std::make_shared<const SnippetIndex>(SnippetIndex::load(dir));
        rt.config = rt.config.with_overrides({{"granularity", to_string(rt.index->granularity())}});
      }
      for (const auto& spec : serve_corpora) {
        auto [domain, file] = split(spec);
        options.domains[domain].corpus = std::make_shared<const Corpus>(load_native(file));
      }
      if (const char* token = std::getenv(serve_token_env.c_str())) options.bearer_token = token;
      if (!serve_sessions.empty()) options.session_file = serve_sessions;
      Service service(std::move(options));
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      service.listen(serve_host, serve_port);
      g_service = nullptr;
    }
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
