#include "doctest.h"

#include "snipcrs/dialogue.hpp"
#include "snipcrs/errors.hpp"
#include "snipcrs/prompts.hpp"
#include "world.hpp"

using namespace snipcrs;

namespace {

// Fails every embedding call after the first `allowed`.
class BrittleEmbedder : public MockBackend {
 public:
  explicit BrittleEmbedder(std::shared_ptr<MockBackend> inner, int allowed)
      : inner_(std::move(inner)), allowed_(allowed) {}
  std::string chat(const ChatRequest& r) override { return inner_->chat(r); }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
    if (allowed_-- <= 0) throw BackendError("embedding service gone", false);
    return inner_->embed(texts);
  }

 private:
  std::shared_ptr<MockBackend> inner_;
  int allowed_;
};

struct Fixture {
  testing::World world = testing::planted_world();
  std::shared_ptr<MockBackend> backend = testing::scripted_backend();
  std::shared_ptr<Gateway> gw = Gateway::passthrough(backend);
  SnippetIndex index = world.build_index(*gw);
  RecommenderConfig config;
};

}  // namespace

TEST_CASE("openers") {
  CHECK(opening_question(Domain::restaurant) ==
        "Hello, what category of restaurant are you looking for?");
  CHECK(opening_question(Domain::book) == "Hello, what category of books are you looking for?");
  CHECK(opening_question(Domain::clothing) ==
        "Hello, what category of clothing items are you looking for?");
  CHECK_THROWS_AS(parse_domain("hotel"), ConfigError);
}

TEST_CASE("history renders one utterance per line") {
  std::vector<Utterance> h{{Role::recommender, "Hello?"}, {Role::seeker, "Cheap\n eats."}};
  CHECK(render_history(h) == "Recommender: Hello?\nSeeker: Cheap eats.");
  CHECK(render_history({}).empty());
}

TEST_CASE("clarification trims, retries once, then falls back") {
  std::vector<Utterance> h{{Role::recommender, "Hello?"}, {Role::seeker, "Cheesesteaks."}};
  auto backend = std::make_shared<MockBackend>();
  backend->on("dialogue\\.clarify$", std::string("  Casual or upscale?\nSecond line"));
  CHECK(generate_clarification(h, Domain::restaurant, *Gateway::passthrough(backend), "fb") ==
        "Casual or upscale?");

  auto blank = std::make_shared<MockBackend>();
  blank->on("dialogue\\.clarify$", std::string("\n"))
      .on("dialogue\\.clarify\\.retry", std::string("Any budget?"));
  CHECK(generate_clarification(h, Domain::restaurant, *Gateway::passthrough(blank), "fb") ==
        "Any budget?");

  auto silent = std::make_shared<MockBackend>();
  silent->on(".*", std::string(""));
  CHECK(generate_clarification(h, Domain::restaurant, *Gateway::passthrough(silent), "fb") == "fb");
  CHECK(silent->chat_calls() == 2);

  CHECK_THROWS_AS(generate_clarification({{Role::recommender, "Hello?"}}, Domain::restaurant,
                                         *Gateway::passthrough(silent), "fb"),
                  StateError);
}

TEST_CASE("clarification sees the history only and replays identically") {
  std::vector<Utterance> h{{Role::recommender, "Hello?"}, {Role::seeker, "Cheesesteaks."}};
  std::string seen;
  auto backend = std::make_shared<MockBackend>();
  backend->on("dialogue.*", [&seen](const ChatRequest& r) {
    seen = r.user_prompt;
    return std::string("What atmosphere do you prefer?");
  });
  auto cassette = Cassette::in_memory();
  Gateway rec(backend, cassette, CassetteMode::record);
  auto q = generate_clarification(h, Domain::restaurant, rec, "fb");
  CHECK(seen.find("Recommender: Hello?\nSeeker: Cheesesteaks.") != std::string::npos);
  CHECK(generate_clarification(h, Domain::restaurant, *Gateway::replay(cassette), "fb") == q);
}

TEST_CASE("session start and asking") {
  RecommenderConfig c;
  c.kappa = 12;
  auto s = start_session("s1", c, 5);
  CHECK(s.kappa == 12);
  CHECK(question_pending(s));
  CHECK(s.history.front().text == opening_question(Domain::restaurant));
  CHECK_THROWS_AS(ask(s, "Another?"), StateError);
  s.history.push_back({Role::seeker, "ok"});
  CHECK_THROWS_AS(ask(s, "  "), StateError);
  ask(s, "Another?");
  CHECK(question_pending(s));
}

TEST_CASE("a matching answer puts the planted item first") {
  Fixture f;
  auto s = start_session("s", f.config, 1);
  auto [next, turn] = process_turn(s, "They serve saffron ice cream.", f.index, f.config, *f.gw);
  CHECK(turn.turn == 1);
  CHECK(next.turn == 1);
  REQUIRE_FALSE(turn.ranking.entries.empty());
  CHECK(turn.ranking.entries[0].item_id == testing::kPlantedTarget);
  CHECK(turn.ranking.entries[0].tie_hi == 1);
  CHECK(turn.groups == turn.query_snippets.size());
  CHECK(turn.query_snippets.size() == 4);  // original plus three expansions
  for (const auto& q : turn.query_snippets) CHECK(q.turn == 1);
  REQUIRE(next.known_intents.size() == 1);
  CHECK(next.known_intents[0].expansion == Expansion::original);
  CHECK(next.history.back() == Utterance{Role::seeker, "They serve saffron ice cream."});
  CHECK_FALSE(question_pending(next));
  CHECK_THROWS_AS(process_turn(next, "more", f.index, f.config, *f.gw), StateError);
  // The input state is untouched.
  CHECK(s.turn == 0);
  CHECK(s.scores.empty());
}

TEST_CASE("a vague answer advances the turn without scoring") {
  Fixture f;
  auto s = start_session("s", f.config, 1);
  auto [next, turn] = process_turn(s, "I don't have a particular preference about that.",
                                   f.index, f.config, *f.gw);
  CHECK(next.turn == 1);
  CHECK(turn.groups == 0);
  CHECK(turn.ranking.entries.empty());
  CHECK(next.known_intents.empty());
  CHECK(next.history.size() == 2);
}

TEST_CASE("known intents accumulate originals across turns") {
  Fixture f;
  auto s = start_session("s", f.config, 1);
  auto [s1, t1] = process_turn(s, "They serve saffron ice cream.", f.index, f.config, *f.gw);
  ask(s1, "What else?");
  auto [s2, t2] = process_turn(s1, "The patio is shady. They serve saffron ice cream.", f.index,
                               f.config, *f.gw);
  // The repeated intent is filtered by the decomposer's known-intent check.
  CHECK(s2.known_intents.size() == 2);
  CHECK(s2.known_intents[1].text == "The patio is shady.");
  CHECK(s2.turn == 2);
}

TEST_CASE("a failure mid-turn applies nothing") {
  Fixture f;
  auto s = start_session("s", f.config, 1);
  auto [s1, t1] = process_turn(s, "They serve saffron ice cream.", f.index, f.config, *f.gw);
  ask(s1, "What else?");
  const auto before = to_json(s1).dump();
  for (int allowed : {0, 1, 3}) {
    auto brittle = std::make_shared<BrittleEmbedder>(f.backend, allowed);
    auto gw = Gateway::passthrough(brittle, {1, std::chrono::milliseconds(1)});
    CHECK_THROWS_AS(process_turn(s1, "They serve lamb curry. They serve tuna poke.", f.index,
                                 f.config, *gw),
                    GatewayError);
    CHECK(to_json(s1).dump() == before);
  }
}

TEST_CASE("baseline mode queries with the raw response") {
  Fixture f;
  auto cfg = f.config.with_overrides({{"query_decomposition", false}});
  auto s = start_session("s", cfg, 1);
  auto before = f.backend->chat_calls();
  auto [next, turn] = process_turn(s, "They serve saffron ice cream.", f.index, cfg, *f.gw);
  CHECK(f.backend->chat_calls() == before);  // no decomposition, no expansion
  REQUIRE(turn.query_snippets.size() == 1);
  CHECK(turn.query_snippets[0].sentiment == Sentiment::prefer);
  CHECK(turn.ranking.entries.at(0).item_id == testing::kPlantedTarget);
}

TEST_CASE("turn results serialize") {
  Fixture f;
  auto s = start_session("s", f.config, 1);
  auto [next, turn] = process_turn(s, "They serve saffron ice cream.", f.index, f.config, *f.gw);
  auto j = to_json(turn, 3);
  CHECK(j["ranking"].size() <= 3);
  CHECK(j["query_snippets"][1]["parent"] == "They serve saffron ice cream.");
}
