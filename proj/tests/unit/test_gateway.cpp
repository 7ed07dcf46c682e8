#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <thread>

#include "snipcrs/errors.hpp"
#include "snipcrs/gateway.hpp"

using namespace snipcrs;
using nlohmann::json;

namespace {

constexpr RetryPolicy kFastRetry{3, std::chrono::milliseconds(1)};

// Fails the first `failures` calls of every kind with the given transience.
class FlakyBackend : public MockBackend {
 public:
  FlakyBackend(int failures, bool transient) : failures_(failures), transient_(transient) {
    on(".*", std::string("ok"));
  }
  std::string chat(const ChatRequest& req) override {
    if (calls_++ < failures_) throw BackendError("flaky", transient_);
    return MockBackend::chat(req);
  }
  int calls() const { return calls_; }

 private:
  int failures_;
  bool transient_;
  std::atomic<int> calls_{0};
};

class FakeTransport : public Transport {
 public:
  std::vector<HttpResponse> script;
  std::vector<std::string> urls;
  std::vector<json> bodies;
  std::vector<std::vector<std::pair<std::string, std::string>>> headers;

  HttpResponse post(const std::string& url, const std::string& body,
                    const std::vector<std::pair<std::string, std::string>>& h) override {
    urls.push_back(url);
    bodies.push_back(json::parse(body));
    headers.push_back(h);
    if (script.empty()) return {-1, "no script"};
    auto r = script.front();
    script.erase(script.begin());
    return r;
  }
};

BackendConfig http_config() {
  BackendConfig c;
  c.chat_url = "http://models.local/v1/chat/completions";
  c.chat_model = "chat-m";
  c.embed_url = "http://models.local/v1/embeddings";
  c.embed_model = "embed-m";
  c.nli_url = "http://models.local/nli";
  c.api_key_env = "SNIPCRS_TEST_KEY";
  return c;
}

std::vector<std::string> sample_texts(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back("statement number " + std::to_string(i) + " about spicy noodles");
  return out;
}

}  // namespace

TEST_CASE("normalize keeps the triple on the simplex") {
  auto s = normalize({2.0, 1.0, 1.0});
  CHECK(s.entail == doctest::Approx(0.5));
  CHECK(s.entail + s.neutral + s.contradict == doctest::Approx(1.0).epsilon(1e-12));
  auto z = normalize({-1.0, 0.0, 0.0});
  CHECK(z.neutral == 1.0);
  CHECK(normalize({NAN, 1, 0}).neutral == 1.0);
}

TEST_CASE("digest ignores key order and trailing whitespace") {
  json a = {{"user", "hello  \n"}, {"system", "sys"}, {"temperature", 0.0}};
  json b = json::parse(R"({"temperature": 0.0, "system": "sys", "user": "hello"})");
  CHECK(request_digest("chat", a) == request_digest("chat", b));
  CHECK(request_digest("chat", a) != request_digest("nli", a));
  json c = {{"user", "  hello"}, {"system", "sys"}, {"temperature", 0.0}};
  CHECK(request_digest("chat", a) != request_digest("chat", c));
}

TEST_CASE("record then replay returns identical bytes with no backend") {
  auto backend = std::make_shared<MockBackend>();
  backend->on("greet", std::string("Hello there!  \n with trailing"));
  auto cassette = Cassette::in_memory();
  Gateway rec(backend, cassette, CassetteMode::record, kFastRetry);
  ChatRequest req{"sys", "say hi", 0.0, "greet"};
  auto first = rec.chat(req);
  auto embedded = rec.embed({"quiet patio"});
  auto scores = rec.nli("quiet patio", "quiet patio");
  CHECK(rec.chat(req) == first);
  CHECK(rec.backend_calls() == 3);  // second chat was a cassette hit

  auto replay = Gateway::replay(cassette);
  CHECK(replay->chat(req) == first);
  CHECK(replay->embed({"quiet patio"})[0].values == embedded[0].values);
  auto again = replay->nli("quiet patio", "quiet patio");
  CHECK(again.entail == scores.entail);
  CHECK(again.entail >= 0.9);
  CHECK(replay->backend_calls() == 0);
  CHECK(replay->embed({}).empty());

  CHECK_THROWS_AS(replay->chat({"sys", "say bye", 0.0, "greet"}), ReplayMissError);
  CHECK_THROWS_AS(replay->nli("a b", "c d"), ReplayMissError);
  CHECK_THROWS_AS(replay->embed({"never seen"}), ReplayMissError);
  CHECK(cassette->frozen());
}

TEST_CASE("replay never touches the transport") {
  auto transport = std::make_shared<FakeTransport>();
  auto backend = std::make_shared<HttpBackend>(http_config(), transport);
  auto cassette = Cassette::in_memory();
  cassette->append({request_digest("nli", json{{"premise", "p"}, {"hypothesis", "h"}}), "nli",
                    json{{"entail", 0.7}, {"neutral", 0.2}, {"contradict", 0.1}}});
  Gateway gw(backend, cassette, CassetteMode::replay);
  CHECK(gw.nli("p", "h").entail == doctest::Approx(0.7));
  CHECK_THROWS_AS(gw.nli("p", "other"), ReplayMissError);
  CHECK(transport->urls.empty());
}

TEST_CASE("embedding batches split any way hit the same entries") {
  auto backend = std::make_shared<MockBackend>(7, 32);
  auto cassette = Cassette::in_memory();
  Gateway rec(backend, cassette, CassetteMode::record);
  auto texts = sample_texts(100);
  auto whole = rec.embed(texts);
  auto replay = Gateway::replay(cassette);
  std::vector<std::string> first(texts.begin(), texts.begin() + 50);
  std::vector<std::string> second(texts.begin() + 50, texts.end());
  auto a = replay->embed(first);
  auto b = replay->embed(second);
  a.insert(a.end(), b.begin(), b.end());
  REQUIRE(a.size() == whole.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].values == whole[i].values);
    CHECK(a[i].dim() == 32);
  }
}

TEST_CASE("mock nli scores always sum to one") {
  std::mt19937 rng(1);
  const std::vector<std::string> words = {"quiet", "patio", "not", "spicy", "noodles",
                                          "the", "is", "never", "cheap", "don't"};
  for (int i = 0; i < 500; ++i) {
    std::string p, h;
    for (int k = 0; k < 5; ++k) p += words[rng() % words.size()] + " ";
    for (int k = 0; k < 3; ++k) h += words[rng() % words.size()] + " ";
    auto s = mock_nli(p, h);
    CHECK(std::abs(s.entail + s.neutral + s.contradict - 1.0) < 1e-6);
    CHECK(s.entail >= 0.0);
    CHECK(s.contradict >= 0.0);
  }
}

TEST_CASE("mock nli polarity") {
  auto same = mock_nli("The patio is quiet.", "quiet patio");
  auto flipped = mock_nli("The patio is not quiet.", "quiet patio");
  auto contraction = mock_nli("The patio isn't quiet.", "quiet patio");
  CHECK(same.entail > 0.9);
  CHECK(flipped.entail < 0.05);
  CHECK(flipped.contradict > 0.9);
  CHECK(contraction.contradict > 0.9);
  CHECK(mock_nli("cheap beer", "quiet patio").entail < 0.05);
}

TEST_CASE("mock embeddings are unit length and share words") {
  auto a = mock_embedding("spicy noodles", 7, 64);
  auto b = mock_embedding("spicy noodles are great", 7, 64);
  auto c = mock_embedding("quiet reading nook", 7, 64);
  double na = 0, ab = 0, ac = 0;
  for (std::size_t i = 0; i < 64; ++i) {
    na += a.values[i] * a.values[i];
    ab += a.values[i] * b.values[i];
    ac += a.values[i] * c.values[i];
  }
  CHECK(na == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(ab > ac);
  CHECK(mock_embedding("spicy noodles", 8, 64).values != a.values);
}

TEST_CASE("mock chat routes by tag and fails loudly without a script") {
  MockBackend m;
  m.on("a\\..*", std::string("first")).on("a\\.b", std::string("second"));
  CHECK(m.chat({"", "x", 0, "a.b"}) == "first");
  CHECK_THROWS_AS(m.chat({"", "x", 0, "zzz"}), BackendError);
}

TEST_CASE("transient failures are retried, permanent ones are not") {
  auto flaky = std::make_shared<FlakyBackend>(2, true);
  auto gw = Gateway::passthrough(flaky, kFastRetry);
  CHECK(gw->chat({"", "hi", 0, "t"}) == "ok");
  CHECK(flaky->calls() == 3);

  auto exhausted = std::make_shared<FlakyBackend>(3, true);
  CHECK_THROWS_AS(Gateway::passthrough(exhausted, kFastRetry)->chat({"", "hi", 0, "t"}),
                  BackendError);
  CHECK(exhausted->calls() == 3);

  auto permanent = std::make_shared<FlakyBackend>(1, false);
  CHECK_THROWS_AS(Gateway::passthrough(permanent, kFastRetry)->chat({"", "hi", 0, "t"}),
                  BackendError);
  CHECK(permanent->calls() == 1);
}

TEST_CASE("gateway preconditions") {
  auto backend = std::make_shared<MockBackend>();
  CHECK_THROWS_AS(Gateway(backend, nullptr, CassetteMode::record), ConfigError);
  CHECK_THROWS_AS(Gateway(nullptr, Cassette::in_memory(), CassetteMode::record), ConfigError);
  auto gw = Gateway::passthrough(backend);
  CHECK_THROWS_AS(gw->chat({"s", "  ", 0, "t"}), GatewayError);
  CHECK_THROWS_AS(gw->embed({"ok", " "}), GatewayError);
  CHECK_THROWS_AS(gw->nli("", "h"), GatewayError);
  CHECK(parse_cassette_mode("replay") == CassetteMode::replay);
  CHECK_THROWS_AS(parse_cassette_mode("live"), ConfigError);
}

TEST_CASE("cassette file persists, reloads and reports corruption") {
  auto path = std::filesystem::temp_directory_path() / "snipcrs_cassette_test.jsonl";
  std::filesystem::remove(path);
  auto backend = std::make_shared<MockBackend>();
  backend->on(".*", std::string("answer"));
  {
    Gateway rec(backend, Cassette::open(path), CassetteMode::record);
    rec.chat({"s", "question", 0, "t"});
    rec.embed({"one", "two"});
  }
  auto loaded = Cassette::open(path);
  CHECK(loaded->size() == 3);
  auto replay = Gateway::replay(loaded);
  CHECK(replay->chat({"s", "question", 0, "t"}) == "answer");
  CHECK(replay->fingerprint() == "cassette:" + loaded->content_digest());
  CHECK_THROWS_AS(loaded->append({"d", "chat", "x"}), GatewayError);

  {
    std::ofstream out(path, std::ios::app);
    out << "{not json\n";
  }
  CHECK_THROWS_AS(Cassette::open(path), GatewayError);
  std::filesystem::remove(path);
}

TEST_CASE("content digest does not depend on insertion order") {
  auto a = Cassette::in_memory();
  auto b = Cassette::in_memory();
  a->append({"d1", "chat", "x"});
  a->append({"d2", "chat", "y"});
  b->append({"d2", "chat", "y"});
  b->append({"d1", "chat", "x"});
  CHECK(a->content_digest() == b->content_digest());
  b->append({"d3", "chat", "z"});
  CHECK(a->content_digest() != b->content_digest());
}

TEST_CASE("concurrent record calls are safe") {
  auto backend = std::make_shared<MockBackend>();
  backend->on(".*", [](const ChatRequest& r) { return "echo " + r.user_prompt; });
  auto cassette = Cassette::in_memory();
  Gateway gw(backend, cassette, CassetteMode::record);
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&gw, t] {
      for (int i = 0; i < 50; ++i) {
        gw.chat({"", "q" + std::to_string(i % 20), 0, "t"});
        gw.embed({"text " + std::to_string((i + t) % 30)});
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(cassette->size() == 50);
}

TEST_CASE("http backend speaks the chat, embedding and nli shapes") {
  ::setenv("SNIPCRS_TEST_KEY", "sekret", 1);
  auto transport = std::make_shared<FakeTransport>();
  transport->script = {
      {200, R"({"choices":[{"message":{"role":"assistant","content":"hi!"}}]})"},
      {200, R"({"data":[{"index":1,"embedding":[0,1]},{"index":0,"embedding":[1,0]}]})"},
      {200, R"({"entailment":0.6,"neutral":0.3,"contradiction":0.1})"}};
  HttpBackend backend(http_config(), transport);
  CHECK(backend.chat({"sys", "user", 0.0, "t"}) == "hi!");
  auto vecs = backend.embed({"a", "b"});
  CHECK(vecs[0].values == std::vector<float>{1, 0});
  CHECK(vecs[1].values == std::vector<float>{0, 1});
  CHECK(backend.nli("p", "h").entail == doctest::Approx(0.6));

  REQUIRE(transport->bodies.size() == 3);
  CHECK(transport->urls[0] == "http://models.local/v1/chat/completions");
  CHECK(transport->bodies[0]["model"] == "chat-m");
  CHECK(transport->bodies[0]["messages"][0]["role"] == "system");
  CHECK(transport->bodies[0]["messages"][1]["content"] == "user");
  CHECK(transport->bodies[1]["input"] == json::array({"a", "b"}));
  CHECK(transport->bodies[2]["premise"] == "p");
  CHECK(transport->headers[0].front() ==
        std::pair<std::string, std::string>{"Authorization", "Bearer sekret"});
  ::unsetenv("SNIPCRS_TEST_KEY");
}

TEST_CASE("http status classes map to transient and permanent errors") {
  auto transport = std::make_shared<FakeTransport>();
  transport->script = {{503, "busy"}, {429, "slow down"}, {200, R"({"choices":[{"message":{"content":"ok"}}]})"}};
  auto backend = std::make_shared<HttpBackend>(http_config(), transport);
  auto gw = Gateway::passthrough(backend, kFastRetry);
  CHECK(gw->chat({"", "u", 0, "t"}) == "ok");
  CHECK(transport->urls.size() == 3);

  transport->script = {{400, "bad request"}};
  CHECK_THROWS_AS(gw->chat({"", "u", 0, "t"}), BackendError);
  CHECK(transport->urls.size() == 4);

  transport->script = {{200, "not json"}};
  CHECK_THROWS_AS(backend->chat({"", "u", 0, "t"}), BackendError);
  transport->script = {{200, R"({"unexpected":true})"}};
  CHECK_THROWS_AS(backend->nli("p", "h"), BackendError);

  try {
    backend->chat({"", "u", 0, "t"});  // script empty: connection failure
    FAIL("expected an error");
  } catch (const BackendError& e) {
    CHECK(e.transient());
  }
}

TEST_CASE("backend config from file values and environment") {
  auto c = BackendConfig::from_json({{"chat_url", "http://a/chat"}, {"chat_model", "m"}});
  CHECK(c.chat_url == "http://a/chat");
  ::setenv("SNIPCRS_CHAT_MODEL", "override", 1);
  c.apply_environment();
  CHECK(c.chat_model == "override");
  ::unsetenv("SNIPCRS_CHAT_MODEL");
  HttpBackend unconfigured(BackendConfig{}, std::make_shared<FakeTransport>());
  CHECK_THROWS_AS(unconfigured.nli("p", "h"), ConfigError);
}
