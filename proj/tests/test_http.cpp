#include <atomic>
#include <chrono>
#include <string>
#include <thread>
#include <vector>

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include "uag/errors.hpp"
#include "uag/evaluator.hpp"
#include "uag/http_clients.hpp"

namespace {

using nlohmann::json;

struct TestServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;

  TestServer() = default;
  ~TestServer() { stop(); }

  void start() {
    port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  void stop() {
    if (thread.joinable()) {
      server.stop();
      thread.join();
    }
  }
  std::string base() const { return "http://127.0.0.1:" + std::to_string(port); }
};

uag::HttpOptions fast_options() {
  uag::HttpOptions options;
  options.timeout_ms = 2000;
  options.retries = 2;
  return options;
}

uag::GenerationContext context_for(const uag::KnowledgeGraph& g, const std::string& prompt) {
  return uag::GenerationContext{g, prompt, {}, "q?"};
}

}  // namespace

TEST_CASE("embedding provider round-trips vectors") {
  TestServer ts;
  std::atomic<int> hits{0};
  ts.server.Post("/embed", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const auto body = json::parse(req.body);
    json rows = json::array();
    for (const auto& text : body.at("texts")) {
      const double mark = static_cast<double>(text.get<std::string>().size());
      rows.push_back({mark, 0.0, 1.0});
    }
    res.set_content(json{{"embeddings", rows}}.dump(), "application/json");
  });
  ts.start();

  const uag::HttpEmbeddingProvider provider(ts.base(), fast_options());
  CHECK(provider.identity() == "http-embed:" + ts.base());

  const auto e = provider.embed("abcd");
  CHECK(e.dim == 3);
  CHECK(e.at(0) == 4.0);
  CHECK(e.at(1) == 0.0);
  CHECK(e.at(2) == 1.0);

  const std::vector<std::string> texts = {"x", "yy", "zzz"};
  const auto batch = provider.embed_batch(texts);
  REQUIRE(batch.size() == 3);
  CHECK(batch[0].at(0) == 1.0);
  CHECK(batch[2].at(0) == 3.0);
  CHECK(hits == 2);  // one call per request, batched
}

TEST_CASE("5xx responses are retried, 4xx are not") {
  TestServer ts;
  std::atomic<int> attempts{0};
  ts.server.Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
    if (++attempts == 1) {
      res.status = 503;
      return;
    }
    res.set_content(json{{"embeddings", {{1.0}}}}.dump(), "application/json");
  });
  ts.start();

  SUBCASE("retry recovers") {
    const uag::HttpEmbeddingProvider provider(ts.base(), fast_options());
    const auto e = provider.embed("t");
    CHECK(e.at(0) == 1.0);
    CHECK(attempts == 2);
  }
  SUBCASE("retries exhausted surfaces an error") {
    auto options = fast_options();
    options.retries = 0;
    const uag::HttpEmbeddingProvider provider(ts.base(), options);
    CHECK_THROWS_AS(provider.embed("t"), uag::ProviderError);
    CHECK(attempts == 1);
  }
}

TEST_CASE("client errors fail immediately") {
  TestServer ts;
  std::atomic<int> attempts{0};
  ts.server.Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
    ++attempts;
    res.status = 404;
  });
  ts.start();
  const uag::HttpEmbeddingProvider provider(ts.base(), fast_options());
  CHECK_THROWS_AS(provider.embed("t"), uag::ProviderError);
  CHECK(attempts == 1);
}

TEST_CASE("malformed embedding payloads are rejected without retry") {
  TestServer ts;
  std::atomic<int> attempts{0};
  std::string payload;
  ts.server.Post("/embed", [&](const httplib::Request&, httplib::Response& res) {
    ++attempts;
    res.set_content(payload, "application/json");
  });
  ts.start();
  const uag::HttpEmbeddingProvider provider(ts.base(), fast_options());

  for (const char* bad : {R"({"vectors": [[1.0]]})", R"({"embeddings": "nope"})",
                          R"({"embeddings": [[1.0], [2.0]]})", R"({"embeddings": [["x"]]})",
                          R"({"embeddings": [[]]})", "not json"}) {
    payload = bad;
    attempts = 0;
    CHECK_THROWS_AS(provider.embed("t"), uag::ProviderError);
    CHECK(attempts == 1);
  }
}

TEST_CASE("connection failure is retried then reported") {
  // nothing listens on this closed port
  uag::HttpOptions options;
  options.timeout_ms = 300;
  options.retries = 1;
  const uag::HttpEmbeddingProvider provider("http://127.0.0.1:1", options);
  CHECK_THROWS_AS(provider.embed("t"), uag::ProviderError);
}

TEST_CASE("generator posts the prompt and respects the token budget field") {
  TestServer ts;
  json captured;
  ts.server.Post("/generate", [&](const httplib::Request& req, httplib::Response& res) {
    captured = json::parse(req.body);
    res.set_content(json{{"text", "Hinduism, Islam"}}.dump(), "application/json");
  });
  ts.start();

  auto options = fast_options();
  options.max_new_tokens = 24;
  uag::HttpGenerator generator(ts.base(), options);
  CHECK(generator.identity() == "http-generate:" + ts.base());

  uag::KnowledgeGraph g;
  g.add_triple("a", "r", "b");
  g.finalize();
  const auto text = generator.generate(context_for(g, "What religions? ..."));
  CHECK(text == "Hinduism, Islam");
  CHECK(captured.at("prompt") == "What religions? ...");
  CHECK(captured.at("max_new_tokens") == 24);
}

TEST_CASE("generator failures surface as GeneratorError") {
  TestServer ts;
  ts.server.Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"output": "missing text key"})", "application/json");
  });
  ts.start();
  uag::HttpGenerator generator(ts.base(), fast_options());
  uag::KnowledgeGraph g;
  g.add_triple("a", "r", "b");
  g.finalize();
  CHECK_THROWS_AS(generator.generate(context_for(g, "p")), uag::GeneratorError);
}

TEST_CASE("generator concurrency is bounded by max_in_flight") {
  TestServer ts;
  std::atomic<int> current{0};
  std::atomic<int> peak{0};
  ts.server.Post("/generate", [&](const httplib::Request&, httplib::Response& res) {
    const int now = ++current;
    int expected = peak.load();
    while (now > expected && !peak.compare_exchange_weak(expected, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(40));
    --current;
    res.set_content(json{{"text", "ok"}}.dump(), "application/json");
  });
  ts.start();

  auto options = fast_options();
  options.max_in_flight = 2;
  uag::HttpGenerator generator(ts.base(), options);
  uag::KnowledgeGraph g;
  g.add_triple("a", "r", "b");
  g.finalize();

  std::vector<std::thread> callers;
  for (int i = 0; i < 6; ++i) {
    callers.emplace_back([&generator, &g, i] {
      const auto prompt = "p" + std::to_string(i);
      uag::KnowledgeGraph const& graph = g;
      uag::GenerationContext ctx{graph, prompt, {}, "q?"};
      (void)generator.generate(ctx);
    });
  }
  for (auto& t : callers) t.join();
  CHECK(peak.load() <= 2);
  CHECK(peak.load() >= 1);
}
