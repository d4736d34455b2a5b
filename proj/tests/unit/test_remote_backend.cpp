#include "doctest.h"

#include <atomic>
#include <mutex>
#include <thread>

#include "httplib.h"

#include "emoreason/client.hpp"
#include "emoreason/error.hpp"
#include "emoreason/remote_backend.hpp"

using namespace emoreason;
using nlohmann::json;

namespace {

// Echo tokens are whitespace-separated words carrying their leading space;
// each token's log-probability is minus its word length, the first is null.
json echo_response(const std::string& text, bool with_offsets) {
  json logprobs = json::array();
  json offsets = json::array();
  std::size_t i = 0;
  bool first = true;
  while (i < text.size()) {
    std::size_t start = i;
    while (i < text.size() && text[i] == ' ') ++i;
    std::size_t word = i;
    while (i < text.size() && text[i] != ' ') ++i;
    offsets.push_back(start);
    if (first) {
      logprobs.push_back(nullptr);
      first = false;
    } else {
      logprobs.push_back(-static_cast<double>(i - word));
    }
  }
  json lp = {{"token_logprobs", logprobs}};
  if (with_offsets) lp["text_offset"] = offsets;
  return {{"choices", json::array({{{"text", text}, {"logprobs", lp}}})}};
}

struct FakeServer {
  httplib::Server svr;
  std::thread thread;
  int port = 0;
  bool offsets = true;
  std::atomic<int> fail_next{0};
  std::atomic<int> completions{0};
  std::atomic<bool> embeddings{true};
  std::vector<json> bodies;
  std::vector<std::string> auth;
  std::mutex mutex;

  FakeServer() {
    svr.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++completions;
      json body = json::parse(req.body);
      {
        std::lock_guard lock(mutex);
        bodies.push_back(body);
        auth.push_back(req.get_header_value("Authorization"));
      }
      if (fail_next > 0) {
        --fail_next;
        res.status = 503;
        res.set_content("busy", "text/plain");
        return;
      }
      if (body.value("prompt", std::string()) == "bad") {
        res.status = 400;
        res.set_content("nope", "text/plain");
        return;
      }
      json out;
      if (body.value("echo", false)) {
        out = echo_response(body.at("prompt").get<std::string>(), offsets);
      } else {
        out["choices"] = json::array();
        for (int i = 0; i < body.at("n").get<int>(); ++i) {
          out["choices"].push_back({{"text", "sample " + std::to_string(i)},
                                    {"finish_reason", i == 0 ? "length" : "stop"}});
        }
      }
      res.set_content(out.dump(), "application/json");
    });
    svr.Post("/v1/token_embeddings", [this](const httplib::Request&, httplib::Response& res) {
      if (!embeddings) {
        res.status = 404;
        return;
      }
      json out = {{"tokens", {"a", "b"}}, {"vectors", {{1.0, 0.0}, {0.0, 2.0}}}};
      res.set_content(out.dump(), "application/json");
    });
    port = svr.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }
  ~FakeServer() {
    svr.stop();
    thread.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

RemoteBackendOptions options_for(const FakeServer& server, std::optional<std::string> key = {}) {
  RemoteBackendOptions opts;
  opts.base_url = server.url();
  opts.api_key = std::move(key);
  opts.model = "m1";
  opts.timeout = std::chrono::seconds(5);
  return opts;
}

}  // namespace

TEST_CASE("completion request body") {
  RemoteBackendOptions opts;
  opts.base_url = "http://localhost:1";
  opts.model = "tiny";
  RemoteBackend b(opts);
  SamplingParams p;
  p.num_samples = 4;
  p.seed = 9;
  auto body = b.completion_request("hello", p);
  CHECK(body["prompt"] == "hello");
  CHECK(body["n"] == 4);
  CHECK(body["top_p"] == 0.9);
  CHECK(body["max_tokens"] == 60);
  CHECK(body["seed"] == 9);
  CHECK(body["model"] == "tiny");
  CHECK(body["temperature"] == 1.0);
  p.greedy = true;
  body = b.completion_request("hello", p);
  CHECK(body["temperature"] == 0.0);
  CHECK(body["top_p"] == 1.0);
  auto echo = b.echo_request("x y");
  CHECK(echo["echo"] == true);
  CHECK(echo["max_tokens"] == 0);
  CHECK(echo["logprobs"] == 0);
}

TEST_CASE("malformed URLs are rejected") {
  RemoteBackendOptions opts;
  opts.base_url = "localhost:8000";
  CHECK_THROWS_AS(RemoteBackend{opts}, Error);
}

TEST_CASE("generation over HTTP") {
  FakeServer server;
  RemoteBackend b(options_for(server, "secret"));
  SamplingParams p;
  p.num_samples = 2;
  auto out = b.generate("prompt", p);
  REQUIRE(out.size() == 2);
  CHECK(out[0].text == "sample 0");
  CHECK(out[0].finish_reason == FinishReason::length);
  CHECK(out[1].sample_index == 1);
  CHECK(server.auth.back() == "Bearer secret");
  CHECK(server.bodies.back()["model"] == "m1");
}

TEST_CASE("echo scoring uses text offsets") {
  FakeServer server;
  RemoteBackend b(options_for(server));
  std::vector<std::string> cands{"joy", "very sad"};
  auto full = b.score_continuations("a b", cands, ScoringUnit::full_string);
  CHECK(server.completions == 2);
  REQUIRE(full.size() == 2);
  CHECK(full[0].log_prob_sum == -3.0);
  CHECK(full[0].token_count == 1);
  CHECK(full[1].log_prob_sum == -7.0);
  CHECK(full[1].token_count == 2);
  auto first = b.score_continuations("a b", cands, ScoringUnit::first_token);
  CHECK(first[1].log_prob_sum == -4.0);
  CHECK(first[1].token_count == 1);
}

TEST_CASE("echo scoring without offsets counts prompt tokens once") {
  FakeServer server;
  server.offsets = false;
  RemoteBackend b(options_for(server));
  std::vector<std::string> cands{"joy", "very sad"};
  auto full = b.score_continuations("a b", cands, ScoringUnit::full_string);
  CHECK(server.completions == 3);
  CHECK(full[0].log_prob_sum == -3.0);
  CHECK(full[1].log_prob_sum == -7.0);
  CHECK(full[1].token_count == 2);
}

TEST_CASE("HTTP 503 is transient and retried by the client") {
  FakeServer server;
  server.fail_next = 2;
  auto backend = std::make_shared<RemoteBackend>(options_for(server));
  std::vector<long long> sleeps;
  RetryPolicy retry;
  retry.sleep = [&](std::chrono::milliseconds d) { sleeps.push_back(d.count()); };
  Client client(backend, nullptr, retry);
  SamplingParams p;
  p.num_samples = 1;
  CHECK(client.generate("prompt", p).size() == 1);
  CHECK(sleeps == std::vector<long long>{200, 400});
  CHECK(server.completions == 3);
}

TEST_CASE("HTTP 400 is rejected without retry") {
  FakeServer server;
  auto backend = std::make_shared<RemoteBackend>(options_for(server));
  RetryPolicy retry;
  retry.sleep = [](std::chrono::milliseconds) {};
  Client client(backend, nullptr, retry);
  try {
    client.generate("bad", SamplingParams{});
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::backend_rejected);
    CHECK(std::string(e.what()).find("400") != std::string::npos);
  }
  CHECK(server.completions == 1);
}

TEST_CASE("embeddings endpoint") {
  FakeServer server;
  RemoteBackend b(options_for(server));
  auto e = b.embed_tokens("a b");
  CHECK(e.tokens().size() == 2);
  CHECK(e.vectors()[1][1] == 1.0);
  server.embeddings = false;
  try {
    b.embed_tokens("a b");
    FAIL("expected failure");
  } catch (const Error& err) {
    CHECK(err.code() == Errc::provider_unavailable);
  }
}

TEST_CASE("unreachable backend is transient") {
  int port = 0;
  {
    FakeServer server;
    port = server.port;
  }
  RemoteBackendOptions opts;
  opts.base_url = "http://127.0.0.1:" + std::to_string(port);
  opts.timeout = std::chrono::seconds(2);
  RemoteBackend b(opts);
  try {
    b.generate("prompt", SamplingParams{});
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::backend_unreachable);
    CHECK(e.transient());
  }
}
