#include "doctest.h"

#include <cmath>
#include <thread>

#include "emoreason/backend.hpp"
#include "emoreason/cache.hpp"
#include "emoreason/embedding.hpp"
#include "emoreason/error.hpp"
#include "emoreason/scripted_backend.hpp"
#include "test_util.hpp"

using namespace emoreason;

TEST_CASE("sampling params validation names the field") {
  SamplingParams p;
  CHECK(p.nucleus_p == 0.9);
  CHECK(p.max_new_tokens == 60);
  CHECK_NOTHROW(p.validate());
  p.nucleus_p = 1.5;
  CHECK_THROWS_WITH(p.validate(), doctest::Contains("nucleus_p"));
  p = {};
  p.num_samples = 0;
  CHECK_THROWS_WITH(p.validate(), doctest::Contains("num_samples"));
  p = {};
  p.max_new_tokens = 0;
  CHECK_THROWS_WITH(p.validate(), doctest::Contains("max_new_tokens"));
}

TEST_CASE("token embeddings are normalized on construction") {
  TokenEmbeddings e({"a", "b"}, {{3, 4}, {0, 2}});
  CHECK(e.vectors()[0][0] == doctest::Approx(0.6));
  CHECK(e.vectors()[0][1] == doctest::Approx(0.8));
  CHECK(e.vectors()[1][1] == 1.0);
  CHECK_THROWS_AS(TokenEmbeddings({"a"}, {{0, 0}}), Error);
  CHECK_THROWS_AS(TokenEmbeddings({"a", "b"}, {{1, 0}}), Error);
  CHECK_THROWS_AS(TokenEmbeddings({"a", "b"}, {{1, 0}, {1}}), Error);
}

TEST_CASE("cache keys are canonical") {
  SamplingParams p;
  auto k1 = make_generate_key("b", "prompt", p);
  auto k2 = make_generate_key("b", "prompt", p);
  CHECK(k1.digest() == k2.digest());
  CHECK(k1.digest().size() == 64);
  p.seed = 3;
  CHECK(make_generate_key("b", "prompt", p).digest() != k1.digest());
  CHECK(make_generate_key("other", "prompt", SamplingParams{}).digest() != k1.digest());
  std::vector<std::string> cands{"joy", "fear"};
  auto s1 = make_score_key("b", "q", cands, ScoringUnit::full_string);
  auto s2 = make_score_key("b", "q", cands, ScoringUnit::first_token);
  CHECK(s1.digest() != s2.digest());
  CHECK(make_embed_key("b", "x").kind == RequestKind::embed);
}

TEST_CASE("wire encodings round-trip") {
  std::vector<GenerationResult> gens{{"a", FinishReason::stop, 0}, {"b", FinishReason::length, 1}};
  CHECK(generation_results_from_json(to_json(gens)) == gens);
  std::vector<ContinuationScore> scores{{"joy", -1.25, 2}};
  CHECK(continuation_scores_from_json(to_json(scores)) == scores);
  TokenEmbeddings e({"x"}, {{1, 0}});
  CHECK(token_embeddings_from_json(to_json(e)) == e);
}

TEST_CASE("response cache stores once and survives reopen") {
  testutil::TempDir dir;
  auto key = make_embed_key("b", "text");
  {
    ResponseCache cache(dir.path());
    CHECK_FALSE(cache.lookup(key));
    CHECK(cache.store(key, "{\"v\":1}"));
    CHECK_FALSE(cache.store(key, "{\"v\":2}"));
    CHECK(cache.lookup(key) == "{\"v\":1}");
  }
  ResponseCache reopened(dir.path());
  CHECK(reopened.lookup(key) == "{\"v\":1}");
  CHECK(reopened.path_for(key).filename() == key.digest());
}

TEST_CASE("concurrent identical stores leave one entry") {
  testutil::TempDir dir;
  ResponseCache cache(dir.path());
  auto key = make_embed_key("b", "same");
  std::atomic<int> wins{0};
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        if (cache.store(key, "{\"writer\":" + std::to_string(t) + "}")) ++wins;
      });
    }
  }
  CHECK(wins == 1);
  std::size_t files = 0;
  for (auto& e : std::filesystem::recursive_directory_iterator(dir.path())) files += e.is_regular_file();
  CHECK(files == 1);
}

TEST_CASE("cache gc drops temp and corrupt files") {
  testutil::TempDir dir;
  ResponseCache cache(dir.path());
  auto good = make_embed_key("b", "good");
  auto bad = make_embed_key("b", "bad");
  cache.store(good, "{}");
  cache.store(bad, "{}");
  text::write_file_atomic(cache.path_for(bad), "not json");
  auto tmp = cache.path_for(good);
  tmp += ".tmp.99";
  text::write_file_atomic(tmp, "partial");

  auto dry = cache.gc({.max_age = std::nullopt, .dry_run = true});
  CHECK(dry.removed_corrupt == 1);
  CHECK(std::filesystem::exists(cache.path_for(bad)));

  auto stats = cache.gc({});
  CHECK(stats.entries == 1);
  CHECK(stats.removed_corrupt == 1);
  CHECK(stats.removed_stale_temp == 1);
  CHECK_FALSE(std::filesystem::exists(cache.path_for(bad)));
  CHECK(cache.lookup(good));

  auto expired = cache.gc({.max_age = std::chrono::hours(0), .dry_run = false});
  CHECK(expired.removed_expired == 1);
}

TEST_CASE("cache dir honours the environment variable") {
  ::setenv("EMOREASON_CACHE_DIR", "/tmp/from-env", 1);
  CHECK(ResponseCache::resolve_dir("fallback") == "/tmp/from-env");
  ::unsetenv("EMOREASON_CACHE_DIR");
  CHECK(ResponseCache::resolve_dir("fallback") == "fallback");
}

TEST_CASE("scripted backend passes score tables through") {
  ScriptedBackend b;
  b.set_scores("X", {{"joy", -1.2}, {"sadness", -0.3}});
  std::vector<std::string> cands{"joy", "sadness"};
  auto scores = b.score_continuations("X", cands, ScoringUnit::full_string);
  REQUIRE(scores.size() == 2);
  CHECK(scores[0].candidate == "joy");
  CHECK(scores[0].log_prob_sum == -1.2);
  CHECK(scores[1].log_prob_sum == -0.3);
  CHECK_THROWS_AS(b.score_continuations("Y", cands, ScoringUnit::full_string), Error);
}

TEST_CASE("scripted queues are consumed in order and mark the backend single-threaded") {
  ScriptedBackend b;
  CHECK(b.capabilities().thread_safe);
  b.queue_generations("p", {"one", "two", "three"});
  CHECK_FALSE(b.capabilities().thread_safe);
  SamplingParams two;
  two.num_samples = 2;
  auto first = b.generate("p", two);
  CHECK(first[0].text == "one");
  CHECK(first[1].text == "two");
  CHECK(first[1].sample_index == 1);
  CHECK_THROWS_AS(b.generate("p", two), Error);
}

TEST_CASE("scripted pools are stateless and seed-dependent") {
  ScriptedBackend b("s", 1);
  b.set_generation_pool("*", {"a", "b", "c", "d", "e"});
  SamplingParams p;
  p.num_samples = 10;
  auto x = b.generate("prompt", p);
  auto y = b.generate("prompt", p);
  CHECK(x == y);
  p.seed = 99;
  auto z = b.generate("prompt", p);
  std::vector<std::string> xs, zs;
  for (auto& g : x) xs.push_back(g.text);
  for (auto& g : z) zs.push_back(g.text);
  CHECK(xs != zs);
}

TEST_CASE("scripted rules match substrings before the wildcard") {
  auto b = ScriptedBackend::from_json(nlohmann::json::parse(R"({
    "generate": {"*": {"pool": ["fallback"]}, "exact prompt": ["queued"]},
    "generate_rules": [{"contains": "needle", "pool": ["ruled"]}],
    "score_rules": [{"contains": "needle", "table": {"joy": -1.0}, "missing": -9.0}],
    "score": {"*": {"table": {"joy": -2.0}, "jitter": 0.5}}
  })"));
  SamplingParams p;
  CHECK(b->generate("exact prompt", p)[0].text == "queued");
  CHECK(b->generate("has a needle inside", p)[0].text == "ruled");
  CHECK(b->generate("anything", p)[0].text == "fallback");
  std::vector<std::string> cands{"joy", "fear"};
  auto ruled = b->score_continuations("a needle", cands, ScoringUnit::full_string);
  CHECK(ruled[0].log_prob_sum == -1.0);
  CHECK(ruled[1].log_prob_sum == -9.0);
  std::vector<std::string> joy{"joy"};
  auto jittered = b->score_continuations("other", joy, ScoringUnit::full_string);
  CHECK(jittered[0].log_prob_sum <= -2.0);
  CHECK(jittered[0].log_prob_sum >= -2.5);
  CHECK(b->score_continuations("other", joy, ScoringUnit::full_string) == jittered);
}

TEST_CASE("malformed scripts are format errors") {
  CHECK_THROWS_AS(ScriptedBackend::from_json(nlohmann::json::parse(R"({"generate": {"p": 3}})")), Error);
  testutil::TempDir dir;
  text::write_file_atomic(dir / "s.json", "{not json");
  CHECK_THROWS_AS(ScriptedBackend::from_file(dir / "s.json"), Error);
}

TEST_CASE("hash projection embeddings are deterministic unit vectors") {
  HashProjectionEmbeddingProvider a(32, 5), b(32, 5), c(32, 6);
  auto ea = a.embed_tokens("Sad and lonely");
  CHECK(ea.tokens() == std::vector<std::string>{"sad", "and", "lonely"});
  CHECK(ea.dim() == 32);
  CHECK(ea == b.embed_tokens("Sad and lonely"));
  CHECK_FALSE(ea == c.embed_tokens("Sad and lonely"));
  for (const auto& v : ea.vectors()) {
    double n = 0;
    for (double x : v) n += x * x;
    CHECK(n == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(a.embed_tokens(" ... "), Error);
  CHECK(a.id() == "hash-projection:32:5");
}

TEST_CASE("inflections share trigrams and land closer than unrelated words") {
  HashProjectionEmbeddingProvider p;
  auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
  };
  auto sad = p.embed_tokens("sadness").vectors()[0];
  auto sadd = p.embed_tokens("sadnes").vectors()[0];
  auto joy = p.embed_tokens("joyful").vectors()[0];
  CHECK(dot(sad, sadd) > dot(sad, joy));
}

TEST_CASE("table embeddings fall back or fail on unknown tokens") {
  TableEmbeddingProvider strict({{"joy", {1, 0}}});
  CHECK(strict.embed_tokens("Joy!").size() == 1);
  CHECK_THROWS_AS(strict.embed_tokens("joy fear"), Error);
  HashProjectionEmbeddingProvider hash(2, 1);
  TableEmbeddingProvider lenient({{"joy", {1, 0}}}, &hash);
  CHECK(lenient.embed_tokens("joy fear").size() == 2);
}
