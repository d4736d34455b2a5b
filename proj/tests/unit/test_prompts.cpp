#include "doctest.h"

#include <random>

#include "emoreason/corpus.hpp"
#include "emoreason/error.hpp"
#include "emoreason/prompts.hpp"
#include "test_util.hpp"

using namespace emoreason;

namespace {

std::string golden(const std::string& name) {
  auto s = testutil::slurp(testutil::source_dir() / "tests" / "golden" / name);
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

}  // namespace

TEST_CASE("context prompts match the goldens") {
  auto isear = load_profile("isear").prompts;
  CHECK(isear.context_template.k() == 5);
  CHECK(render_context_prompt(isear.context_template, "I passed my driving test on the first try.").text ==
        golden("context_isear.txt"));
  auto tweets = load_profile("emotweets").prompts;
  CHECK(render_context_prompt(tweets.context_template, "cannot wait for the weekend!!").text ==
        golden("context_emotweets.txt"));
}

TEST_CASE("emotion and baseline prompts match the goldens") {
  auto qa = render_emotion_prompt("The author is a new driver who was nervous about the exam.",
                                  "I passed my driving test on the first try.");
  CHECK(qa.kind == PromptKind::emotion_qa);
  CHECK(qa.text == golden("emotion_qa.txt"));
  CHECK(render_baseline_prompt(PromptKind::baseline_standard, "text").text == golden("baseline_standard.txt"));
  CHECK(render_baseline_prompt(PromptKind::baseline_cot, "text").text == golden("baseline_cot.txt"));
}

TEST_CASE("substitution is single pass") {
  std::map<std::string, std::string> values{{"context", "{input}"}, {"input", "x"}};
  CHECK(substitute("C={context} I={input}", values) == "C={input} I=x");
  CHECK(substitute("{not closed", values) == "{not closed");
  CHECK(substitute("{}", values) == "{}");
  CHECK_THROWS_WITH(substitute("{missing}", values), doctest::Contains("{missing}"));
  CHECK(placeholders(kEmotionQaTemplate) == std::vector<std::string>{"context", "input"});
}

TEST_CASE("renderers reject bad inputs") {
  try {
    render_emotion_prompt("", "text");
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty_context);
  }
  try {
    render_baseline_prompt(PromptKind::emotion_qa, "text");
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::wrong_renderer);
  }
  CHECK_THROWS_AS(render_baseline_prompt(PromptKind::baseline_cot, ""), Error);
  CHECK_THROWS_AS(render_context_prompt(FewShotTemplate{"i", {}}, ""), Error);
}

TEST_CASE("prompt kind names round-trip") {
  for (auto k : {PromptKind::context_gen, PromptKind::emotion_qa, PromptKind::baseline_standard,
                 PromptKind::baseline_cot}) {
    CHECK(prompt_kind_from_string(to_string(k)) == k);
  }
  CHECK(to_string(PromptKind::emotion_qa) == "EmotionQA");
  CHECK_THROWS_AS(prompt_kind_from_string("nope"), Error);
}

TEST_CASE("context prompt rendering inverts") {
  std::mt19937 rng(42);
  const std::string alphabet = "abc XYZ,.!?'\"{}:";
  auto word = [&](std::size_t max_len) {
    std::string s;
    auto len = 1 + rng() % max_len;
    for (std::size_t i = 0; i < len; ++i) s.push_back(alphabet[rng() % alphabet.size()]);
    return s;
  };
  for (int trial = 0; trial < 200; ++trial) {
    FewShotTemplate tmpl;
    tmpl.instruction = word(30);
    auto k = rng() % 6;
    for (std::size_t i = 0; i < k; ++i) tmpl.examples.push_back({word(40), word(40)});
    auto input = word(50);
    auto parsed = parse_context_prompt(render_context_prompt(tmpl, input).text);
    REQUIRE(parsed);
    CHECK(parsed->instruction == tmpl.instruction);
    CHECK(parsed->examples == tmpl.examples);
    CHECK(parsed->final_input == input);
  }
  CHECK_FALSE(parse_context_prompt("just text"));
}
