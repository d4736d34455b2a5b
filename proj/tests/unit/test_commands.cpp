#include "doctest.h"

#include <sstream>

#include "emoreason/commands.hpp"
#include "emoreason/corpus.hpp"
#include "emoreason/error.hpp"
#include "test_util.hpp"

using namespace emoreason;
using nlohmann::json;

namespace {

const EnvLookup no_env = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };

std::vector<json> read_lines(const std::filesystem::path& p) {
  std::vector<json> out;
  for (const auto& line : text::split(testutil::slurp(p), '\n')) {
    if (!text::trim(line).empty()) out.push_back(json::parse(line));
  }
  return out;
}

RunConfig toy_config(const testutil::TempDir& dir) {
  RunConfig c;
  c.backend = "scripted:" + (testutil::data_dir() / "toy_script.json").string();
  c.n_contexts = 3;
  c.q_samples = 5;
  c.cache_dir = (dir / "cache").string();
  return c;
}

ReasonOptions toy_reason(const testutil::TempDir& dir, const std::string& out) {
  ReasonOptions o;
  o.config = toy_config(dir);
  o.input = testutil::data_dir() / "toy.jsonl";
  o.output = dir / out;
  return o;
}

json summary_of(const std::filesystem::path& report) { return read_lines(report).back(); }

// A three-label profile with a one-example context template.
std::filesystem::path write_hand_profile(const testutil::TempDir& dir) {
  json profile = {{"name", "hand"},
                  {"labels", {"joy", "fear", "anger"}},
                  {"prompts",
                   {{"context_instruction", "Describe the situation."},
                    {"context_examples", {{{"input", "I fell."}, {"context", "They tripped."}}}}}}};
  text::write_file_atomic(dir / "hand.json", profile.dump());
  return dir / "hand.json";
}

}  // namespace

TEST_CASE("reason over the toy corpus is deterministic and cached") {
  testutil::TempDir dir;
  std::ostringstream out, err;
  auto first = toy_reason(dir, "aug1.jsonl");
  first.audit_dir = dir / "audit";
  REQUIRE_MESSAGE(cmd_reason(first, out, err, no_env) == kExitOk, err.str());
  auto records = read_augmented(dir / "aug1.jsonl");
  CHECK(records.size() == 5);
  for (const auto& r : records) {
    CHECK(r.top.size() >= 1);
    CHECK(r.top.size() <= 3);
    CHECK(r.contexts.size() == 3);
  }
  auto cold = summary_of(dir / "aug1.jsonl.report.jsonl");
  CHECK(cold["ok"] == 5);
  CHECK(cold["backend_calls"].get<int>() > 0);
  CHECK(read_lines(dir / "aug1.jsonl.report.jsonl").front()["type"] == "config");
  CHECK(std::distance(std::filesystem::directory_iterator(dir / "audit"), {}) == 5);

  auto second = toy_reason(dir, "aug2.jsonl");
  CHECK(cmd_reason(second, out, err, no_env) == kExitOk);
  CHECK(testutil::slurp(dir / "aug1.jsonl") == testutil::slurp(dir / "aug2.jsonl"));
  CHECK(summary_of(dir / "aug2.jsonl.report.jsonl")["backend_calls"] == 0);

  // Parallel execution against a fresh cache produces the same bytes.
  auto parallel = toy_reason(dir, "aug3.jsonl");
  parallel.config.parallelism = 4;
  parallel.config.cache_dir = (dir / "cache2").string();
  CHECK(cmd_reason(parallel, out, err, no_env) == kExitOk);
  CHECK(testutil::slurp(dir / "aug1.jsonl") == testutil::slurp(dir / "aug3.jsonl"));
}

TEST_CASE("input and configuration errors exit 2 before writing output") {
  testutil::TempDir dir;
  std::ostringstream out, err;
  auto missing = toy_reason(dir, "aug.jsonl");
  missing.input = dir / "nope.jsonl";
  CHECK(cmd_reason(missing, out, err, no_env) == kExitUsage);
  CHECK_FALSE(std::filesystem::exists(dir / "aug.jsonl"));

  auto few_shot = toy_reason(dir, "aug.jsonl");
  few_shot.config.few_shot_k = 9;
  CHECK(cmd_reason(few_shot, out, err, no_env) == kExitUsage);
  CHECK_FALSE(std::filesystem::exists(dir / "aug.jsonl"));
}

TEST_CASE("run ids depend on output-affecting settings only") {
  RunConfig a;
  RunConfig b = a;
  b.parallelism = 8;
  b.cache_dir = "elsewhere";
  CHECK(make_run_id(a, "x") == make_run_id(b, "x"));
  CHECK(make_run_id(a, "x").size() == 16);
  b.n_contexts = 3;
  CHECK(make_run_id(a, "x") != make_run_id(b, "x"));
  CHECK(make_run_id(a, "x") != make_run_id(a, "y"));
}

TEST_CASE("hand-traced emogen votes") {
  testutil::TempDir dir;
  auto profile_path = write_hand_profile(dir);
  auto prompts = load_profile(profile_path.string()).prompts;
  text::write_file_atomic(dir / "d.jsonl",
                          "{\"id\": \"a\", \"text\": \"A dog barked.\", \"gold_label\": \"joy\"}\n"
                          "{\"id\": \"b\", \"text\": \"The lights went out.\", \"gold_label\": \"fear\"}\n");
  auto prompt_a = render_context_prompt(prompts.context_template, "A dog barked.").text;
  auto prompt_b = render_context_prompt(prompts.context_template, "The lights went out.").text;
  json script = {
      {"id", "hand"},
      {"generate", {{prompt_a, {"ctxA", "ctxB", "ctxC"}}, {prompt_b, {"ctxD", "ctxE", ""}}}},
      {"score_rules",
       {
           // a: joy, joy, fear -> joy 2 of 3
           {{"contains", "Context: ctxA\n"}, {"table", {{"joy", -1.0}, {"fear", -2.0}, {"anger", -3.0}}}},
           {{"contains", "Context: ctxB\n"}, {"table", {{"joy", -0.5}, {"fear", -2.0}, {"anger", -3.0}}}},
           {{"contains", "Context: ctxC\n"}, {"table", {{"joy", -4.0}, {"fear", -0.25}, {"anger", -3.0}}}},
           // b: joy (-2) vs fear (-1) tie on count; fear wins on mean score
           {{"contains", "Context: ctxD\n"}, {"table", {{"joy", -2.0}, {"fear", -3.0}, {"anger", -5.0}}}},
           {{"contains", "Context: ctxE\n"}, {"table", {{"joy", -4.0}, {"fear", -1.0}, {"anger", -5.0}}}},
       }},
  };
  text::write_file_atomic(dir / "script.json", script.dump());

  ClassifyCmdOptions o;
  o.config.profile = profile_path.string();
  o.config.backend = "scripted:" + (dir / "script.json").string();
  o.config.n_contexts = 3;
  o.config.few_shot_k = 1;
  o.config.cache_dir = (dir / "cache").string();
  o.input = dir / "d.jsonl";
  o.output = dir / "pred.jsonl";
  std::ostringstream out, err;
  REQUIRE_MESSAGE(cmd_classify(o, out, err, no_env) == kExitOk, err.str());
  auto lines = read_lines(dir / "pred.jsonl");
  REQUIRE(lines.size() == 2);
  CHECK(lines[0]["prediction"] == "joy");
  CHECK(lines[0]["vote_count"] == 2);
  CHECK(lines[0]["total_votes"] == 3);
  CHECK(lines[0]["tie_broken"] == false);
  CHECK(lines[1]["prediction"] == "fear");
  CHECK(lines[1]["vote_count"] == 1);
  CHECK(lines[1]["total_votes"] == 2);
  CHECK(lines[1]["tie_broken"] == true);
}

TEST_CASE("baseline prompts reach the backend verbatim") {
  testutil::TempDir dir;
  text::write_file_atomic(dir / "d.jsonl", "{\"id\": \"1\", \"text\": \"text\", \"gold_label\": \"sadness\"}\n");
  auto standard = testutil::slurp(testutil::source_dir() / "tests" / "golden" / "baseline_standard.txt");
  auto cot = testutil::slurp(testutil::source_dir() / "tests" / "golden" / "baseline_cot.txt");
  standard.pop_back();
  cot.pop_back();
  json script = {{"id", "b"},
                 {"generate",
                  {{standard, {{"pool", {" Sad"}}}},
                   {cot, {{"pool", {" The author lost something. The final emotion label is anger."}}}}}}};
  text::write_file_atomic(dir / "script.json", script.dump());

  std::ostringstream out, err;
  for (auto [mode, expected] : {std::pair{ClassifyMode::baseline_standard, "sadness"},
                                std::pair{ClassifyMode::baseline_cot, "anger"}}) {
    ClassifyCmdOptions o;
    o.config.backend = "scripted:" + (dir / "script.json").string();
    o.config.cache_dir = (dir / "cache").string();
    o.input = dir / "d.jsonl";
    o.output = dir / "pred.jsonl";
    o.mode = mode;
    REQUIRE_MESSAGE(cmd_classify(o, out, err, no_env) == kExitOk, err.str());
    auto line = read_lines(dir / "pred.jsonl").at(0);
    CHECK(line["prediction"] == expected);
    CHECK(line["mode"] == to_string(mode));
  }
}

TEST_CASE("baseline output mapping") {
  auto profile = load_profile("isear").dataset;
  CHECK(map_baseline_output("Joy", profile) == "joy");
  CHECK(map_baseline_output(" sad.\nBecause...", profile) == "sadness");
  CHECK(map_baseline_output("I think it is fear here", profile) == "fear");
  CHECK_FALSE(map_baseline_output("fear or anger", profile));
  CHECK_FALSE(map_baseline_output("boredom", profile));
  CHECK(classify_mode_from_string(to_string(ClassifyMode::baseline_cot)) == ClassifyMode::baseline_cot);
}

TEST_CASE("evaluate the two-class hand case") {
  testutil::TempDir dir;
  json profile = {{"name", "ab"}, {"labels", {"a", "b"}},
                  {"prompts", {{"context_instruction", "x"}, {"context_examples", json::array()}}}};
  text::write_file_atomic(dir / "ab.json", profile.dump());
  text::write_file_atomic(dir / "gold.jsonl",
                          "{\"id\": \"1\", \"text\": \"t\", \"gold_label\": \"a\"}\n"
                          "{\"id\": \"2\", \"text\": \"t\", \"gold_label\": \"a\"}\n"
                          "{\"id\": \"3\", \"text\": \"t\", \"gold_label\": \"b\"}\n"
                          "{\"id\": \"4\", \"text\": \"t\", \"gold_label\": \"b\"}\n");
  text::write_file_atomic(dir / "pred.jsonl",
                          "{\"id\": \"1\", \"prediction\": \"a\"}\n{\"id\": \"2\", \"prediction\": \"b\"}\n"
                          "{\"id\": \"3\", \"prediction\": \"b\"}\n{\"id\": \"4\", \"prediction\": \"b\"}\n");
  EvaluateOptions o;
  o.predictions = dir / "pred.jsonl";
  o.dataset = dir / "gold.jsonl";
  o.profile = (dir / "ab.json").string();
  std::ostringstream out, err;
  REQUIRE_MESSAGE(cmd_evaluate(o, out, err) == kExitOk, err.str());
  CHECK(out.str().find("accuracy 0.7500  macro_f1 0.7333") != std::string::npos);
  auto metrics = json::parse(testutil::slurp(dir / "pred.jsonl.metrics.json"));
  CHECK(std::abs(metrics["macro_f1"].get<double>() - 0.7333333333333333) < 1e-9);

  text::write_file_atomic(dir / "other.jsonl", "{\"id\": \"x\", \"prediction\": \"a\"}\n{\"id\": \"y\", \"prediction\": \"a\"}\n");
  o.predictions = dir / "other.jsonl";
  std::ostringstream err2;
  CHECK(cmd_evaluate(o, out, err2) == kExitUsage);
  CHECK(err2.str().find("2 of 2 prediction ids (100.0%)") != std::string::npos);
}

TEST_CASE("distribution export") {
  testutil::TempDir dir;
  std::ostringstream out, err;
  auto reason = toy_reason(dir, "aug.jsonl");
  REQUIRE(cmd_reason(reason, out, err, no_env) == kExitOk);
  ExportDistOptions o;
  o.augmented = dir / "aug.jsonl";
  o.output = dir / "gold.tsv";
  o.source = DistSource::gold;
  REQUIRE(cmd_export_dist(o, out, err) == kExitOk);
  auto tsv = testutil::slurp(dir / "gold.tsv");
  CHECK(tsv.starts_with("label\tcount\n"));
  CHECK(tsv.find("anger\t1\n") != std::string::npos);
  CHECK(text::split(text::trim(tsv), '\n').size() == 6);

  auto records = read_augmented(dir / "aug.jsonl");
  CHECK(collect_labels(records, DistSource::top1).size() == 5);
  CHECK(collect_labels(records, DistSource::voted).size() == 5);
  CHECK(dist_source_from_string("emotion-words") == DistSource::emotion_words);
}
