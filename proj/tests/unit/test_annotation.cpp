#include "doctest.h"

#include <algorithm>
#include <random>
#include <thread>

#include "emoreason/annotation.hpp"
#include "emoreason/error.hpp"
#include "test_util.hpp"

using namespace emoreason;
using nlohmann::json;

namespace {

AnnotationRecord rec(std::string sample, int rank, std::array<int, 5> answers, std::string who = "ann1") {
  return {std::move(sample), rank, answers, std::move(who), "2024-01-01T00:00:00Z"};
}

// 100 records with the given q1 and q2 counts; other questions all Yes.
std::vector<AnnotationRecord> fixture(std::array<int, 3> q1, std::array<int, 3> q2) {
  std::vector<int> a1, a2;
  for (int a = 0; a < 3; ++a) {
    a1.insert(a1.end(), static_cast<std::size_t>(q1[a]), a + 1);
    a2.insert(a2.end(), static_cast<std::size_t>(q2[a]), a + 1);
  }
  std::vector<AnnotationRecord> out;
  for (std::size_t i = 0; i < a1.size(); ++i) {
    out.push_back(rec("s" + std::to_string(i / 3), static_cast<int>(i % 3) + 1, {a1[i], a2[i], 1, 1, 1}));
  }
  return out;
}

}  // namespace

TEST_CASE("question strings") {
  CHECK(kAnnotationQuestions[0] == "Does this label correctly represent the emotion expressed by the input text?");
  CHECK(kAnnotationQuestions[1] == "Is this label more appropriate than the gold emotion label for the input text?");
  CHECK(kAnnotationQuestions[2] == "Is the emotional reasoning correct?");
  CHECK(kAnnotationQuestions[3] == "Is the reasoning grammatically correct?");
  CHECK(kAnnotationQuestions[4] == "Is the reasoning complete?");
}

TEST_CASE("validation reports the offending fields") {
  CHECK(validate_annotation(rec("s", 1, {1, 2, 3, 1, 2}), 3).empty());
  auto errors = validate_annotation(rec("", 4, {1, 2, 3, 0, 5}, " "), 3);
  std::vector<std::string> fields;
  for (const auto& e : errors) fields.push_back(e.field);
  CHECK(fields == std::vector<std::string>{"sample_id", "annotator_id", "label_rank", "q4", "q5"});
}

TEST_CASE("annotations parse from either answer layout") {
  json a = {{"sample_id", "s"}, {"label_rank", 2}, {"annotator_id", "x"}, {"answers", {1, 1, 2, 3, 1}}};
  json b = {{"sample_id", "s"}, {"label_rank", 2}, {"annotator_id", "x"},
            {"q1", 1},          {"q2", 1},         {"q3", 2},
            {"q4", 3},          {"q5", 1}};
  auto ra = std::get<AnnotationRecord>(annotation_from_json(a, 3));
  auto rb = std::get<AnnotationRecord>(annotation_from_json(b, 3));
  CHECK(ra == rb);
  CHECK(ra.answers == std::array<int, 5>{1, 1, 2, 3, 1});

  a["answers"] = {1, 2, 3, 1, 5};
  auto bad = std::get<std::vector<FieldError>>(annotation_from_json(a, 3));
  REQUIRE(bad.size() == 1);
  CHECK(bad[0].field == "q5");

  b.erase("q3");
  b["label_rank"] = "2";
  bad = std::get<std::vector<FieldError>>(annotation_from_json(b, 3));
  CHECK(bad.size() == 2);
  CHECK(std::holds_alternative<std::vector<FieldError>>(annotation_from_json(json::array(), 3)));
}

TEST_CASE("aggregation reproduces the reported percentages") {
  auto records = fixture({89, 6, 5}, {26, 57, 17});
  auto s = aggregate_annotations(records);
  CHECK(s.total == 100);
  CHECK(s.per_question[0].percent == std::array<double, 3>{89.0, 6.0, 5.0});
  CHECK(s.per_question[1].counts == std::array<int, 3>{26, 57, 17});
  CHECK(s.per_question[1].percent == std::array<double, 3>{26.0, 57.0, 17.0});
  for (const auto& q : s.per_question) {
    CHECK(q.counts[0] + q.counts[1] + q.counts[2] == s.total);
    CHECK(q.percent[0] + q.percent[1] + q.percent[2] == doctest::Approx(100.0));
  }
  auto j = to_json(s);
  CHECK(j["per_question"][1]["maybe_reading"] == kQ2MaybeReading);
  CHECK(j["per_question"][0]["percent"]["yes"] == 89.0);
  CHECK(aggregate_annotations(std::vector<AnnotationRecord>{}).total == 0);
}

TEST_CASE("aggregation is order independent") {
  std::mt19937 rng(17);
  std::vector<AnnotationRecord> records;
  for (int i = 0; i < 60; ++i) {
    std::array<int, 5> answers{};
    for (auto& a : answers) a = 1 + static_cast<int>(rng() % 3);
    records.push_back(rec("s" + std::to_string(i), 1, answers));
  }
  auto base = aggregate_annotations(records);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(records.begin(), records.end(), rng);
    auto s = aggregate_annotations(records);
    for (std::size_t q = 0; q < 5; ++q) {
      CHECK(s.per_question[q].counts == base.per_question[q].counts);
      CHECK(s.per_question[q].percent == base.per_question[q].percent);
    }
  }
}

TEST_CASE("store keeps the last write per key and audits the previous value") {
  testutil::TempDir dir;
  {
    AnnotationStore store(dir.path());
    CHECK_FALSE(store.submit(rec("s1", 1, {1, 1, 1, 1, 1})));
    CHECK_FALSE(store.submit(rec("s1", 1, {1, 1, 1, 1, 1}, "ann2")));
    auto prev = store.submit(rec("s1", 1, {3, 3, 3, 3, 3}));
    REQUIRE(prev);
    CHECK(prev->answers[0] == 1);
    CHECK(store.records().size() == 2);
    CHECK(store.event_count() == 3);
    CHECK(store.has({"s1", 1, "ann2"}));
  }
  auto lines = text::split(text::trim(testutil::slurp(dir / "events.jsonl")), '\n');
  REQUIRE(lines.size() == 3);
  auto last = json::parse(lines[2]);
  CHECK(last["seq"] == 3);
  CHECK(last["previous"]["answers"][0] == 1);
  CHECK(last["record"]["answers"][0] == 3);

  AnnotationStore reopened(dir.path());
  auto records = reopened.records();
  REQUIRE(records.size() == 2);
  CHECK(records[0].answers[0] == 3);
  CHECK(records[1].annotator_id == "ann2");
}

TEST_CASE("events after the last snapshot are replayed") {
  testutil::TempDir dir;
  {
    AnnotationStore store(dir.path());
    store.submit(rec("s1", 1, {1, 1, 1, 1, 1}));
    store.flush();
    store.submit(rec("s2", 1, {2, 2, 2, 2, 2}));
  }
  // Simulate a crash after the append but before the snapshot.
  auto state = json::parse(testutil::slurp(dir / "state.json"));
  state["seq"] = 1;
  state["records"].erase(1);
  text::write_file_atomic(dir / "state.json", state.dump());
  AnnotationStore reopened(dir.path());
  CHECK(reopened.records().size() == 2);
}

TEST_CASE("a corrupt store is reported with a hint") {
  testutil::TempDir dir;
  text::write_file_atomic(dir / "events.jsonl", "{\"seq\": 1, \"record\": {}}\nnot json\n");
  try {
    AnnotationStore store(dir.path());
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::corrupt_store);
  }
}

TEST_CASE("concurrent submissions are all recorded") {
  testutil::TempDir dir;
  AnnotationStore store(dir.path());
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&store, t] {
      for (int i = 0; i < 25; ++i) store.submit(rec("s" + std::to_string(i), 1, {1, 2, 3, 1, 2}, "a" + std::to_string(t)));
    });
  }
  for (auto& th : threads) th.join();
  CHECK(store.records().size() == 200);
  CHECK(store.event_count() == 200);
  auto lines = text::split(text::trim(testutil::slurp(dir / "events.jsonl")), '\n');
  CHECK(lines.size() == 200);
}
