#include "doctest.h"

#include <thread>

#include "httplib.h"

#include "emoreason/error.hpp"
#include "emoreason/server.hpp"
#include "test_util.hpp"

using namespace emoreason;
using nlohmann::json;

namespace {

std::vector<AugmentedRecord> records() {
  std::vector<AugmentedRecord> out;
  const char* golds[] = {"joy", "fear", "joy", "anger", "fear", "joy"};
  for (int i = 0; i < 6; ++i) {
    AugmentedRecord r;
    r.id = "s" + std::to_string(i);
    r.text = "text " + std::to_string(i);
    r.gold_label = golds[i];
    r.contexts = {"ctx0", "ctx1"};
    r.top = {{"joy", "because", 3, 1, true}, {"relief", "also", 2, 0, true}};
    if (i == 5) r.top.resize(1);
    out.push_back(r);
  }
  return out;
}

std::string answer(const std::string& sample, int rank, std::array<int, 5> a, const std::string& who = "ann") {
  return json{{"sample_id", sample}, {"label_rank", rank}, {"annotator_id", who}, {"answers", a}}.dump();
}

TaskOptions sequential() {
  TaskOptions o;
  o.order = TaskOrder::sequential;
  return o;
}

}  // namespace

TEST_CASE("tasks keep a sample's ranks together") {
  auto recs = records();
  auto seq = build_tasks(recs, sequential());
  CHECK(seq.size() == 11);
  CHECK(seq[0].sample_id == "s0");
  CHECK(seq[0].context == "ctx1");
  CHECK(seq[1].label_rank == 2);
  CHECK(seq[1].context == "ctx0");

  for (auto order : {TaskOrder::random, TaskOrder::stratified}) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      TaskOptions o;
      o.order = order;
      o.seed = seed;
      auto tasks = build_tasks(recs, o);
      CHECK(tasks.size() == 11);
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].label_rank > 1) {
          CHECK(tasks[i - 1].sample_id == tasks[i].sample_id);
          CHECK(tasks[i - 1].label_rank == tasks[i].label_rank - 1);
        }
      }
      auto again = build_tasks(recs, o);
      for (std::size_t i = 0; i < tasks.size(); ++i) CHECK(again[i].sample_id == tasks[i].sample_id);
    }
  }

  // Stratified dealing: the first three samples cover three gold labels.
  TaskOptions strat;
  strat.order = TaskOrder::stratified;
  strat.seed = 9;
  strat.sample_limit = 3;
  auto tasks = build_tasks(recs, strat);
  std::set<std::string> golds;
  for (const auto& t : tasks) golds.insert(*t.gold_label);
  CHECK(golds == std::set<std::string>{"anger", "fear", "joy"});
  CHECK(task_order_from_string("random") == TaskOrder::random);
  CHECK_THROWS_AS(task_order_from_string("alphabetical"), Error);
}

TEST_CASE("service flow: next task, submit, summary") {
  testutil::TempDir dir;
  AnnotationStore store(dir.path());
  auto recs = records();
  AnnotationService service(recs, store, sequential());

  auto first = service.next_task("ann");
  CHECK(first.status == 200);
  auto task = json::parse(first.body);
  CHECK(task["sample_id"] == "s0");
  CHECK(task["label_rank"] == 1);
  CHECK(task["questions"].size() == 5);
  CHECK(task["progress"]["total"] == 11);
  CHECK(service.next_task("").status == 422);

  auto bad = service.submit(answer("s0", 1, {1, 2, 3, 1, 5}));
  CHECK(bad.status == 422);
  auto errors = json::parse(bad.body);
  CHECK(errors["error"] == "validation");
  CHECK(errors["fields"][0]["field"] == "q5");
  CHECK(service.submit(answer("s9", 1, {1, 1, 1, 1, 1})).status == 422);
  CHECK(service.submit(answer("s5", 2, {1, 1, 1, 1, 1})).status == 422);
  CHECK(service.submit("{").status == 422);

  auto ok = service.submit(answer("s0", 1, {1, 2, 1, 1, 1}));
  CHECK(ok.status == 200);
  auto stored = json::parse(ok.body);
  CHECK(stored["replaced"] == false);
  CHECK_FALSE(stored["record"]["timestamp"].get<std::string>().empty());
  CHECK(json::parse(service.submit(answer("s0", 1, {1, 1, 1, 1, 1})).body)["replaced"] == true);

  auto next = json::parse(service.next_task("ann").body);
  CHECK(next["sample_id"] == "s0");
  CHECK(next["label_rank"] == 2);
  CHECK(next["progress"]["done"] == 1);
  CHECK(json::parse(service.next_task("other").body)["label_rank"] == 1);

  auto summary = json::parse(service.summary().body);
  CHECK(summary["total"] == 1);
  CHECK(summary["per_question"][0]["counts"]["yes"] == 1);
}

TEST_CASE("all tasks done returns 204") {
  testutil::TempDir dir;
  AnnotationStore store(dir.path());
  auto recs = records();
  recs.resize(1);
  AnnotationService service(recs, store, sequential());
  CHECK(service.submit(answer("s0", 1, {1, 1, 1, 1, 1})).status == 200);
  CHECK(service.submit(answer("s0", 2, {1, 1, 1, 1, 1})).status == 200);
  auto done = service.next_task("ann");
  CHECK(done.status == 204);
  CHECK(done.body.empty());
}

TEST_CASE("live HTTP server") {
  testutil::TempDir dir;
  AnnotationStore store(dir.path());
  auto recs = records();
  AnnotationService service(recs, store, sequential());
  AnnotationServer server(service);
  int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen(); });

  httplib::Client client("127.0.0.1", port);
  auto next = client.Get("/api/tasks/next?annotator=ann");
  REQUIRE(next);
  CHECK(next->status == 200);
  CHECK(json::parse(next->body)["sample_id"] == "s0");

  auto bad = client.Post("/api/annotations", answer("s0", 1, {1, 2, 3, 1, 5}), "application/json");
  REQUIRE(bad);
  CHECK(bad->status == 422);
  for (int i = 0; i < 3; ++i) {
    auto post = client.Post("/api/annotations", answer("s" + std::to_string(i), 1, {1, 2, 1, 1, 1}),
                            "application/json");
    REQUIRE(post);
    CHECK(post->status == 200);
  }
  auto summary = client.Get("/api/summary");
  REQUIRE(summary);
  CHECK(json::parse(summary->body)["total"] == 3);
  auto page = client.Get("/");
  REQUIRE(page);
  CHECK(page->status == 200);
  CHECK(page->body.find("/api/summary") != std::string::npos);

  // A second server cannot take the same port.
  AnnotationServer clash(service);
  CHECK_THROWS_WITH(clash.bind("127.0.0.1", port), doctest::Contains("port in use"));

  server.stop();
  thread.join();
  CHECK(json::parse(testutil::slurp(dir / "state.json"))["seq"] == 3);
}
