#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emoreason/annotation.hpp"
#include "emoreason/records.hpp"

namespace emoreason {

enum class TaskOrder { sequential, random, stratified };
TaskOrder task_order_from_string(std::string_view s);

/// One (sample, label rank) shown to annotators.
struct AnnotationTask {
  std::string sample_id;
  int label_rank = 1;
  std::string text;
  std::string context;
  std::string label;
  std::string explanation;
  std::optional<std::string> gold_label;
};

struct TaskOptions {
  TaskOrder order = TaskOrder::random;
  std::uint64_t seed = 0;
  // Keep only the first N samples after ordering.
  std::optional<std::size_t> sample_limit;
};

// Samples are ordered as a unit; a sample's ranks always stay adjacent and
// ascending. random is a seeded shuffle; stratified shuffles within each gold
// label and then deals labels round-robin.
std::vector<AnnotationTask> build_tasks(const std::vector<AugmentedRecord>& records, const TaskOptions& options);

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON, empty for 204
};

/// The annotation API without the HTTP layer.
class AnnotationService {
 public:
  AnnotationService(const std::vector<AugmentedRecord>& records, AnnotationStore& store,
                    const TaskOptions& options = {});

  ApiResponse next_task(const std::string& annotator_id) const;
  ApiResponse submit(const std::string& body);
  ApiResponse summary() const;

  const std::vector<AnnotationTask>& tasks() const { return tasks_; }
  AnnotationStore& store() { return store_; }

 private:
  std::vector<AnnotationTask> tasks_;
  AnnotationStore& store_;
  int max_rank_ = 1;
};

nlohmann::ordered_json to_json(const AnnotationTask& task);

/// HTTP front end. GET / serves ui_dir when given, otherwise a small
/// placeholder page.
class AnnotationServer {
 public:
  AnnotationServer(AnnotationService& service, std::optional<std::filesystem::path> ui_dir = std::nullopt);
  ~AnnotationServer();

  // Throws Error(io) when the address cannot be bound (e.g. port in use).
  // port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop(); flushes the store before returning.
  void listen();
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace emoreason
