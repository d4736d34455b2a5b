#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "json.hpp"

namespace emoreason {

inline constexpr std::array<std::string_view, 5> kAnnotationQuestions = {
    "Does this label correctly represent the emotion expressed by the input text?",
    "Is this label more appropriate than the gold emotion label for the input text?",
    "Is the emotional reasoning correct?",
    "Is the reasoning grammatically correct?",
    "Is the reasoning complete?",
};

inline constexpr std::array<std::string_view, 3> kAnswerNames = {"Yes", "Maybe", "No"};

// Question 2's "Maybe" has its own meaning.
inline constexpr std::string_view kQ2MaybeReading = "New emotion label is same as gold label";

struct AnnotationRecord {
  std::string sample_id;
  int label_rank = 1;
  std::array<int, 5> answers{};  // each 1 (Yes), 2 (Maybe) or 3 (No)
  std::string annotator_id;
  std::string timestamp;

  bool operator==(const AnnotationRecord&) const = default;
};

using AnnotationKey = std::tuple<std::string, int, std::string>;  // sample, rank, annotator
AnnotationKey key_of(const AnnotationRecord& r);

struct FieldError {
  std::string field;
  std::string message;
};

// Empty when valid. max_rank bounds label_rank (the k of top-k).
std::vector<FieldError> validate_annotation(const AnnotationRecord& r, int max_rank);

nlohmann::ordered_json to_json(const AnnotationRecord& r);

// Shape errors come back as field errors instead of throwing so the server can
// report which field to fix.
std::variant<AnnotationRecord, std::vector<FieldError>> annotation_from_json(const nlohmann::json& j,
                                                                           int max_rank);

struct QuestionSummary {
  std::array<int, 3> counts{};
  std::array<double, 3> percent{};
};

struct AnnotationSummary {
  std::array<QuestionSummary, 5> per_question{};
  int total = 0;
};

AnnotationSummary aggregate_annotations(std::span<const AnnotationRecord> records);
nlohmann::ordered_json to_json(const AnnotationSummary& summary);

/// Append-only event log (events.jsonl) plus a compacted snapshot
/// (state.json). Last write wins per key; each event keeps the value it
/// replaced. All members are safe to call concurrently.
class AnnotationStore {
 public:
  // Throws corrupt_store (with a recovery hint) when either file is unreadable.
  explicit AnnotationStore(std::filesystem::path dir);
  ~AnnotationStore();

  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;

  // Returns the record this one replaced, if any.
  std::optional<AnnotationRecord> submit(const AnnotationRecord& record);

  std::vector<AnnotationRecord> records() const;  // key order
  bool has(const AnnotationKey& key) const;
  std::size_t event_count() const;

  // Rewrites state.json from memory.
  void flush();

  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path events_path() const { return dir_ / "events.jsonl"; }
  std::filesystem::path state_path() const { return dir_ / "state.json"; }

 private:
  void flush_locked();

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  std::map<AnnotationKey, AnnotationRecord> current_;
  std::size_t seq_ = 0;
  std::size_t flushed_seq_ = 0;
};

}  // namespace emoreason
