#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emoreason/prompts.hpp"
#include "emoreason/records.hpp"

namespace emoreason {

enum class InputFormat { canonical, csv, tsv };

std::string_view to_string(InputFormat format);
InputFormat input_format_from_string(std::string_view s);

struct DatasetProfile {
  std::string name;
  LabelSet label_set;
  std::string prompt_profile;
  InputFormat input_format = InputFormat::canonical;
  // source column -> role ("id", "text" or "gold_label")
  std::map<std::string, std::string> field_map{
      {"id", "id"}, {"text", "text"}, {"gold_label", "gold_label"}};
  // Free-text label -> label_set entry, used to map baseline generations.
  std::map<std::string, std::string, std::less<>> label_aliases;

  static DatasetProfile from_json(const nlohmann::json& profile);
};

/// Dataset and prompt halves of one profile file.
struct Profile {
  DatasetProfile dataset;
  PromptProfile prompts;
};

// "isear" / "emotweets" resolve to the compiled-in profiles, anything else
// is read as a profile file path.
Profile load_profile(const std::string& name_or_path);
Profile builtin_profile(std::string_view name);

struct RejectedRow {
  std::size_t line = 0;
  std::string id;
  std::string reason;
  std::string raw;
};

struct LoadResult {
  std::vector<InputRecord> records;
  std::vector<RejectedRow> rejected;
};

struct LoadOptions {
  std::optional<InputFormat> format;  // overrides the profile's
  // Rejected rows are also written here as JSON lines when set.
  std::optional<std::filesystem::path> errors_path;
};

/// Reads canonical JSONL or CSV/TSV (mapped through field_map). Gold labels
/// are lowercased and checked against the label set; rows with unknown
/// labels or empty text are rejected, not dropped. Duplicate ids and a header
/// missing mapped columns are hard errors.
LoadResult load_dataset(const std::filesystem::path& path, const DatasetProfile& profile,
                        const LoadOptions& options = {});

// One JSON line per row: {line, id, reason, raw}.
void write_rejected(const std::vector<RejectedRow>& rows, const std::filesystem::path& path);

// RFC 4180 style rows; quoted fields may hold separators, quotes and newlines.
std::vector<std::vector<std::string>> parse_delimited(std::string_view content, char sep);

inline constexpr std::string_view kAugmentedSchema = "emoreason.augmented/v1";

nlohmann::ordered_json to_json(const AugmentedRecord& record);
AugmentedRecord augmented_from_json(const nlohmann::json& j);

void write_augmented(const std::vector<AugmentedRecord>& records, const std::filesystem::path& path);
std::vector<AugmentedRecord> read_augmented(const std::filesystem::path& path);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int support = 0;  // gold count
};

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::map<std::string, ClassMetrics> per_class;
  int total = 0;
  int missing_predictions = 0;
};

/// Accuracy over all gold ids (a missing prediction is wrong and a false
/// negative for its gold class). Macro-F1 averages per-class F1 over the
/// whole label set; classes never seen contribute 0.
Metrics compute_metrics(const std::map<std::string, std::string>& predictions,
                        const std::map<std::string, std::string>& golds, const LabelSet& labels);

nlohmann::ordered_json to_json(const Metrics& metrics);

// Counts ordered by count descending, then label.
std::vector<std::pair<std::string, int>> label_distribution(const std::vector<std::string>& labels);

// Two-column TSV with a "label\tcount" header.
std::string format_distribution(const std::vector<std::pair<std::string, int>>& dist);

}  // namespace emoreason
