#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "emoreason/config.hpp"
#include "emoreason/corpus.hpp"

namespace emoreason {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;  // some records failed
inline constexpr int kExitUsage = 2;    // configuration or input errors

struct ReasonOptions {
  RunConfig config;
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> report;  // default: <output>.report.jsonl
  std::optional<std::filesystem::path> errors;  // default: <output>.errors.jsonl
  std::optional<std::filesystem::path> audit_dir;
  std::optional<InputFormat> format;
  std::optional<std::size_t> limit;  // first N records only
};

int cmd_reason(const ReasonOptions& options, std::ostream& out, std::ostream& err,
               const EnvLookup& env = process_env());

enum class ClassifyMode { emogen, baseline_standard, baseline_cot };
ClassifyMode classify_mode_from_string(std::string_view s);
std::string_view to_string(ClassifyMode mode);

struct ClassifyCmdOptions {
  RunConfig config;
  std::filesystem::path input;
  std::filesystem::path output;
  ClassifyMode mode = ClassifyMode::emogen;
  std::optional<std::filesystem::path> errors;
  std::optional<InputFormat> format;
  std::optional<std::size_t> limit;
};

/// Writes one JSON line per record: {id, prediction, gold_label, mode, ...}.
/// prediction is null when a baseline output maps to no label.
int cmd_classify(const ClassifyCmdOptions& options, std::ostream& out, std::ostream& err,
                 const EnvLookup& env = process_env());

// Maps a free-text baseline generation onto the label set, or nullopt.
std::optional<std::string> map_baseline_output(std::string_view output, const DatasetProfile& profile);

struct EvaluateOptions {
  std::filesystem::path predictions;  // classify output or an augmented file
  std::filesystem::path dataset;
  std::string profile = "isear";
  std::optional<std::filesystem::path> metrics_out;  // default: <predictions>.metrics.json
  std::optional<InputFormat> format;
};

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err);

enum class DistSource { gold, voted, top, top1, generated, emotion_words };
DistSource dist_source_from_string(std::string_view s);

struct ExportDistOptions {
  std::filesystem::path augmented;
  std::filesystem::path output;  // TSV
  DistSource source = DistSource::generated;
};

int cmd_export_dist(const ExportDistOptions& options, std::ostream& out, std::ostream& err);

std::vector<std::string> collect_labels(const std::vector<AugmentedRecord>& records, DistSource source);

struct CacheGcOptions {
  std::filesystem::path dir;
  std::optional<int> max_age_hours;
  bool dry_run = false;
};

int cmd_cache_gc(const CacheGcOptions& options, std::ostream& out, std::ostream& err);

// Deterministic run id: hash of the output-affecting config and the input bytes.
std::string make_run_id(const RunConfig& config, std::string_view input_bytes);

}  // namespace emoreason
