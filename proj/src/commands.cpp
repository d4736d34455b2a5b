#include "emoreason/commands.hpp"

#include <chrono>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "emoreason/error.hpp"
#include "emoreason/hashing.hpp"
#include "emoreason/json_util.hpp"
#include "emoreason/parallel.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct Session {
  Profile profile;
  RecordProfile record_profile;
  LoadResult data;
  std::shared_ptr<Backend> backend;
  std::shared_ptr<ResponseCache> cache;
  std::unique_ptr<Client> client;
  std::string run_id;
  std::size_t record_workers = 1;
  std::size_t context_workers = 1;
};

fs::path with_suffix(const fs::path& p, const std::string& suffix) { return fs::path(p.string() + suffix); }

// Everything before the first backend call: profile, dataset, backend, cache.
// Throws Error; callers turn that into exit code 2.
Session open_session(const RunConfig& config, const fs::path& input, std::optional<InputFormat> format,
                     const fs::path& errors_path, std::optional<std::size_t> limit, std::ostream& err,
                     const EnvLookup& env) {
  if (!fs::exists(input)) fail(Errc::io, "input file not found: " + input.string());
  Session s;
  s.profile = load_profile(config.profile);
  auto& examples = s.profile.prompts.context_template.examples;
  if (static_cast<std::size_t>(config.few_shot_k) > examples.size()) {
    fail(Errc::config, "few_shot_k: profile '" + config.profile + "' has only " +
                           std::to_string(examples.size()) + " examples");
  }
  examples.resize(static_cast<std::size_t>(config.few_shot_k));
  s.record_profile = {s.profile.prompts, s.profile.dataset.label_set, EmotionLexicon::builtin()};

  LoadOptions load;
  load.format = format;
  s.data = load_dataset(input, s.profile.dataset, load);
  if (!s.data.rejected.empty()) {
    write_rejected(s.data.rejected, errors_path);
    err << "warning: " << s.data.rejected.size() << " row(s) rejected, see " << errors_path.string() << "\n";
  }
  if (limit && s.data.records.size() > *limit) s.data.records.resize(*limit);

  s.run_id = make_run_id(config, text::read_file(input));
  s.backend = make_backend(config, env);
  s.cache = std::make_shared<ResponseCache>(config.cache_dir);
  s.client = std::make_unique<Client>(s.backend, s.cache);

  auto parallelism = static_cast<std::size_t>(config.parallelism);
  if (parallelism > 1 && !s.backend->capabilities().thread_safe) {
    err << "warning: backend " << s.backend->id() << " is not thread-safe; running single-threaded\n";
    parallelism = 1;
  }
  s.record_workers = std::max<std::size_t>(1, std::min(parallelism, s.data.records.size()));
  s.context_workers = std::max<std::size_t>(1, parallelism / s.record_workers);
  return s;
}

std::string safe_file_stem(std::size_t index, const std::string& id) {
  std::ostringstream os;
  os << std::setw(5) << std::setfill('0') << index << '-';
  for (char c : id) {
    bool keep = text::is_ascii_letter(c) || (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.';
    os << (keep ? c : '_');
  }
  return os.str();
}

double ms_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

std::string make_run_id(const RunConfig& config, std::string_view input_bytes) {
  auto snapshot = to_json(config);
  // Neither changes any output byte.
  snapshot.erase("parallelism");
  snapshot.erase("cache_dir");
  return sha256_hex(dump_line(snapshot) + "\n" + sha256_hex(input_bytes)).substr(0, 16);
}

int cmd_reason(const ReasonOptions& options, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  const auto started = std::chrono::steady_clock::now();
  Session s;
  try {
    s = open_session(options.config, options.input, options.format,
                     options.errors.value_or(with_suffix(options.output, ".errors.jsonl")), options.limit,
                     err, env);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }

  auto pipeline = pipeline_config(options.config, s.run_id);
  pipeline.context_parallelism = s.context_workers;
  auto embedder = make_embedder(options.config, *s.client);

  const auto& records = s.data.records;
  std::vector<RecordOutcome> outcomes(records.size());
  parallel_for(records.size(), s.record_workers, [&](std::size_t i) {
    outcomes[i] = run_record(*s.client, *embedder, records[i], s.record_profile, pipeline);
  });

  std::vector<AugmentedRecord> augmented;
  std::size_t failed = 0;
  for (const auto& o : outcomes) {
    if (o.ok) {
      augmented.push_back(*o.record);
    } else {
      ++failed;
      err << "record " << o.record_id << " failed: " << o.error << "\n";
    }
  }

  try {
    write_augmented(augmented, options.output);

    if (options.audit_dir) {
      fs::create_directories(*options.audit_dir);
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        text::write_file_atomic(*options.audit_dir / (safe_file_stem(i, outcomes[i].record_id) + ".json"),
                                to_json(outcomes[i].audit).dump(2) + "\n");
      }
    }

    std::string report;
    ordered_json head;
    head["type"] = "config";
    head["run_id"] = s.run_id;
    head["input"] = options.input.string();
    head["output"] = options.output.string();
    head["backend_id"] = s.backend->id();
    head["config"] = to_json(options.config);
    report += dump_line(head) + "\n";
    for (const auto& o : outcomes) {
      ordered_json line;
      line["type"] = "record";
      line["id"] = o.record_id;
      line["status"] = o.ok ? "ok" : "failed";
      if (!o.ok) line["error"] = o.error;
      line["stage_ms"] = ordered_json::object();
      for (const auto& [stage, ms] : o.stage_ms) line["stage_ms"][stage] = ms;
      line["context_warnings"] = o.audit.contexts.warnings;
      line["skipped_contexts"] = ordered_json::array();
      for (const auto& sk : o.audit.classification.skipped) {
        line["skipped_contexts"].push_back({{"context_index", sk.context_index}, {"reason", sk.reason}});
      }
      line["malformed_reasonings"] = o.audit.malformed.size();
      report += dump_line(line) + "\n";
    }
    ordered_json summary;
    summary["type"] = "summary";
    summary["records"] = outcomes.size();
    summary["ok"] = outcomes.size() - failed;
    summary["failed"] = failed;
    summary["rejected_rows"] = s.data.rejected.size();
    summary["backend_calls"] = s.client->backend_requests();
    summary["cache_hits"] = s.client->cache_hits();
    summary["elapsed_ms"] = ms_since(started);
    report += dump_line(summary) + "\n";
    text::write_file_atomic(options.report.value_or(with_suffix(options.output, ".report.jsonl")), report);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }

  out << "reason: " << augmented.size() << "/" << outcomes.size() << " records ok, " << failed << " failed, "
      << s.client->backend_requests() << " backend calls, " << s.client->cache_hits() << " cache hits\n";
  return failed ? kExitPartial : kExitOk;
}

ClassifyMode classify_mode_from_string(std::string_view s) {
  if (s == "emogen") return ClassifyMode::emogen;
  if (s == "baseline_standard" || s == "baseline-standard") return ClassifyMode::baseline_standard;
  if (s == "baseline_cot" || s == "baseline-cot") return ClassifyMode::baseline_cot;
  fail(Errc::invalid_argument, "unknown classify mode '" + std::string(s) + "'");
}

std::string_view to_string(ClassifyMode mode) {
  switch (mode) {
    case ClassifyMode::emogen: return "emogen";
    case ClassifyMode::baseline_standard: return "baseline_standard";
    case ClassifyMode::baseline_cot: return "baseline_cot";
  }
  return "emogen";
}

std::optional<std::string> map_baseline_output(std::string_view output, const DatasetProfile& profile) {
  const auto* aliases = &profile.label_aliases;
  const auto& labels = profile.label_set;
  if (auto parsed = parse_output(output, aliases); std::holds_alternative<ParsedReasoning>(parsed)) {
    const auto& label = std::get<ParsedReasoning>(parsed).label_norm;
    if (labels.contains(label)) return label;
  }
  auto whole = normalize_label(text::trim(output), aliases);
  if (labels.contains(whole)) return whole;
  auto first_line = normalize_label(text::trim(output.substr(0, output.find('\n'))), aliases);
  if (labels.contains(first_line)) return first_line;
  // Otherwise accept the output only if it names exactly one label.
  std::set<std::string> found;
  for (const auto& token : text::letter_tokens(output)) {
    auto label = normalize_label(token, aliases);
    if (labels.contains(label)) found.insert(label);
  }
  if (found.size() == 1) return *found.begin();
  return std::nullopt;
}

int cmd_classify(const ClassifyCmdOptions& options, std::ostream& out, std::ostream& err, const EnvLookup& env) {
  Session s;
  try {
    s = open_session(options.config, options.input, options.format,
                     options.errors.value_or(with_suffix(options.output, ".errors.jsonl")), options.limit,
                     err, env);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }
  const auto pipeline = pipeline_config(options.config, s.run_id);
  const auto& records = s.data.records;
  std::vector<ordered_json> lines(records.size());
  std::vector<char> failed(records.size(), 0);

  parallel_for(records.size(), s.record_workers, [&](std::size_t i) {
    const auto& rec = records[i];
    ordered_json line;
    line["id"] = rec.id;
    line["mode"] = to_string(options.mode);
    line["prediction"] = nullptr;
    line["gold_label"] = rec.gold_label ? ordered_json(*rec.gold_label) : ordered_json(nullptr);
    try {
      if (options.mode == ClassifyMode::emogen) {
        auto contexts = generate_contexts(*s.client, rec, s.record_profile.prompts.context_template,
                                          pipeline.context_params);
        ClassifyOptions copts = pipeline.classify;
        copts.qa_template = s.record_profile.prompts.emotion_qa;
        copts.parallelism = s.context_workers;
        auto classification = classify_per_context(*s.client, rec, contexts, s.record_profile.labels, copts);
        if (classification.predictions.empty()) fail(Errc::no_votes, "every context failed classification");
        auto voted = vote_majority(classification.predictions, s.record_profile.labels.labels());
        line["prediction"] = voted.label;
        line["vote_count"] = voted.vote_count;
        line["total_votes"] = voted.total_votes;
        line["tie_broken"] = voted.tie_broken;
      } else {
        auto kind = options.mode == ClassifyMode::baseline_standard ? PromptKind::baseline_standard
                                                                    : PromptKind::baseline_cot;
        auto prompt = render_baseline_prompt(kind, rec.text, s.profile.prompts);
        SamplingParams params = pipeline.context_params;
        params.num_samples = 1;
        params.greedy = true;
        auto generations = s.client->generate(prompt.text, params);
        const auto& raw = generations.at(0).text;
        line["raw"] = raw;
        if (auto label = map_baseline_output(raw, s.profile.dataset)) line["prediction"] = *label;
      }
    } catch (const Error& e) {
      failed[i] = 1;
      line["error"] = std::string(to_string(e.code())) + ": " + e.what();
    }
    lines[i] = std::move(line);
  });

  std::string body;
  std::size_t n_failed = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    body += dump_line(lines[i]) + "\n";
    if (failed[i]) {
      ++n_failed;
      err << "record " << records[i].id << " failed: " << lines[i]["error"].get<std::string>() << "\n";
    }
  }
  try {
    text::write_file_atomic(options.output, body);
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }
  out << "classify (" << to_string(options.mode) << "): " << records.size() << " records, " << n_failed
      << " failed, " << s.client->backend_requests() << " backend calls\n";
  return n_failed ? kExitPartial : kExitOk;
}

namespace {

// Accepts classify output ({id, prediction}) or augmented records.
std::map<std::string, std::optional<std::string>> read_predictions(const fs::path& path) {
  std::map<std::string, std::optional<std::string>> preds;
  std::size_t line_no = 0;
  for (const auto& line : text::split(text::read_file(path), '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    auto j = json::parse(line, nullptr, false);
    auto where = path.string() + ":" + std::to_string(line_no);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      fail(Errc::format, where + ": expected an object with a string id");
    }
    std::optional<std::string> label;
    if (j.contains("schema")) {
      label = augmented_from_json(j).voted_label.label;
    } else if (j.contains("prediction")) {
      if (j["prediction"].is_string()) label = j["prediction"].get<std::string>();
    } else {
      fail(Errc::format, where + ": no prediction field");
    }
    auto id = j["id"].get<std::string>();
    if (!preds.emplace(id, label).second) fail(Errc::duplicate_id, where + ": duplicate id '" + id + "'");
  }
  return preds;
}

}  // namespace

int cmd_evaluate(const EvaluateOptions& options, std::ostream& out, std::ostream& err) {
  try {
    auto profile = load_profile(options.profile);
    LoadOptions load;
    load.format = options.format;
    auto data = load_dataset(options.dataset, profile.dataset, load);
    auto raw_preds = read_predictions(options.predictions);

    std::map<std::string, std::string> golds;
    for (const auto& r : data.records) {
      if (r.gold_label) golds[r.id] = *r.gold_label;
    }
    std::size_t unmatched = 0;
    for (const auto& [id, _] : raw_preds) {
      if (!golds.contains(id)) ++unmatched;
    }
    if (unmatched) {
      std::ostringstream pct;
      pct << std::fixed << std::setprecision(1) << 100.0 * unmatched / raw_preds.size();
      err << "error: id mismatch: " << unmatched << " of " << raw_preds.size() << " prediction ids ("
          << pct.str() << "%) have no gold record in " << options.dataset.string() << "\n";
      return kExitUsage;
    }
    std::map<std::string, std::string> preds;
    std::size_t unmapped = 0;
    for (const auto& [id, label] : raw_preds) {
      if (label) {
        preds[id] = *label;
      } else {
        ++unmapped;
      }
    }
    auto metrics = compute_metrics(preds, golds, profile.dataset.label_set);

    out << std::fixed << std::setprecision(4);
    out << "records " << metrics.total << "  missing " << metrics.missing_predictions << "  unmapped "
        << unmapped << "\n";
    out << "accuracy " << metrics.accuracy << "  macro_f1 " << metrics.macro_f1 << "\n\n";
    out << std::left << std::setw(12) << "label" << std::right << std::setw(10) << "precision" << std::setw(10)
        << "recall" << std::setw(10) << "f1" << std::setw(9) << "support" << "\n";
    for (const auto& label : profile.dataset.label_set.labels()) {
      const auto& c = metrics.per_class.at(label);
      out << std::left << std::setw(12) << label << std::right << std::setw(10) << c.precision << std::setw(10)
          << c.recall << std::setw(10) << c.f1 << std::setw(9) << c.support << "\n";
    }
    auto j = to_json(metrics);
    j["unmapped_predictions"] = unmapped;
    text::write_file_atomic(options.metrics_out.value_or(with_suffix(options.predictions, ".metrics.json")),
                            j.dump(2) + "\n");
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }
}

DistSource dist_source_from_string(std::string_view s) {
  if (s == "gold") return DistSource::gold;
  if (s == "voted") return DistSource::voted;
  if (s == "top") return DistSource::top;
  if (s == "top1") return DistSource::top1;
  if (s == "generated") return DistSource::generated;
  if (s == "emotion_words" || s == "emotion-words") return DistSource::emotion_words;
  fail(Errc::invalid_argument, "unknown distribution source '" + std::string(s) + "'");
}

std::vector<std::string> collect_labels(const std::vector<AugmentedRecord>& records, DistSource source) {
  std::vector<std::string> labels;
  for (const auto& r : records) {
    switch (source) {
      case DistSource::gold:
        if (r.gold_label) labels.push_back(*r.gold_label);
        break;
      case DistSource::voted: labels.push_back(r.voted_label.label); break;
      case DistSource::top:
        for (const auto& t : r.top) labels.push_back(t.label);
        break;
      case DistSource::top1:
        if (!r.top.empty()) labels.push_back(r.top.front().label);
        break;
      case DistSource::generated:
        for (const auto& [label, count] : r.generated_labels) labels.insert(labels.end(), count, label);
        break;
      case DistSource::emotion_words: labels.insert(labels.end(), r.emotion_words.begin(), r.emotion_words.end()); break;
    }
  }
  return labels;
}

int cmd_export_dist(const ExportDistOptions& options, std::ostream& out, std::ostream& err) {
  try {
    auto records = read_augmented(options.augmented);
    auto dist = label_distribution(collect_labels(records, options.source));
    text::write_file_atomic(options.output, format_distribution(dist));
    out << "export-dist: " << dist.size() << " distinct labels from " << records.size() << " records\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }
}

int cmd_cache_gc(const CacheGcOptions& options, std::ostream& out, std::ostream& err) {
  try {
    if (!fs::is_directory(options.dir)) fail(Errc::io, "cache directory not found: " + options.dir.string());
    ResponseCache cache(options.dir);
    ResponseCache::GcOptions gc;
    if (options.max_age_hours) gc.max_age = std::chrono::hours(*options.max_age_hours);
    gc.dry_run = options.dry_run;
    auto stats = cache.gc(gc);
    out << (options.dry_run ? "cache gc (dry run): " : "cache gc: ") << stats.entries << " entries kept, "
        << stats.removed_stale_temp << " temp, " << stats.removed_corrupt << " corrupt, "
        << stats.removed_expired << " expired removed\n";
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace emoreason
