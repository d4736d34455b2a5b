// emoreason command-line tool.
#include <algorithm>
#include <csignal>
#include <iostream>
#include <map>
#include <pthread.h>
#include <thread>

#include "CLI11.hpp"

#include "emoreason/annotation.hpp"
#include "emoreason/commands.hpp"
#include "emoreason/error.hpp"
#include "emoreason/server.hpp"

namespace {

using namespace emoreason;

std::string kebab(std::string s) {
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

struct ConfigFlags {
  std::map<std::string, std::string> values;
  std::string config_file;
};

// Every RunConfig field becomes a flag; only flags actually given override
// the lower layers.
void add_config_flags(CLI::App* cmd, ConfigFlags& flags) {
  cmd->add_option("--config", flags.config_file, "JSON config file (see docs/configuration.md)");
  for (const auto& name : config_field_names()) {
    cmd->add_option_function<std::string>(
        "--" + kebab(name), [&flags, name](const std::string& v) { flags.values[name] = v; },
        "overrides " + env_var_for(name) + " and the config file");
  }
}

std::optional<RunConfig> resolve(const ConfigFlags& flags) {
  try {
    std::optional<std::filesystem::path> file;
    if (!flags.config_file.empty()) file = flags.config_file;
    return resolve_config(flags.values, file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return std::nullopt;
  }
}

std::optional<InputFormat> parse_format(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return input_format_from_string(s);
}

std::pair<std::string, int> split_bind(const std::string& bind) {
  auto colon = bind.rfind(':');
  if (colon == std::string::npos) fail(Errc::invalid_argument, "--bind must be host:port");
  return {bind.substr(0, colon), std::stoi(bind.substr(colon + 1))};
}

int serve(const std::string& store_dir, const std::string& dataset, const std::string& bind,
          const std::string& ui_dir, const TaskOptions& task_options) {
  auto records = read_augmented(dataset);
  AnnotationStore store(store_dir);
  AnnotationService service(records, store, task_options);
  std::optional<std::filesystem::path> ui;
  if (!ui_dir.empty()) ui = ui_dir;
  AnnotationServer server(service, ui);
  auto [host, port] = split_bind(bind);

  // Signals are taken by a dedicated thread so stop() never runs inside a handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  int bound = server.bind(host, port);
  std::cout << "serving " << service.tasks().size() << " tasks on http://" << host << ":" << bound
            << " (store " << store_dir << ")" << std::endl;
  std::jthread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.listen();
  std::cout << "stopped; store flushed (" << store.event_count() << " events)" << std::endl;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero-shot emotion detection and reasoning over text corpora"};
  app.require_subcommand(1);
  int status = kExitOk;

  // reason
  auto* reason = app.add_subcommand("reason", "Generate contexts, labels and top-k explanations");
  ConfigFlags reason_flags;
  ReasonOptions reason_opts;
  std::string reason_report, reason_errors, reason_audit, reason_format;
  std::size_t reason_limit = 0;
  reason->add_option("-i,--input", reason_opts.input, "dataset file")->required();
  reason->add_option("-o,--output", reason_opts.output, "augmented JSONL output")->required();
  reason->add_option("--report", reason_report, "run report path (default <output>.report.jsonl)");
  reason->add_option("--errors", reason_errors, "rejected rows (default <output>.errors.jsonl)");
  reason->add_option("--audit-dir", reason_audit, "write per-record intermediate artifacts here");
  reason->add_option("--format", reason_format, "canonical, csv or tsv (default from profile)");
  reason->add_option("--limit", reason_limit, "process only the first N records");
  add_config_flags(reason, reason_flags);

  // classify
  auto* classify = app.add_subcommand("classify", "Predict one label per record");
  ConfigFlags classify_flags;
  ClassifyCmdOptions classify_opts;
  std::string classify_mode = "emogen", classify_errors, classify_format;
  std::size_t classify_limit = 0;
  classify->add_option("-i,--input", classify_opts.input, "dataset file")->required();
  classify->add_option("-o,--output", classify_opts.output, "predictions JSONL output")->required();
  classify->add_option("--mode", classify_mode, "emogen, baseline_standard or baseline_cot")
      ->check(CLI::IsMember({"emogen", "baseline_standard", "baseline_cot"}));
  classify->add_option("--errors", classify_errors, "rejected rows (default <output>.errors.jsonl)");
  classify->add_option("--format", classify_format, "canonical, csv or tsv");
  classify->add_option("--limit", classify_limit, "process only the first N records");
  add_config_flags(classify, classify_flags);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Accuracy and macro-F1 against gold labels");
  EvaluateOptions eval_opts;
  std::string eval_metrics, eval_format;
  evaluate->add_option("-p,--predictions", eval_opts.predictions, "classify output or augmented file")->required();
  evaluate->add_option("-d,--dataset", eval_opts.dataset, "dataset with gold labels")->required();
  evaluate->add_option("--profile", eval_opts.profile, "profile name or file");
  evaluate->add_option("--metrics", eval_metrics, "metrics JSON (default <predictions>.metrics.json)");
  evaluate->add_option("--format", eval_format, "dataset format override");

  // export-dist
  auto* export_dist = app.add_subcommand("export-dist", "Label distribution as a two-column TSV");
  ExportDistOptions dist_opts;
  std::string dist_source = "generated";
  export_dist->add_option("-i,--input", dist_opts.augmented, "augmented file")->required();
  export_dist->add_option("-o,--output", dist_opts.output, "TSV output")->required();
  export_dist->add_option("--source", dist_source, "gold, voted, top, top1, generated or emotion_words")
      ->check(CLI::IsMember({"gold", "voted", "top", "top1", "generated", "emotion_words"}));

  // annotate serve
  auto* annotate = app.add_subcommand("annotate", "Human evaluation");
  annotate->require_subcommand(1);
  auto* serve_cmd = annotate->add_subcommand("serve", "Serve the annotation API and UI");
  std::string store_dir = "annotations", serve_dataset, bind = "127.0.0.1:8080", ui_dir, order = "random";
  std::uint64_t order_seed = 0;
  std::size_t samples = 0;
  serve_cmd->add_option("--store", store_dir, "annotation store directory");
  serve_cmd->add_option("--dataset", serve_dataset, "augmented file to annotate")->required();
  serve_cmd->add_option("--bind", bind, "host:port");
  serve_cmd->add_option("--ui-dir", ui_dir, "static UI bundle served at /");
  serve_cmd->add_option("--order", order, "sequential, random or stratified")
      ->check(CLI::IsMember({"sequential", "random", "stratified"}));
  serve_cmd->add_option("--seed", order_seed, "seed for random and stratified order");
  serve_cmd->add_option("--samples", samples, "annotate only the first N samples in task order");

  // cache gc
  auto* cache = app.add_subcommand("cache", "Response cache maintenance");
  cache->require_subcommand(1);
  auto* gc = cache->add_subcommand("gc", "Remove stale temp files, corrupt and expired entries");
  ConfigFlags gc_flags;
  int max_age = -1;
  bool dry_run = false;
  gc->add_option("--max-age-hours", max_age, "also remove entries older than this");
  gc->add_flag("--dry-run", dry_run, "report without deleting");
  gc->add_option("--config", gc_flags.config_file, "JSON config file");
  gc->add_option_function<std::string>(
      "--cache-dir", [&](const std::string& v) { gc_flags.values["cache_dir"] = v; }, "cache directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*reason) {
      auto config = resolve(reason_flags);
      if (!config) return kExitUsage;
      reason_opts.config = *config;
      if (!reason_report.empty()) reason_opts.report = reason_report;
      if (!reason_errors.empty()) reason_opts.errors = reason_errors;
      if (!reason_audit.empty()) reason_opts.audit_dir = reason_audit;
      reason_opts.format = parse_format(reason_format);
      if (reason_limit) reason_opts.limit = reason_limit;
      status = cmd_reason(reason_opts, std::cout, std::cerr);
    } else if (*classify) {
      auto config = resolve(classify_flags);
      if (!config) return kExitUsage;
      classify_opts.config = *config;
      classify_opts.mode = classify_mode_from_string(classify_mode);
      if (!classify_errors.empty()) classify_opts.errors = classify_errors;
      classify_opts.format = parse_format(classify_format);
      if (classify_limit) classify_opts.limit = classify_limit;
      status = cmd_classify(classify_opts, std::cout, std::cerr);
    } else if (*evaluate) {
      if (!eval_metrics.empty()) eval_opts.metrics_out = eval_metrics;
      eval_opts.format = parse_format(eval_format);
      status = cmd_evaluate(eval_opts, std::cout, std::cerr);
    } else if (*export_dist) {
      dist_opts.source = dist_source_from_string(dist_source);
      status = cmd_export_dist(dist_opts, std::cout, std::cerr);
    } else if (*serve_cmd) {
      TaskOptions task_options;
      task_options.order = task_order_from_string(order);
      task_options.seed = order_seed;
      if (samples) task_options.sample_limit = samples;
      status = serve(store_dir, serve_dataset, bind, ui_dir, task_options);
    } else if (*gc) {
      auto config = resolve(gc_flags);
      if (!config) return kExitUsage;
      CacheGcOptions gc_opts;
      gc_opts.dir = config->cache_dir;
      if (max_age >= 0) gc_opts.max_age_hours = max_age;
      gc_opts.dry_run = dry_run;
      status = cmd_cache_gc(gc_opts, std::cout, std::cerr);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return kExitUsage;
  }
  return status;
}
