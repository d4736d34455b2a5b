// Python bindings for the core operations.
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "emoreason/annotation.hpp"
#include "emoreason/commands.hpp"
#include "emoreason/corpus.hpp"
#include "emoreason/error.hpp"
#include "emoreason/pipeline.hpp"
#include "emoreason/prompts.hpp"
#include "emoreason/selection.hpp"

namespace py = pybind11;
using namespace emoreason;

namespace {

py::object json_to_py(const nlohmann::ordered_json& j) {
  // Leaked on purpose: destroying Python objects after finalization aborts.
  static auto* loads = new py::object(py::module_::import("json").attr("loads"));
  return (*loads)(j.dump());
}

py::dict parsed_to_dict(const ParsedReasoning& p) {
  py::dict d;
  d["label_raw"] = p.label_raw;
  d["label"] = p.label_norm;
  d["explanation"] = p.explanation;
  d["complete"] = p.complete;
  return d;
}

// Config fields given as a dict of strings, resolved like command-line flags.
RunConfig config_from(const std::map<std::string, std::string>& fields, bool use_env) {
  EnvLookup env = use_env ? process_env() : EnvLookup([](const std::string&) -> std::optional<std::string> {
    return std::nullopt;
  });
  return resolve_config(fields, std::nullopt, env);
}

py::tuple run_command(const std::function<int(std::ostream&, std::ostream&)>& fn) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = fn(out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Zero-shot emotion detection and reasoning";

  static auto* error_type = new py::exception<Error>(m, "EmoreasonError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::handle(*error_type)(std::string(to_string(e.code())) + ": " + e.what());
      exc.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error_type->ptr(), exc.ptr());
    }
  });

  m.def(
      "render_context_prompt",
      [](const std::string& input, const std::string& profile) {
        return render_context_prompt(load_profile(profile).prompts.context_template, input).text;
      },
      py::arg("input"), py::arg("profile") = "isear");
  m.def(
      "render_emotion_prompt",
      [](const std::string& context, const std::string& input) { return render_emotion_prompt(context, input).text; },
      py::arg("context"), py::arg("input"));
  m.def(
      "render_baseline_prompt",
      [](const std::string& kind, const std::string& input) {
        return render_baseline_prompt(prompt_kind_from_string(kind), input).text;
      },
      py::arg("kind"), py::arg("input"));

  m.def(
      "parse_output",
      [](const std::string& text) -> py::object {
        auto outcome = parse_output(text, &EmotionLexicon::builtin().aliases());
        if (auto* p = std::get_if<ParsedReasoning>(&outcome)) return parsed_to_dict(*p);
        return py::none();
      },
      py::arg("text"), "Parsed reasoning as a dict, or None when no label can be found.");
  m.def("normalize_label", [](const std::string& raw) { return normalize_label(raw, EmotionLexicon::builtin()); });

  m.def(
      "bertscore",
      [](const std::vector<std::vector<double>>& candidate, const std::vector<std::vector<double>>& reference) {
        auto wrap = [](const std::vector<std::vector<double>>& v) {
          return TokenEmbeddings(std::vector<std::string>(v.size()), v);
        };
        auto s = bertscore(wrap(candidate), wrap(reference));
        return py::make_tuple(s.precision, s.recall, s.f1);
      },
      py::arg("candidate"), py::arg("reference"), "(precision, recall, f1) over token vectors.");

  m.def(
      "select_top_k",
      [](const std::vector<std::tuple<std::string, std::string, bool>>& items,
         const std::vector<std::vector<double>>& similarity, std::size_t k, double tau_group) {
        std::vector<ParsedReasoning> parsed;
        for (std::size_t i = 0; i < items.size(); ++i) {
          ParsedReasoning p;
          p.label_raw = p.label_norm = std::get<0>(items[i]);
          p.explanation = std::get<1>(items[i]);
          p.complete = std::get<2>(items[i]);
          p.source.sample_index = static_cast<int>(i);
          parsed.push_back(std::move(p));
        }
        auto result = select_top_k(parsed, SimilarityMatrix::from_rows(similarity), {.k = k, .tau_group = tau_group});
        py::list groups;
        for (const auto& g : result.groups) groups.append(json_to_py(to_json(g)));
        return groups;
      },
      py::arg("items"), py::arg("similarity"), py::arg("k") = 3, py::arg("tau_group") = 0.9,
      "Ranked label groups for (label, explanation, complete) items.");

  m.def(
      "vote_majority",
      [](const std::vector<std::pair<std::string, double>>& predictions, const std::vector<std::string>& label_order) {
        std::vector<ContextPrediction> preds;
        for (std::size_t i = 0; i < predictions.size(); ++i) {
          preds.push_back({static_cast<int>(i), predictions[i].first, predictions[i].second, {}});
        }
        auto v = vote_majority(preds, label_order);
        py::dict d;
        d["label"] = v.label;
        d["vote_count"] = v.vote_count;
        d["total_votes"] = v.total_votes;
        d["tie_broken"] = v.tie_broken;
        return d;
      },
      py::arg("predictions"), py::arg("label_order") = std::vector<std::string>{});

  m.def(
      "compute_metrics",
      [](const std::map<std::string, std::string>& predictions, const std::map<std::string, std::string>& golds,
         const std::vector<std::string>& labels) {
        return json_to_py(to_json(compute_metrics(predictions, golds, LabelSet(labels))));
      },
      py::arg("predictions"), py::arg("golds"), py::arg("labels"));

  m.def(
      "aggregate_annotations",
      [](const std::vector<std::array<int, 5>>& answers) {
        std::vector<AnnotationRecord> records;
        for (std::size_t i = 0; i < answers.size(); ++i) {
          records.push_back({"s" + std::to_string(i), 1, answers[i], "py", ""});
        }
        return json_to_py(to_json(aggregate_annotations(records)));
      },
      py::arg("answers"), "Summary over lists of five answers (1 yes, 2 no, 3 maybe).");

  m.def(
      "reason",
      [](const std::string& input, const std::string& output, const std::map<std::string, std::string>& config,
         bool use_env) {
        ReasonOptions o;
        o.config = config_from(config, use_env);
        o.input = input;
        o.output = output;
        return run_command([&](std::ostream& out, std::ostream& err) { return cmd_reason(o, out, err); });
      },
      py::arg("input"), py::arg("output"), py::arg("config") = std::map<std::string, std::string>{},
      py::arg("use_env") = true, "Runs the reason command; returns (exit_code, stdout, stderr).");
  m.def(
      "classify",
      [](const std::string& input, const std::string& output, const std::string& mode,
         const std::map<std::string, std::string>& config, bool use_env) {
        ClassifyCmdOptions o;
        o.config = config_from(config, use_env);
        o.input = input;
        o.output = output;
        o.mode = classify_mode_from_string(mode);
        return run_command([&](std::ostream& out, std::ostream& err) { return cmd_classify(o, out, err); });
      },
      py::arg("input"), py::arg("output"), py::arg("mode") = "emogen",
      py::arg("config") = std::map<std::string, std::string>{}, py::arg("use_env") = true);
  m.def(
      "evaluate",
      [](const std::string& predictions, const std::string& dataset, const std::string& profile) {
        EvaluateOptions o;
        o.predictions = predictions;
        o.dataset = dataset;
        o.profile = profile;
        return run_command([&](std::ostream& out, std::ostream& err) { return cmd_evaluate(o, out, err); });
      },
      py::arg("predictions"), py::arg("dataset"), py::arg("profile") = "isear");
}
