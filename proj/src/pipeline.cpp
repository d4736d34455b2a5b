#include "emoreason/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "emoreason/error.hpp"
#include "emoreason/parallel.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

using nlohmann::json;

bool ContextSet::degenerate() const {
  return std::all_of(contexts.begin(), contexts.end(), [](const auto& c) { return c.empty(); });
}

ContextSet generate_contexts(Client& client, const InputRecord& record, const FewShotTemplate& tmpl,
                             const SamplingParams& params) {
  auto prompt = render_context_prompt(tmpl, record.text);
  auto results = client.generate(prompt.text, params);
  ContextSet out;
  out.record_id = record.id;
  out.contexts.reserve(results.size());
  for (const auto& r : results) out.contexts.emplace_back(text::trim(r.text));
  if (out.degenerate()) out.warnings.push_back("degenerate-contexts: every generated context is empty");
  return out;
}

std::pair<std::string, double> argmax_label(const std::map<std::string, double>& table,
                                            const LabelSet& labels) {
  std::optional<std::pair<std::string, double>> best;
  for (const auto& label : labels.labels()) {
    auto it = table.find(label);
    if (it == table.end()) continue;
    if (!best || it->second > best->second) best = {label, it->second};
  }
  if (!best) fail(Errc::invalid_argument, "score table has no label from the label set");
  return *best;
}

Classification classify_per_context(Client& client, const InputRecord& record,
                                    const ContextSet& contexts, const LabelSet& labels,
                                    const ClassifyOptions& options) {
  if (contexts.n() == 0) fail(Errc::invalid_argument, "classify_per_context: no contexts");
  const auto n = contexts.n();
  std::vector<std::optional<ContextPrediction>> slots(n);
  std::vector<std::string> errors(n);

  parallel_for(n, options.parallelism, [&](std::size_t i) {
    const auto& ctx = contexts.contexts[i];
    if (ctx.empty()) {
      errors[i] = "empty-context";
      return;
    }
    try {
      auto prompt = render_emotion_prompt(ctx, record.text, options.qa_template);
      auto scores = client.score_continuations(prompt.text, labels.labels(), options.unit);
      ContextPrediction pred;
      pred.context_index = static_cast<int>(i);
      for (const auto& s : scores) {
        double v = s.log_prob_sum;
        if (options.length_normalize) v /= std::max(1, s.token_count);
        pred.score_table[s.candidate] = v;
      }
      std::tie(pred.label, pred.score) = argmax_label(pred.score_table, labels);
      slots[i] = std::move(pred);
    } catch (const Error& e) {
      errors[i] = std::string(to_string(e.code())) + ": " + e.what();
    }
  });

  Classification out;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) {
      out.predictions.push_back(std::move(*slots[i]));
    } else {
      out.skipped.push_back({static_cast<int>(i), errors[i]});
    }
  }
  return out;
}

VotedLabel vote_majority(std::span<const ContextPrediction> predictions,
                         std::span<const std::string> label_order) {
  if (predictions.empty()) fail(Errc::no_votes, "no per-context predictions to vote over");

  struct Tally {
    int votes = 0;
    double score_sum = 0.0;
  };
  std::map<std::string, Tally> tally;
  for (const auto& p : predictions) {
    auto& t = tally[p.label];
    ++t.votes;
    t.score_sum += p.score;
  }
  int max_votes = 0;
  for (const auto& [label, t] : tally) max_votes = std::max(max_votes, t.votes);

  auto rank = [&](const std::string& label) {
    auto it = std::find(label_order.begin(), label_order.end(), label);
    return static_cast<std::size_t>(it - label_order.begin());
  };

  const std::string* winner = nullptr;
  double winner_mean = 0.0;
  int tied = 0;
  for (const auto& [label, t] : tally) {
    if (t.votes != max_votes) continue;
    ++tied;
    double mean = t.score_sum / t.votes;
    // Map iteration is lexicographic, so equal ranks fall back to label order.
    if (!winner || mean > winner_mean || (mean == winner_mean && rank(label) < rank(*winner))) {
      winner = &label;
      winner_mean = mean;
    }
  }
  return {*winner, max_votes, static_cast<int>(predictions.size()), tied > 1};
}

ReasoningBatch generate_reasonings(Client& client, const InputRecord& record,
                                   const ContextSet& contexts, const SamplingParams& params,
                                   std::string_view qa_template, std::size_t parallelism) {
  params.validate();
  const auto n = contexts.n();
  std::vector<std::vector<RawReasoning>> groups(n);
  std::vector<std::string> errors(n);

  parallel_for(n, parallelism, [&](std::size_t i) {
    const auto& ctx = contexts.contexts[i];
    if (ctx.empty()) {
      errors[i] = "empty-context";
      return;
    }
    try {
      auto prompt = render_emotion_prompt(ctx, record.text, qa_template);
      for (auto& r : client.generate(prompt.text, params)) {
        groups[i].push_back({record.id, static_cast<int>(i), r.sample_index, std::move(r.text)});
      }
    } catch (const Error& e) {
      groups[i].clear();
      errors[i] = std::string(to_string(e.code())) + ": " + e.what();
    }
  });

  ReasoningBatch out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) {
      out.skipped.push_back({static_cast<int>(i), errors[i]});
      continue;
    }
    ++out.effective_contexts;
    for (auto& r : groups[i]) out.reasonings.push_back(std::move(r));
  }
  return out;
}

RecordOutcome run_record(Client& client, EmbeddingProvider& embedder, const InputRecord& record,
                         const RecordProfile& profile, const PipelineConfig& config) {
  RecordOutcome outcome;
  outcome.record_id = record.id;
  auto& audit = outcome.audit;

  using clock = std::chrono::steady_clock;
  auto mark = clock::now();
  auto stage_done = [&](const char* name) {
    auto now = clock::now();
    outcome.stage_ms.emplace_back(name, std::chrono::duration<double, std::milli>(now - mark).count());
    mark = now;
  };

  try {
    audit.contexts = generate_contexts(client, record, profile.prompts.context_template, config.context_params);
    stage_done("contexts");

    ClassifyOptions classify = config.classify;
    classify.qa_template = profile.prompts.emotion_qa;
    classify.parallelism = config.context_parallelism;
    audit.classification = classify_per_context(client, record, audit.contexts, profile.labels, classify);
    if (audit.classification.predictions.empty()) {
      fail(Errc::no_votes, "every context failed classification");
    }
    audit.voted = vote_majority(audit.classification.predictions, profile.labels.labels());
    stage_done("classify");

    audit.reasonings = generate_reasonings(client, record, audit.contexts, config.reasoning_params,
                                           profile.prompts.emotion_qa, config.context_parallelism);
    stage_done("reasonings");

    const auto* aliases = &profile.lexicon.aliases();
    for (const auto& raw : audit.reasonings.reasonings) {
      auto parsed = parse_output(raw, aliases);
      if (auto* ok = std::get_if<ParsedReasoning>(&parsed)) {
        audit.parsed.push_back(std::move(*ok));
      } else {
        audit.malformed.push_back(std::get<Malformed>(std::move(parsed)));
      }
    }
    if (audit.parsed.empty()) {
      fail(Errc::empty_selection, "no well-formed reasoning outputs to select from");
    }
    auto sim = similarity_matrix(audit.parsed, embedder, config.context_parallelism);
    auto selection = select_top_k(audit.parsed, sim, config.selection, audit.malformed.size());
    audit.groups = selection.groups;

    std::vector<std::string> top_texts;
    for (const auto& entry : selection.top) top_texts.push_back(entry.label + ". " + entry.explanation);
    selection.emotion_words = extract_emotion_words(top_texts, profile.lexicon);
    stage_done("selection");

    AugmentedRecord rec;
    rec.id = record.id;
    rec.text = record.text;
    rec.gold_label = record.gold_label;
    rec.voted_label = *audit.voted;
    rec.top = std::move(selection.top);
    rec.emotion_words = std::move(selection.emotion_words);
    rec.contexts = audit.contexts.contexts;
    std::map<std::string, int> counts;
    for (const auto& p : audit.parsed) ++counts[p.label_norm];
    rec.generated_labels.assign(counts.begin(), counts.end());
    rec.run_id = config.run_id;
    outcome.record = std::move(rec);
    outcome.ok = true;
  } catch (const Error& e) {
    outcome.error = std::string(to_string(e.code())) + ": " + e.what();
  } catch (const std::exception& e) {
    outcome.error = std::string("internal: ") + e.what();
  }
  return outcome;
}

json to_json(const ContextPrediction& p) {
  return {{"context_index", p.context_index}, {"label", p.label}, {"score", p.score},
          {"score_table", p.score_table}};
}

json to_json(const RecordAudit& audit) {
  json j;
  j["record_id"] = audit.contexts.record_id;
  j["contexts"] = audit.contexts.contexts;
  j["context_warnings"] = audit.contexts.warnings;
  j["predictions"] = json::array();
  for (const auto& p : audit.classification.predictions) j["predictions"].push_back(to_json(p));
  auto skipped = [](const std::vector<SkippedContext>& list) {
    json arr = json::array();
    for (const auto& s : list) arr.push_back({{"context_index", s.context_index}, {"reason", s.reason}});
    return arr;
  };
  j["classification_skipped"] = skipped(audit.classification.skipped);
  if (audit.voted) {
    j["voted"] = {{"label", audit.voted->label},
                  {"vote_count", audit.voted->vote_count},
                  {"total_votes", audit.voted->total_votes},
                  {"tie_broken", audit.voted->tie_broken}};
  }
  j["reasonings"] = json::array();
  for (const auto& r : audit.reasonings.reasonings) {
    j["reasonings"].push_back(
        {{"context_index", r.context_index}, {"sample_index", r.sample_index}, {"text", r.text}});
  }
  j["reasoning_skipped"] = skipped(audit.reasonings.skipped);
  j["parsed"] = json::array();
  for (const auto& p : audit.parsed) j["parsed"].push_back(to_json(p));
  j["malformed"] = json::array();
  for (const auto& m : audit.malformed) {
    j["malformed"].push_back({{"context_index", m.source.context_index},
                              {"sample_index", m.source.sample_index},
                              {"reason", m.reason}});
  }
  j["groups"] = json::array();
  for (const auto& g : audit.groups) j["groups"].push_back(to_json(g));
  return j;
}

}  // namespace emoreason
