#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emoreason/backend.hpp"
#include "emoreason/client.hpp"
#include "emoreason/prompts.hpp"
#include "emoreason/records.hpp"
#include "emoreason/selection.hpp"

namespace emoreason {

struct ContextSet {
  std::string record_id;
  std::vector<std::string> contexts;  // trimmed; empty strings kept for index alignment
  std::vector<std::string> warnings;

  std::size_t n() const { return contexts.size(); }
  bool degenerate() const;  // every context empty
};

struct ContextPrediction {
  int context_index = 0;
  std::string label;
  double score = 0.0;  // score of the argmax label
  std::map<std::string, double> score_table;
};

struct SkippedContext {
  int context_index = 0;
  std::string reason;
};

struct Classification {
  std::vector<ContextPrediction> predictions;
  std::vector<SkippedContext> skipped;
};

struct ReasoningBatch {
  std::vector<RawReasoning> reasonings;
  std::vector<SkippedContext> skipped;
  std::size_t effective_contexts = 0;
};

struct ClassifyOptions {
  ScoringUnit unit = ScoringUnit::full_string;
  // Divide each label's log-probability by its token count.
  bool length_normalize = false;
  std::string qa_template{kEmotionQaTemplate};
  std::size_t parallelism = 1;
};

ContextSet generate_contexts(Client& client, const InputRecord& record,
                             const FewShotTemplate& tmpl, const SamplingParams& params);

// First label (in LabelSet order) with the maximal score.
std::pair<std::string, double> argmax_label(const std::map<std::string, double>& table,
                                            const LabelSet& labels);

/// Scores every label as a continuation of the emotion prompt built from
/// each non-empty context. Contexts that are empty or fail to score land in
/// `skipped` instead of aborting.
Classification classify_per_context(Client& client, const InputRecord& record,
                                    const ContextSet& contexts, const LabelSet& labels,
                                    const ClassifyOptions& options = {});

/// Majority vote over per-context predictions. A count tie goes to the
/// higher mean score among supporting contexts, then to the earlier label in
/// `label_order` (labels absent from it rank after, lexicographically).
VotedLabel vote_majority(std::span<const ContextPrediction> predictions,
                         std::span<const std::string> label_order = {});

/// params.num_samples completions of the emotion prompt per non-empty
/// context, indexed by (context_index, sample_index).
ReasoningBatch generate_reasonings(Client& client, const InputRecord& record,
                                   const ContextSet& contexts, const SamplingParams& params,
                                   std::string_view qa_template = kEmotionQaTemplate,
                                   std::size_t parallelism = 1);

/// Everything a record run needs from its dataset profile.
struct RecordProfile {
  PromptProfile prompts;
  LabelSet labels;
  EmotionLexicon lexicon;
};

struct PipelineConfig {
  SamplingParams context_params{.num_samples = 10, .seed = {}, .temperature = {}};
  SamplingParams reasoning_params{.num_samples = 10, .seed = {}, .temperature = {}};
  ClassifyOptions classify;
  SelectionOptions selection;
  std::size_t context_parallelism = 1;
  std::string run_id;
};

/// Intermediate artifacts of one record, kept for audit dumps.
struct RecordAudit {
  ContextSet contexts;
  Classification classification;
  std::optional<VotedLabel> voted;
  ReasoningBatch reasonings;
  std::vector<ParsedReasoning> parsed;
  std::vector<Malformed> malformed;
  std::vector<LabelGroup> groups;
};

struct RecordOutcome {
  std::string record_id;
  bool ok = false;
  std::string error;  // "<code>: <message>" when !ok
  std::optional<AugmentedRecord> record;
  RecordAudit audit;
  std::vector<std::pair<std::string, double>> stage_ms;
};

/// contexts -> per-context classification -> vote -> reasonings -> parse ->
/// similarity -> top-k -> emotion words. Hard errors mark the record failed;
/// they never propagate.
RecordOutcome run_record(Client& client, EmbeddingProvider& embedder, const InputRecord& record,
                         const RecordProfile& profile, const PipelineConfig& config);

nlohmann::json to_json(const ContextPrediction& p);
nlohmann::json to_json(const RecordAudit& audit);

}  // namespace emoreason
