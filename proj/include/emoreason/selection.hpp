#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "emoreason/backend.hpp"
#include "emoreason/records.hpp"

namespace emoreason {

/// Emotion vocabulary plus surface-form aliases ("sad -> sadness").
class EmotionLexicon {
 public:
  using AliasMap = std::map<std::string, std::string, std::less<>>;

  EmotionLexicon() = default;
  // Throws invalid_argument if words is empty or an alias target is unknown.
  EmotionLexicon(std::set<std::string, std::less<>> words, AliasMap aliases = {});

  // One word per line; "alias -> canonical" or "alias→canonical" lines; '#'
  // comments and blank lines ignored.
  static EmotionLexicon parse(std::string_view content);
  static EmotionLexicon load(const std::string& path);
  // The lexicon compiled in from resources/emotion_lexicon.txt.
  static const EmotionLexicon& builtin();

  bool contains(std::string_view word) const { return words_.contains(word); }
  // Alias target if `word` is an alias, otherwise the word itself.
  std::string canonical(std::string_view word) const;

  const std::set<std::string, std::less<>>& words() const { return words_; }
  const AliasMap& aliases() const { return aliases_; }

 private:
  std::set<std::string, std::less<>> words_;
  AliasMap aliases_;
};

// Lowercase, strip surrounding punctuation and emphasis markup (**x**, _x_,
// \textbf{x}), collapse inner whitespace, then apply `aliases` if given.
std::string normalize_label(std::string_view raw, const EmotionLexicon::AliasMap* aliases = nullptr);
std::string normalize_label(std::string_view raw, const EmotionLexicon& lexicon);

struct ReasoningSource {
  int context_index = 0;
  int sample_index = 0;

  bool operator==(const ReasoningSource&) const = default;
};

struct ParsedReasoning {
  ReasoningSource source;
  std::string label_raw;
  std::string label_norm;
  std::string explanation;
  bool complete = false;

  bool operator==(const ParsedReasoning&) const = default;
};

struct Malformed {
  ReasoningSource source;
  std::string reason;
};

using ParseOutcome = std::variant<ParsedReasoning, Malformed>;

/// Total: never throws. Looks for the last "final emotion label is <label>"
/// sentence, falling back to "The author feels <label>". The explanation is
/// the text before the final-label sentence.
ParseOutcome parse_output(std::string_view text, const EmotionLexicon::AliasMap* aliases = nullptr,
                          ReasoningSource source = {});
ParseOutcome parse_output(const RawReasoning& raw, const EmotionLexicon::AliasMap* aliases = nullptr);

struct ScoreTriple {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Greedy-matching BERTScore over unit token vectors: recall averages, over
/// reference tokens, the best cosine with any candidate token; precision is
/// the mirror image. No idf weighting, no baseline rescaling.
ScoreTriple bertscore(const TokenEmbeddings& candidate, const TokenEmbeddings& reference);

class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  explicit SimilarityMatrix(std::size_t size);
  // Checks symmetry and unit diagonal (1e-9), clamps entries to [-1, 1].
  static SimilarityMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const { return size_; }
  double at(std::size_t i, std::size_t j) const { return values_[i * size_ + j]; }
  void set_symmetric(std::size_t i, std::size_t j, double v);

 private:
  std::size_t size_ = 0;
  std::vector<double> values_;
};

// Text compared for an item: its explanation, or the raw label when the
// explanation is empty.
std::string_view similarity_text(const ParsedReasoning& item);

/// Pairwise BERTScore F1 between items; each pair computed once and mirrored.
SimilarityMatrix similarity_matrix(std::span<const ParsedReasoning> parsed,
                                   EmbeddingProvider& provider, std::size_t parallelism = 1);

struct LabelGroup {
  std::string label;
  std::vector<std::size_t> member_indices;  // ascending
  int support = 0;
  std::optional<std::size_t> medoid_index;
  double mean_intra_similarity = 1.0;
  // Exact labels folded into this group by soft matching (includes `label`).
  std::vector<std::string> merged_labels;
};

struct SelectionResult {
  std::vector<TopEntry> top;
  std::set<std::string> emotion_words;
  std::size_t discarded_count = 0;
  // Every group in rank order; the first |top| correspond to `top`.
  std::vector<LabelGroup> groups;
};

struct SelectionOptions {
  std::size_t k = 3;
  double tau_group = 0.9;
};

/// Soft-majority selection. Items are grouped by normalized label; label
/// groups whose mean cross-group similarity reaches tau_group are merged
/// (transitively) under the label of their largest member group. Groups rank
/// by support, then mean intra-group similarity, then label. Each emitted
/// explanation is the group medoid among complete members.
SelectionResult select_top_k(std::span<const ParsedReasoning> parsed, const SimilarityMatrix& sim,
                             const SelectionOptions& options, std::size_t discarded_count = 0);

/// Lexicon words present in `texts` (letters-only tokens, lowercased,
/// aliases applied).
std::set<std::string> extract_emotion_words(std::span<const std::string> texts,
                                            const EmotionLexicon& lexicon);

nlohmann::json to_json(const ParsedReasoning& item);
nlohmann::json to_json(const LabelGroup& group);

}  // namespace emoreason
