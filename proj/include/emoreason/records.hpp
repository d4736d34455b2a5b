#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace emoreason {

struct InputRecord {
  std::string id;
  std::string text;
  std::optional<std::string> gold_label;

  bool operator==(const InputRecord&) const = default;
};

/// Ordered, duplicate-free, lowercase label inventory. The order is the
/// final tie-break everywhere a label must be chosen deterministically.
class LabelSet {
 public:
  LabelSet() = default;
  // Throws invalid_argument when empty, duplicated or not lowercase.
  explicit LabelSet(std::vector<std::string> labels);

  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool contains(std::string_view label) const;
  std::optional<std::size_t> index_of(std::string_view label) const;

  bool operator==(const LabelSet&) const = default;

 private:
  std::vector<std::string> labels_;
};

struct VotedLabel {
  std::string label;
  int vote_count = 0;
  int total_votes = 0;
  bool tie_broken = false;

  bool operator==(const VotedLabel&) const = default;
};

/// One sampled chain-of-thought completion for (context, sample).
struct RawReasoning {
  std::string record_id;
  int context_index = 0;
  int sample_index = 0;
  std::string text;

  bool operator==(const RawReasoning&) const = default;
};

/// One selected (label, explanation) pair.
struct TopEntry {
  std::string label;
  std::string explanation;
  int support = 0;
  // Context that produced the representative explanation, when there is one.
  std::optional<int> context_index;
  // False when the group had no complete member and the explanation is empty.
  bool complete = true;

  bool operator==(const TopEntry&) const = default;
};

struct AugmentedRecord {
  std::string id;
  std::string text;
  std::optional<std::string> gold_label;
  VotedLabel voted_label;
  std::vector<TopEntry> top;
  std::set<std::string> emotion_words;
  std::vector<std::string> contexts;
  // Every parsed label with its count, before merging; feeds distribution export.
  std::vector<std::pair<std::string, int>> generated_labels;
  std::string run_id;

  bool operator==(const AugmentedRecord&) const = default;
};

}  // namespace emoreason
