#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace emoreason {

/// Decoding controls for one generation request. Defaults follow the
/// reference setup: nucleus p = 0.9 and at most 60 new tokens.
struct SamplingParams {
  double nucleus_p = 0.9;
  int max_new_tokens = 60;
  int num_samples = 1;
  std::optional<std::uint64_t> seed;
  std::optional<double> temperature;
  // Greedy decoding (temperature 0 on the wire); used by the baselines.
  bool greedy = false;

  // Throws Error(invalid_argument) naming the offending field.
  void validate() const;
};

enum class FinishReason { length, stop, error };

std::string_view to_string(FinishReason reason);
FinishReason finish_reason_from_string(std::string_view s);

struct GenerationResult {
  std::string text;
  FinishReason finish_reason = FinishReason::stop;
  int sample_index = 0;

  bool operator==(const GenerationResult&) const = default;
};

struct ContinuationScore {
  std::string candidate;
  double log_prob_sum = 0.0;  // sum of per-token log-probabilities, <= 0
  int token_count = 1;

  bool operator==(const ContinuationScore&) const = default;
};

/// How much of a label verbalization contributes to its score.
enum class ScoringUnit { full_string, first_token };

std::string_view to_string(ScoringUnit unit);
ScoringUnit scoring_unit_from_string(std::string_view s);

/// Per-token vectors, normalized to unit Euclidean length on construction.
class TokenEmbeddings {
 public:
  TokenEmbeddings() = default;
  // Throws invalid_argument on size mismatch, ragged rows or zero vectors.
  TokenEmbeddings(std::vector<std::string> tokens, std::vector<std::vector<double>> vectors);

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::vector<double>>& vectors() const { return vectors_; }
  std::size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }
  std::size_t dim() const { return vectors_.empty() ? 0 : vectors_.front().size(); }

  bool operator==(const TokenEmbeddings&) const = default;

 private:
  std::vector<std::string> tokens_;
  std::vector<std::vector<double>> vectors_;
};

enum class RequestKind { generate, score, embed };

std::string_view to_string(RequestKind kind);

/// Content address of a backend request. `canonical_request` is the
/// sorted-key JSON serialization of prompt and parameters, so semantically
/// identical requests produce byte-identical keys.
struct CacheKey {
  std::string backend_id;
  RequestKind kind = RequestKind::generate;
  std::string canonical_request;

  std::string digest() const;  // lowercase hex sha256
};

CacheKey make_generate_key(std::string_view backend_id, std::string_view prompt,
                           const SamplingParams& params);
CacheKey make_score_key(std::string_view backend_id, std::string_view prompt,
                        std::span<const std::string> candidates, ScoringUnit unit);
CacheKey make_embed_key(std::string_view backend_id, std::string_view text);

struct BackendCapabilities {
  bool can_generate = true;
  bool can_score = true;
  bool can_embed = true;
  // False when the implementation must only be driven from one thread.
  bool thread_safe = true;
};

/// A text-generation service. Implementations throw emoreason::Error with
/// backend_unreachable for transient transport failures and backend_rejected
/// for permanent ones.
class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string id() const = 0;
  virtual BackendCapabilities capabilities() const = 0;

  virtual std::vector<GenerationResult> generate(std::string_view prompt,
                                                 const SamplingParams& params) = 0;
  virtual std::vector<ContinuationScore> score_continuations(
      std::string_view prompt, std::span<const std::string> candidates, ScoringUnit unit) = 0;
  virtual TokenEmbeddings embed_tokens(std::string_view text) = 0;
};

/// Anything that can turn text into token embeddings.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string id() const = 0;
  virtual TokenEmbeddings embed_tokens(std::string_view text) = 0;
};

// Wire encodings shared by the cache and the Python bindings.
nlohmann::json to_json(const SamplingParams& params);
nlohmann::json to_json(const std::vector<GenerationResult>& results);
nlohmann::json to_json(const std::vector<ContinuationScore>& scores);
nlohmann::json to_json(const TokenEmbeddings& embeddings);
std::vector<GenerationResult> generation_results_from_json(const nlohmann::json& j);
std::vector<ContinuationScore> continuation_scores_from_json(const nlohmann::json& j);
TokenEmbeddings token_embeddings_from_json(const nlohmann::json& j);

}  // namespace emoreason
