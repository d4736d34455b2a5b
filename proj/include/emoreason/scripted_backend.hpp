#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "emoreason/backend.hpp"
#include "emoreason/embedding.hpp"

namespace emoreason {

/// Deterministic backend driven by three scripts keyed by exact prompt text:
///
///   generate  queue (consumed in order) or pool (stateless seeded pick per
///             sample index); "*" is the fallback entry
///   score     label -> log-probability table; the "*" table may add a
///             seeded per-(prompt, candidate) jitter
///   embed     token -> vector table with an optional hash-projection fallback
///
/// Rules match any prompt containing a substring and are tried in order
/// after the exact entries and before "*".
///
/// Queues make results depend on call order, so a backend holding any queue
/// reports thread_safe = false.
class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(std::string id = "scripted", std::uint64_t seed = 0);

  // Script file layout is documented in docs/scripted-backend.md.
  static std::shared_ptr<ScriptedBackend> from_json(const nlohmann::json& script);
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  void queue_generations(const std::string& prompt, std::vector<std::string> texts);
  void set_generation_pool(const std::string& prompt, std::vector<std::string> texts);
  void set_scores(const std::string& prompt, std::map<std::string, double> table);
  void set_default_scores(std::map<std::string, double> table, double jitter = 0.0,
                          std::optional<double> missing = std::nullopt);
  void add_generation_rule(std::string needle, std::vector<std::string> pool);
  void add_score_rule(std::string needle, std::map<std::string, double> table, double jitter = 0.0,
                      std::optional<double> missing = std::nullopt);
  void set_token_counts(std::map<std::string, int> counts);
  void set_embedding(const std::string& token, std::vector<double> vector);
  void set_embedding_fallback(std::size_t dim, std::uint64_t seed);
  void disable_scoring() { can_score_ = false; }

  std::string id() const override { return id_; }
  BackendCapabilities capabilities() const override;

  std::vector<GenerationResult> generate(std::string_view prompt,
                                         const SamplingParams& params) override;
  std::vector<ContinuationScore> score_continuations(std::string_view prompt,
                                                     std::span<const std::string> candidates,
                                                     ScoringUnit unit) override;
  TokenEmbeddings embed_tokens(std::string_view text) override;

  std::size_t call_count() const { return calls_.load(); }

 private:
  struct DefaultScores {
    std::map<std::string, double> table;
    double jitter = 0.0;
    std::optional<double> missing;
  };

  struct GenerationRule {
    std::string needle;
    std::vector<std::string> pool;
  };
  struct ScoreRule {
    std::string needle;
    DefaultScores scores;
  };

  int token_count(const std::string& candidate) const;
  double table_score(const DefaultScores& scores, std::string_view prompt, const std::string& cand) const;

  std::string id_;
  std::uint64_t seed_;
  bool can_score_ = true;
  mutable std::mutex mutex_;
  std::map<std::string, std::deque<std::string>, std::less<>> queues_;
  std::map<std::string, std::vector<std::string>, std::less<>> pools_;
  std::map<std::string, std::map<std::string, double>, std::less<>> scores_;
  std::optional<DefaultScores> default_scores_;
  std::vector<GenerationRule> generation_rules_;
  std::vector<ScoreRule> score_rules_;
  std::map<std::string, int> token_counts_;
  std::map<std::string, std::vector<double>> embed_table_;
  std::unique_ptr<HashProjectionEmbeddingProvider> embed_fallback_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace emoreason
