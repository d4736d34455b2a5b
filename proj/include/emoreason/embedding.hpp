#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "emoreason/backend.hpp"

namespace emoreason {

/// Fixed token -> vector table. Unknown tokens are an error unless a
/// fallback provider is supplied.
class TableEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit TableEmbeddingProvider(std::map<std::string, std::vector<double>> table,
                                  EmbeddingProvider* fallback = nullptr);

  std::string id() const override { return "table"; }
  TokenEmbeddings embed_tokens(std::string_view text) override;

 private:
  std::map<std::string, std::vector<double>> table_;
  EmbeddingProvider* fallback_;
};

/// Offline provider: each token maps to the sum of seeded pseudo-random
/// vectors for the word itself and its boundary-marked character trigrams,
/// so inflections ("sad", "sadness") land near each other. Deterministic
/// for a given (dim, seed).
class HashProjectionEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashProjectionEmbeddingProvider(std::size_t dim = 64, std::uint64_t seed = 13);

  std::string id() const override;
  TokenEmbeddings embed_tokens(std::string_view text) override;

  std::vector<double> token_vector(std::string_view token) const;

 private:
  void accumulate(std::string_view feature, double weight, std::vector<double>& out) const;

  std::size_t dim_;
  std::uint64_t seed_;
};

}  // namespace emoreason
