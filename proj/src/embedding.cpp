#include "emoreason/embedding.hpp"

#include "emoreason/error.hpp"
#include "emoreason/hashing.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

TableEmbeddingProvider::TableEmbeddingProvider(std::map<std::string, std::vector<double>> table,
                                               EmbeddingProvider* fallback)
    : table_(std::move(table)), fallback_(fallback) {}

TokenEmbeddings TableEmbeddingProvider::embed_tokens(std::string_view input) {
  if (text::trim(input).empty()) fail(Errc::invalid_argument, "embed_tokens: text is empty");
  auto tokens = text::word_tokens(input);
  if (tokens.empty()) {
    fail(Errc::empty_after_tokenization, "no tokens in '" + std::string(input) + "'");
  }
  std::vector<std::vector<double>> vectors;
  vectors.reserve(tokens.size());
  for (const auto& tok : tokens) {
    if (auto it = table_.find(tok); it != table_.end()) {
      vectors.push_back(it->second);
    } else if (fallback_) {
      auto single = fallback_->embed_tokens(tok);
      vectors.push_back(single.vectors().front());
    } else {
      fail(Errc::provider_unavailable, "token '" + tok + "' missing from embedding table");
    }
  }
  return TokenEmbeddings(std::move(tokens), std::move(vectors));
}

HashProjectionEmbeddingProvider::HashProjectionEmbeddingProvider(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim_ == 0) fail(Errc::invalid_argument, "embedding dimension must be positive");
}

std::string HashProjectionEmbeddingProvider::id() const {
  return "hash-projection:" + std::to_string(dim_) + ":" + std::to_string(seed_);
}

void HashProjectionEmbeddingProvider::accumulate(std::string_view feature, double weight,
                                                 std::vector<double>& out) const {
  std::uint64_t state = fnv1a64(feature, splitmix64(seed_));
  for (std::size_t d = 0; d < dim_; ++d) {
    state = splitmix64(state);
    out[d] += weight * unit_symmetric(state);
  }
}

std::vector<double> HashProjectionEmbeddingProvider::token_vector(std::string_view token) const {
  std::vector<double> v(dim_, 0.0);
  std::string word = "w:" + std::string(token);
  accumulate(word, 2.0, v);
  std::string marked = "<" + std::string(token) + ">";
  for (std::size_t i = 0; i + 3 <= marked.size(); ++i) {
    accumulate(std::string_view(marked).substr(i, 3), 1.0, v);
  }
  return v;
}

TokenEmbeddings HashProjectionEmbeddingProvider::embed_tokens(std::string_view input) {
  if (text::trim(input).empty()) fail(Errc::invalid_argument, "embed_tokens: text is empty");
  auto tokens = text::word_tokens(input);
  if (tokens.empty()) {
    fail(Errc::empty_after_tokenization, "no tokens in '" + std::string(input) + "'");
  }
  std::vector<std::vector<double>> vectors;
  vectors.reserve(tokens.size());
  for (const auto& tok : tokens) vectors.push_back(token_vector(tok));
  return TokenEmbeddings(std::move(tokens), std::move(vectors));
}

}  // namespace emoreason
