#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "emoreason/backend.hpp"
#include "emoreason/cache.hpp"

namespace emoreason {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_delay{200};
  double multiplier = 2.0;
  // Replaced in tests to avoid real sleeps.
  std::function<void(std::chrono::milliseconds)> sleep;
};

/// Front door to a Backend: validates requests, retries transient failures
/// with exponential backoff, and serves repeated requests from the cache.
///
/// Every response is returned by decoding its canonical bytes, whether it
/// came from the backend or the cache, so cold and warm runs see identical
/// values.
class Client {
 public:
  Client(std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache = nullptr,
         RetryPolicy retry = {});

  std::vector<GenerationResult> generate(std::string_view prompt, const SamplingParams& params);

  // Candidates must be non-empty and distinct after trimming. No length
  // normalization is applied here.
  std::vector<ContinuationScore> score_continuations(std::string_view prompt,
                                                     std::span<const std::string> candidates,
                                                     ScoringUnit unit = ScoringUnit::full_string);

  TokenEmbeddings embed_tokens(std::string_view text);

  Backend& backend() { return *backend_; }
  const std::shared_ptr<ResponseCache>& cache() const { return cache_; }

  // Requests that reached the backend (cache misses, counting retries once).
  std::size_t backend_requests() const { return backend_requests_.load(); }
  std::size_t cache_hits() const { return cache_hits_.load(); }

 private:
  template <typename Fn>
  std::string fetch(const CacheKey& key, Fn&& call);

  std::shared_ptr<Backend> backend_;
  std::shared_ptr<ResponseCache> cache_;
  RetryPolicy retry_;
  std::atomic<std::size_t> backend_requests_{0};
  std::atomic<std::size_t> cache_hits_{0};
};

/// Routes embedding requests through a Client so they are cached.
class ClientEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit ClientEmbeddingProvider(Client& client) : client_(client) {}
  std::string id() const override { return client_.backend().id(); }
  TokenEmbeddings embed_tokens(std::string_view text) override { return client_.embed_tokens(text); }

 private:
  Client& client_;
};

}  // namespace emoreason
