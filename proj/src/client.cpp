#include "emoreason/client.hpp"

#include <set>
#include <thread>

#include "emoreason/error.hpp"
#include "emoreason/json_util.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

using nlohmann::json;

Client::Client(std::shared_ptr<Backend> backend, std::shared_ptr<ResponseCache> cache,
               RetryPolicy retry)
    : backend_(std::move(backend)), cache_(std::move(cache)), retry_(std::move(retry)) {
  if (!backend_) fail(Errc::invalid_argument, "client requires a backend");
  if (retry_.max_attempts < 1) retry_.max_attempts = 1;
  if (!retry_.sleep) {
    retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

template <typename Fn>
std::string Client::fetch(const CacheKey& key, Fn&& call) {
  if (cache_) {
    if (auto hit = cache_->lookup(key)) {
      ++cache_hits_;
      return *std::move(hit);
    }
  }
  ++backend_requests_;
  auto delay = retry_.initial_delay;
  for (int attempt = 1;; ++attempt) {
    try {
      std::string bytes = dump_line(call());
      if (cache_) cache_->store(key, bytes);
      return bytes;
    } catch (const Error& e) {
      if (!e.transient() || attempt >= retry_.max_attempts) throw;
    }
    retry_.sleep(delay);
    delay = std::chrono::milliseconds(
        static_cast<long long>(static_cast<double>(delay.count()) * retry_.multiplier));
  }
}

std::vector<GenerationResult> Client::generate(std::string_view prompt,
                                               const SamplingParams& params) {
  if (prompt.empty()) fail(Errc::invalid_argument, "generate: prompt is empty");
  params.validate();
  if (!backend_->capabilities().can_generate) {
    fail(Errc::capability_unsupported, "backend '" + backend_->id() + "' cannot generate");
  }
  auto key = make_generate_key(backend_->id(), prompt, params);
  auto bytes = fetch(key, [&] {
    auto results = backend_->generate(prompt, params);
    if (results.size() != static_cast<std::size_t>(params.num_samples)) {
      fail(Errc::backend_rejected, "backend '" + backend_->id() + "' returned " +
                                       std::to_string(results.size()) + " samples, expected " +
                                       std::to_string(params.num_samples));
    }
    for (std::size_t i = 0; i < results.size(); ++i) results[i].sample_index = static_cast<int>(i);
    return to_json(results);
  });
  return generation_results_from_json(json::parse(bytes));
}

std::vector<ContinuationScore> Client::score_continuations(std::string_view prompt,
                                                           std::span<const std::string> candidates,
                                                           ScoringUnit unit) {
  if (candidates.empty()) fail(Errc::invalid_argument, "score_continuations: no candidates");
  std::set<std::string_view> seen;
  for (const auto& c : candidates) {
    auto t = text::trim(c);
    if (t.empty()) fail(Errc::invalid_argument, "score_continuations: empty candidate");
    if (!seen.insert(t).second) {
      fail(Errc::invalid_argument, "score_continuations: duplicate candidate '" + std::string(t) + "'");
    }
  }
  if (!backend_->capabilities().can_score) {
    fail(Errc::capability_unsupported,
         "backend '" + backend_->id() + "' does not support continuation scoring");
  }
  auto key = make_score_key(backend_->id(), prompt, candidates, unit);
  auto bytes = fetch(key, [&] {
    auto scores = backend_->score_continuations(prompt, candidates, unit);
    if (scores.size() != candidates.size()) {
      fail(Errc::backend_rejected, "backend '" + backend_->id() + "' returned a short score list");
    }
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].candidate != candidates[i]) {
        fail(Errc::backend_rejected, "backend '" + backend_->id() + "' reordered candidates");
      }
    }
    return to_json(scores);
  });
  return continuation_scores_from_json(json::parse(bytes));
}

TokenEmbeddings Client::embed_tokens(std::string_view text) {
  if (text::trim(text).empty()) fail(Errc::invalid_argument, "embed_tokens: text is empty");
  if (!backend_->capabilities().can_embed) {
    fail(Errc::provider_unavailable, "backend '" + backend_->id() + "' has no embedding provider");
  }
  auto key = make_embed_key(backend_->id(), text);
  auto bytes = fetch(key, [&] { return to_json(backend_->embed_tokens(text)); });
  return token_embeddings_from_json(json::parse(bytes));
}

}  // namespace emoreason
