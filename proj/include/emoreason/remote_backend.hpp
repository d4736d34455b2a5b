#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>

#include "emoreason/backend.hpp"

namespace emoreason {

struct RemoteBackendOptions {
  std::string base_url;                // e.g. http://127.0.0.1:8000
  std::optional<std::string> api_key;  // sent as "Authorization: Bearer ..."
  std::optional<std::string> model;    // forwarded as "model" when set
  std::string completions_path = "/v1/completions";
  std::string embeddings_path = "/v1/token_embeddings";
  // Joins prompt and candidate for echo scoring.
  std::string continuation_separator = " ";
  std::chrono::seconds timeout{120};
};

/// Client for any server speaking the completion-and-logprobs protocol
/// described in docs/remote-protocol.md (an OpenAI-style legacy completions
/// dialect). Stateless per request, so safe to share across threads.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteBackendOptions options);
  ~RemoteBackend() override;

  std::string id() const override;
  BackendCapabilities capabilities() const override;

  std::vector<GenerationResult> generate(std::string_view prompt,
                                         const SamplingParams& params) override;
  std::vector<ContinuationScore> score_continuations(std::string_view prompt,
                                                     std::span<const std::string> candidates,
                                                     ScoringUnit unit) override;
  TokenEmbeddings embed_tokens(std::string_view text) override;

  // Request body builders, exposed for protocol tests.
  nlohmann::json completion_request(std::string_view prompt, const SamplingParams& params) const;
  nlohmann::json echo_request(std::string_view full_text) const;

 private:
  struct Endpoint;
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  RemoteBackendOptions options_;
  std::unique_ptr<Endpoint> endpoint_;
};

}  // namespace emoreason
