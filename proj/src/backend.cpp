#include "emoreason/backend.hpp"

#include <cmath>

#include "emoreason/error.hpp"
#include "emoreason/hashing.hpp"
#include "emoreason/json_util.hpp"

namespace emoreason {

using nlohmann::json;

void SamplingParams::validate() const {
  if (!(nucleus_p > 0.0 && nucleus_p <= 1.0)) {
    fail(Errc::invalid_argument, "nucleus_p must be in (0, 1], got " + std::to_string(nucleus_p));
  }
  if (max_new_tokens < 1) {
    fail(Errc::invalid_argument, "max_new_tokens must be >= 1, got " + std::to_string(max_new_tokens));
  }
  if (num_samples < 1) {
    fail(Errc::invalid_argument, "num_samples must be >= 1, got " + std::to_string(num_samples));
  }
  if (temperature && !(*temperature > 0.0)) {
    fail(Errc::invalid_argument, "temperature must be > 0");
  }
}

std::string_view to_string(FinishReason reason) {
  switch (reason) {
    case FinishReason::length: return "length";
    case FinishReason::stop: return "stop";
    case FinishReason::error: return "error";
  }
  return "error";
}

FinishReason finish_reason_from_string(std::string_view s) {
  if (s == "length") return FinishReason::length;
  if (s == "stop" || s == "eos" || s == "stop_sequence") return FinishReason::stop;
  return FinishReason::error;
}

std::string_view to_string(ScoringUnit unit) {
  return unit == ScoringUnit::first_token ? "first_token" : "full_string";
}

ScoringUnit scoring_unit_from_string(std::string_view s) {
  if (s == "full_string") return ScoringUnit::full_string;
  if (s == "first_token") return ScoringUnit::first_token;
  fail(Errc::invalid_argument, "unknown scoring unit '" + std::string(s) + "'");
}

TokenEmbeddings::TokenEmbeddings(std::vector<std::string> tokens,
                                 std::vector<std::vector<double>> vectors)
    : tokens_(std::move(tokens)), vectors_(std::move(vectors)) {
  if (tokens_.size() != vectors_.size()) {
    fail(Errc::invalid_argument, "token/vector count mismatch");
  }
  for (auto& v : vectors_) {
    if (v.size() != vectors_.front().size() || v.empty()) {
      fail(Errc::invalid_argument, "embedding vectors must share one non-zero dimension");
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      fail(Errc::invalid_argument, "embedding vector has zero or non-finite norm");
    }
    for (double& x : v) x /= norm;
  }
}

std::string_view to_string(RequestKind kind) {
  switch (kind) {
    case RequestKind::generate: return "generate";
    case RequestKind::score: return "score";
    case RequestKind::embed: return "embed";
  }
  return "generate";
}

std::string CacheKey::digest() const {
  std::string material;
  material.reserve(backend_id.size() + canonical_request.size() + 16);
  material.append(backend_id).push_back('\n');
  material.append(to_string(kind)).push_back('\n');
  material.append(canonical_request);
  return sha256_hex(material);
}

json to_json(const SamplingParams& params) {
  // nlohmann::json objects keep keys sorted and print doubles in shortest
  // round-trip form, which gives the canonical byte layout.
  json j = {
      {"nucleus_p", params.nucleus_p},
      {"max_new_tokens", params.max_new_tokens},
      {"num_samples", params.num_samples},
      {"greedy", params.greedy},
  };
  j["seed"] = params.seed ? json(*params.seed) : json(nullptr);
  j["temperature"] = params.temperature ? json(*params.temperature) : json(nullptr);
  return j;
}

CacheKey make_generate_key(std::string_view backend_id, std::string_view prompt,
                           const SamplingParams& params) {
  json req = {{"prompt", prompt}, {"params", to_json(params)}};
  return {std::string(backend_id), RequestKind::generate, dump_line(req)};
}

CacheKey make_score_key(std::string_view backend_id, std::string_view prompt,
                        std::span<const std::string> candidates, ScoringUnit unit) {
  json req = {{"prompt", prompt},
              {"candidates", json(std::vector<std::string>(candidates.begin(), candidates.end()))},
              {"unit", to_string(unit)}};
  return {std::string(backend_id), RequestKind::score, dump_line(req)};
}

CacheKey make_embed_key(std::string_view backend_id, std::string_view text) {
  json req = {{"text", text}};
  return {std::string(backend_id), RequestKind::embed, dump_line(req)};
}

json to_json(const std::vector<GenerationResult>& results) {
  json arr = json::array();
  for (const auto& r : results) {
    arr.push_back({{"text", r.text},
                   {"finish_reason", to_string(r.finish_reason)},
                   {"sample_index", r.sample_index}});
  }
  return arr;
}

json to_json(const std::vector<ContinuationScore>& scores) {
  json arr = json::array();
  for (const auto& s : scores) {
    arr.push_back({{"candidate", s.candidate},
                   {"log_prob_sum", s.log_prob_sum},
                   {"token_count", s.token_count}});
  }
  return arr;
}

json to_json(const TokenEmbeddings& embeddings) {
  return {{"tokens", embeddings.tokens()}, {"vectors", embeddings.vectors()}};
}

std::vector<GenerationResult> generation_results_from_json(const json& j) {
  std::vector<GenerationResult> out;
  for (const auto& item : j) {
    out.push_back({item.at("text").get<std::string>(),
                   finish_reason_from_string(item.at("finish_reason").get<std::string>()),
                   item.at("sample_index").get<int>()});
  }
  return out;
}

std::vector<ContinuationScore> continuation_scores_from_json(const json& j) {
  std::vector<ContinuationScore> out;
  for (const auto& item : j) {
    out.push_back({item.at("candidate").get<std::string>(), item.at("log_prob_sum").get<double>(),
                   item.at("token_count").get<int>()});
  }
  return out;
}

TokenEmbeddings token_embeddings_from_json(const json& j) {
  return TokenEmbeddings(j.at("tokens").get<std::vector<std::string>>(),
                         j.at("vectors").get<std::vector<std::vector<double>>>());
}

}  // namespace emoreason
