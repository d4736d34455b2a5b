#include "emoreason/remote_backend.hpp"

#include <cmath>
#include <limits>

#include "httplib.h"

#include "emoreason/error.hpp"
#include "emoreason/json_util.hpp"

namespace emoreason {

using nlohmann::json;

struct RemoteBackend::Endpoint {
  std::string scheme_host_port;
  std::string path_prefix;
};

RemoteBackend::~RemoteBackend() = default;

RemoteBackend::RemoteBackend(RemoteBackendOptions options)
    : options_(std::move(options)), endpoint_(std::make_unique<Endpoint>()) {
  const auto& url = options_.base_url;
  auto scheme_end = url.find("://");
  if (url.empty() || scheme_end == std::string::npos) {
    fail(Errc::invalid_argument, "remote backend URL must look like http://host:port, got '" + url + "'");
  }
  auto path_start = url.find('/', scheme_end + 3);
  endpoint_->scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    endpoint_->path_prefix = url.substr(path_start);
    while (!endpoint_->path_prefix.empty() && endpoint_->path_prefix.back() == '/') {
      endpoint_->path_prefix.pop_back();
    }
  }
}

std::string RemoteBackend::id() const {
  return "remote:" + options_.base_url + (options_.model ? "#" + *options_.model : "");
}

BackendCapabilities RemoteBackend::capabilities() const { return {true, true, true, true}; }

json RemoteBackend::post(const std::string& path, const json& body) const {
  httplib::Client cli(endpoint_->scheme_host_port);
  cli.set_connection_timeout(options_.timeout);
  cli.set_read_timeout(options_.timeout);
  cli.set_write_timeout(options_.timeout);
  httplib::Headers headers;
  if (options_.api_key) headers.emplace("Authorization", "Bearer " + *options_.api_key);

  auto res = cli.Post(endpoint_->path_prefix + path, headers, dump_line(body), "application/json");
  if (!res) {
    fail(Errc::backend_unreachable,
         "backend " + options_.base_url + " unreachable: " + httplib::to_string(res.error()));
  }
  const int status = res->status;
  if (status == 408 || status == 429 || status >= 500) {
    fail(Errc::backend_unreachable, "backend " + options_.base_url + " returned HTTP " +
                                        std::to_string(status) + ": " + res->body.substr(0, 200));
  }
  if (status == 404 && path == options_.embeddings_path) {
    fail(Errc::provider_unavailable, "backend " + options_.base_url + " has no embeddings endpoint");
  }
  if (status != 200) {
    fail(Errc::backend_rejected, "backend " + options_.base_url + " rejected request with HTTP " +
                                     std::to_string(status) + ": " + res->body.substr(0, 200));
  }
  json parsed = json::parse(res->body, nullptr, false);
  if (parsed.is_discarded()) {
    fail(Errc::backend_rejected, "backend " + options_.base_url + " returned a non-JSON body");
  }
  return parsed;
}

json RemoteBackend::completion_request(std::string_view prompt, const SamplingParams& params) const {
  json body = {
      {"prompt", prompt},
      {"max_tokens", params.max_new_tokens},
      {"top_p", params.greedy ? 1.0 : params.nucleus_p},
      {"n", params.num_samples},
      {"temperature", params.greedy ? 0.0 : params.temperature.value_or(1.0)},
  };
  if (params.seed) body["seed"] = *params.seed;
  if (options_.model) body["model"] = *options_.model;
  return body;
}

json RemoteBackend::echo_request(std::string_view full_text) const {
  json body = {{"prompt", full_text}, {"max_tokens", 0},  {"n", 1},
               {"temperature", 0.0},  {"logprobs", 0},    {"echo", true}};
  if (options_.model) body["model"] = *options_.model;
  return body;
}

std::vector<GenerationResult> RemoteBackend::generate(std::string_view prompt,
                                                      const SamplingParams& params) {
  json response = post(options_.completions_path, completion_request(prompt, params));
  std::vector<GenerationResult> out;
  try {
    const auto& choices = response.at("choices");
    for (std::size_t i = 0; i < choices.size(); ++i) {
      const auto& c = choices[i];
      std::string reason = c.contains("finish_reason") && c["finish_reason"].is_string()
                               ? c["finish_reason"].get<std::string>()
                               : "stop";
      out.push_back({c.at("text").get<std::string>(), finish_reason_from_string(reason),
                     static_cast<int>(i)});
    }
  } catch (const json::exception& e) {
    fail(Errc::backend_rejected, std::string("malformed completion response: ") + e.what());
  }
  return out;
}

namespace {

struct EchoTokens {
  std::vector<double> logprobs;  // NaN where the server returned null
  std::vector<long> offsets;     // empty when the server omits text_offset
};

EchoTokens parse_echo(const json& response) {
  EchoTokens out;
  const auto& lp = response.at("choices").at(0).at("logprobs");
  for (const auto& v : lp.at("token_logprobs")) {
    out.logprobs.push_back(v.is_number() ? v.get<double>() : std::numeric_limits<double>::quiet_NaN());
  }
  if (lp.contains("text_offset") && lp["text_offset"].is_array()) {
    out.offsets = lp["text_offset"].get<std::vector<long>>();
  }
  return out;
}

}  // namespace

std::vector<ContinuationScore> RemoteBackend::score_continuations(
    std::string_view prompt, std::span<const std::string> candidates, ScoringUnit unit) {
  std::vector<ContinuationScore> out;
  std::optional<std::size_t> prompt_tokens;
  try {
    for (const auto& cand : candidates) {
      std::string full = std::string(prompt) + options_.continuation_separator + cand;
      auto echo = parse_echo(post(options_.completions_path, echo_request(full)));
      std::size_t first = 0;
      if (echo.offsets.size() == echo.logprobs.size() && !echo.offsets.empty()) {
        while (first < echo.offsets.size() &&
               echo.offsets[first] < static_cast<long>(prompt.size())) {
          ++first;
        }
      } else {
        if (!prompt_tokens) {
          prompt_tokens = parse_echo(post(options_.completions_path, echo_request(prompt))).logprobs.size();
        }
        first = *prompt_tokens;
      }
      if (first >= echo.logprobs.size()) {
        fail(Errc::backend_rejected, "echo scoring returned no tokens for candidate '" + cand + "'");
      }
      std::size_t last = unit == ScoringUnit::first_token ? first + 1 : echo.logprobs.size();
      double sum = 0.0;
      for (std::size_t i = first; i < last; ++i) {
        if (!std::isnan(echo.logprobs[i])) sum += echo.logprobs[i];
      }
      out.push_back({cand, sum, static_cast<int>(last - first)});
    }
  } catch (const json::exception& e) {
    fail(Errc::backend_rejected, std::string("malformed echo-scoring response: ") + e.what());
  }
  return out;
}

TokenEmbeddings RemoteBackend::embed_tokens(std::string_view text) {
  json body = {{"input", text}};
  if (options_.model) body["model"] = *options_.model;
  json response = post(options_.embeddings_path, body);
  try {
    return token_embeddings_from_json(response);
  } catch (const json::exception& e) {
    fail(Errc::backend_rejected, std::string("malformed embeddings response: ") + e.what());
  }
}

}  // namespace emoreason
