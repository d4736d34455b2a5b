#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emoreason/backend.hpp"
#include "emoreason/client.hpp"
#include "emoreason/json_util.hpp"
#include "emoreason/pipeline.hpp"

namespace emoreason {

struct RunConfig {
  std::string profile = "isear";
  int n_contexts = 10;
  int q_samples = 10;
  int k_top = 3;
  double nucleus_p = 0.9;
  int max_new_tokens = 60;
  int few_shot_k = 5;
  double tau_group = 0.9;
  // "scripted:<script.json>", "remote" (uses EMOREASON_BACKEND_URL) or "remote:<url>"
  std::string backend = "remote";
  std::optional<std::string> model;
  // "hash", "hash:<dim>", "hash:<dim>:<seed>" or "backend"
  std::string embedder = "hash";
  int parallelism = 1;
  std::string cache_dir = ".emoreason-cache";
  std::optional<std::uint64_t> seed;
  ScoringUnit scoring_unit = ScoringUnit::full_string;
  bool length_normalize = false;

  bool operator==(const RunConfig&) const = default;
};

// Field names as used in config files, flags (--n-contexts) and environment
// variables (EMOREASON_N_CONTEXTS), in declaration order.
const std::vector<std::string>& config_field_names();

// Environment lookup, injectable for tests.
using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
EnvLookup process_env();

std::string env_var_for(const std::string& field);

/// Layers, lowest to highest: defaults, JSON config file, EMOREASON_<FIELD>
/// environment variables, explicit flag values. Every invalid field is
/// reported in one Error(config).
RunConfig resolve_config(const std::map<std::string, std::string>& flags,
                         const std::optional<std::filesystem::path>& config_file,
                         const EnvLookup& env = process_env());

// Domain checks only; returns one message per bad field.
std::vector<std::string> validate(const RunConfig& config);

nlohmann::ordered_json to_json(const RunConfig& config);

PipelineConfig pipeline_config(const RunConfig& config, const std::string& run_id);

std::shared_ptr<Backend> make_backend(const RunConfig& config, const EnvLookup& env = process_env());

// Returns the provider and, for "backend", keeps it bound to `client`.
std::unique_ptr<EmbeddingProvider> make_embedder(const RunConfig& config, Client& client);

}  // namespace emoreason
