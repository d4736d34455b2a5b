#include "emoreason/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>

#include "emoreason/embedding.hpp"
#include "emoreason/error.hpp"
#include "emoreason/remote_backend.hpp"
#include "emoreason/scripted_backend.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Field {
  std::string name;
  // Parses `value` into the config; returns an error message on failure.
  std::function<std::optional<std::string>(RunConfig&, const std::string&)> set;
  std::function<ordered_json(const RunConfig&)> get;
};

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  s = text::trim(s);
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

template <typename T>
Field number_field(std::string name, T RunConfig::*member) {
  return {name,
          [member](RunConfig& c, const std::string& v) -> std::optional<std::string> {
            auto parsed = parse_number<T>(v);
            if (!parsed) return "not a number: '" + v + "'";
            c.*member = *parsed;
            return std::nullopt;
          },
          [member](const RunConfig& c) { return ordered_json(c.*member); }};
}

Field string_field(std::string name, std::string RunConfig::*member) {
  return {name,
          [member](RunConfig& c, const std::string& v) -> std::optional<std::string> {
            c.*member = v;
            return std::nullopt;
          },
          [member](const RunConfig& c) { return ordered_json(c.*member); }};
}

std::optional<bool> parse_bool(std::string_view v) {
  auto s = text::to_lower(text::trim(v));
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  return std::nullopt;
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(string_field("profile", &RunConfig::profile));
    f.push_back(number_field("n_contexts", &RunConfig::n_contexts));
    f.push_back(number_field("q_samples", &RunConfig::q_samples));
    f.push_back(number_field("k_top", &RunConfig::k_top));
    f.push_back(number_field("nucleus_p", &RunConfig::nucleus_p));
    f.push_back(number_field("max_new_tokens", &RunConfig::max_new_tokens));
    f.push_back(number_field("few_shot_k", &RunConfig::few_shot_k));
    f.push_back(number_field("tau_group", &RunConfig::tau_group));
    f.push_back(string_field("backend", &RunConfig::backend));
    f.push_back({"model",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   if (v.empty()) {
                     c.model.reset();
                   } else {
                     c.model = v;
                   }
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return c.model ? ordered_json(*c.model) : ordered_json(nullptr); }});
    f.push_back(string_field("embedder", &RunConfig::embedder));
    f.push_back(number_field("parallelism", &RunConfig::parallelism));
    f.push_back(string_field("cache_dir", &RunConfig::cache_dir));
    f.push_back({"seed",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   if (v.empty()) {
                     c.seed.reset();
                     return std::nullopt;
                   }
                   auto parsed = parse_number<std::uint64_t>(v);
                   if (!parsed) return "not an unsigned integer: '" + v + "'";
                   c.seed = *parsed;
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return c.seed ? ordered_json(*c.seed) : ordered_json(nullptr); }});
    f.push_back({"scoring_unit",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   if (v == "full_string") {
                     c.scoring_unit = ScoringUnit::full_string;
                   } else if (v == "first_token") {
                     c.scoring_unit = ScoringUnit::first_token;
                   } else {
                     return "must be full_string or first_token, got '" + v + "'";
                   }
                   return std::nullopt;
                 },
                 [](const RunConfig& c) {
                   return ordered_json(c.scoring_unit == ScoringUnit::full_string ? "full_string"
                                                                                  : "first_token");
                 }});
    f.push_back({"length_normalize",
                 [](RunConfig& c, const std::string& v) -> std::optional<std::string> {
                   auto b = parse_bool(v);
                   if (!b) return "not a boolean: '" + v + "'";
                   c.length_normalize = *b;
                   return std::nullopt;
                 },
                 [](const RunConfig& c) { return ordered_json(c.length_normalize); }});
    return f;
  }();
  return table;
}

// Config-file values arrive as JSON; convert to the same text form flags use.
std::string json_scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

}  // namespace

const std::vector<std::string>& config_field_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& f : fields()) n.push_back(f.name);
    return n;
  }();
  return names;
}

EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    if (const char* v = std::getenv(name.c_str())) return std::string(v);
    return std::nullopt;
  };
}

std::string env_var_for(const std::string& field) {
  std::string out = "EMOREASON_";
  for (char c : field) out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return out;
}

std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> errors;
  auto check = [&](bool ok, const std::string& field, const std::string& domain) {
    if (!ok) errors.push_back(field + ": must be " + domain);
  };
  check(!c.profile.empty(), "profile", "non-empty");
  check(c.n_contexts >= 1, "n_contexts", ">= 1");
  check(c.q_samples >= 1, "q_samples", ">= 1");
  check(c.k_top >= 1, "k_top", ">= 1");
  check(c.nucleus_p > 0.0 && c.nucleus_p <= 1.0, "nucleus_p", "in (0, 1]");
  check(c.max_new_tokens >= 1, "max_new_tokens", ">= 1");
  check(c.few_shot_k >= 0, "few_shot_k", ">= 0");
  check(c.tau_group > 0.0 && c.tau_group <= 1.0, "tau_group", "in (0, 1]");
  check(c.parallelism >= 1, "parallelism", ">= 1");
  check(!c.cache_dir.empty(), "cache_dir", "non-empty");
  check(c.backend == "remote" || c.backend.starts_with("remote:") ||
            (c.backend.starts_with("scripted:") && c.backend.size() > 9),
        "backend", "scripted:<path>, remote or remote:<url>");
  bool embedder_ok = c.embedder == "backend" || c.embedder == "hash";
  if (!embedder_ok && c.embedder.starts_with("hash:")) {
    auto parts = text::split(c.embedder, ':');
    embedder_ok = parts.size() <= 3;
    if (embedder_ok) {
      auto dim = parse_number<std::size_t>(parts[1]);
      embedder_ok = dim && *dim > 0;
      if (parts.size() == 3) embedder_ok = embedder_ok && parse_number<std::uint64_t>(parts[2]);
    }
  }
  check(embedder_ok, "embedder", "hash, hash:<dim>, hash:<dim>:<seed> or backend");
  return errors;
}

RunConfig resolve_config(const std::map<std::string, std::string>& flags,
                         const std::optional<std::filesystem::path>& config_file, const EnvLookup& env) {
  RunConfig config;
  std::vector<std::string> errors;

  auto apply = [&](const std::string& name, const std::string& value, const std::string& source) {
    auto it = std::find_if(fields().begin(), fields().end(), [&](const Field& f) { return f.name == name; });
    if (it == fields().end()) {
      errors.push_back(name + ": unknown field (from " + source + ")");
      return;
    }
    if (auto err = it->set(config, value)) errors.push_back(name + ": " + *err + " (from " + source + ")");
  };

  if (config_file) {
    json file;
    try {
      file = json::parse(text::read_file(*config_file));
    } catch (const json::exception& e) {
      fail(Errc::config, config_file->string() + ": not valid JSON: " + e.what());
    }
    if (!file.is_object()) fail(Errc::config, config_file->string() + ": must hold a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (value.is_object() || value.is_array()) {
        errors.push_back(key + ": must be a scalar (from " + config_file->string() + ")");
        continue;
      }
      apply(key, json_scalar_text(value), config_file->string());
    }
  }
  for (const auto& name : config_field_names()) {
    if (auto v = env(env_var_for(name))) apply(name, *v, env_var_for(name));
  }
  for (const auto& [name, value] : flags) apply(name, value, "--" + name);

  if (errors.empty()) {
    for (auto& e : validate(config)) errors.push_back(std::move(e));
  }
  if (!errors.empty()) fail(Errc::config, "invalid configuration:\n  " + text::join(errors, "\n  "));
  return config;
}

ordered_json to_json(const RunConfig& config) {
  ordered_json j;
  for (const auto& f : fields()) j[f.name] = f.get(config);
  return j;
}

PipelineConfig pipeline_config(const RunConfig& c, const std::string& run_id) {
  PipelineConfig p;
  p.context_params.nucleus_p = c.nucleus_p;
  p.context_params.max_new_tokens = c.max_new_tokens;
  p.context_params.num_samples = c.n_contexts;
  p.context_params.seed = c.seed;
  p.reasoning_params = p.context_params;
  p.reasoning_params.num_samples = c.q_samples;
  p.classify.unit = c.scoring_unit;
  p.classify.length_normalize = c.length_normalize;
  p.selection.k = static_cast<std::size_t>(c.k_top);
  p.selection.tau_group = c.tau_group;
  p.context_parallelism = static_cast<std::size_t>(c.parallelism);
  p.run_id = run_id;
  return p;
}

std::shared_ptr<Backend> make_backend(const RunConfig& c, const EnvLookup& env) {
  if (c.backend.starts_with("scripted:")) return ScriptedBackend::from_file(c.backend.substr(9));
  RemoteBackendOptions options;
  if (c.backend.starts_with("remote:")) {
    options.base_url = c.backend.substr(7);
  } else if (auto url = env("EMOREASON_BACKEND_URL")) {
    options.base_url = *url;
  } else {
    fail(Errc::config, "backend 'remote' needs a URL: use remote:<url> or set EMOREASON_BACKEND_URL");
  }
  options.api_key = env("EMOREASON_API_KEY");
  options.model = c.model;
  return std::make_shared<RemoteBackend>(std::move(options));
}

std::unique_ptr<EmbeddingProvider> make_embedder(const RunConfig& c, Client& client) {
  if (c.embedder == "backend") return std::make_unique<ClientEmbeddingProvider>(client);
  std::size_t dim = 64;
  std::uint64_t seed = 13;
  auto parts = text::split(c.embedder, ':');
  if (parts.size() >= 2) dim = *parse_number<std::size_t>(parts[1]);
  if (parts.size() == 3) seed = *parse_number<std::uint64_t>(parts[2]);
  return std::make_unique<HashProjectionEmbeddingProvider>(dim, seed);
}

}  // namespace emoreason
