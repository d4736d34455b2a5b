#include "emoreason/scripted_backend.hpp"

#include "emoreason/error.hpp"
#include "emoreason/hashing.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

using nlohmann::json;

ScriptedBackend::ScriptedBackend(std::string id, std::uint64_t seed)
    : id_(std::move(id)), seed_(seed) {}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_json(const json& script) {
  try {
    auto backend = std::make_shared<ScriptedBackend>(script.value("id", std::string("scripted")),
                                                     script.value("seed", std::uint64_t{0}));
    auto optional_missing = [](const json& entry) -> std::optional<double> {
      if (entry.contains("missing")) return entry.at("missing").get<double>();
      return std::nullopt;
    };
    if (auto it = script.find("generate"); it != script.end()) {
      for (const auto& [prompt, entry] : it->items()) {
        if (entry.is_array()) {
          backend->queue_generations(prompt, entry.get<std::vector<std::string>>());
        } else if (entry.contains("pool")) {
          backend->set_generation_pool(prompt, entry.at("pool").get<std::vector<std::string>>());
        } else {
          backend->queue_generations(prompt, entry.at("queue").get<std::vector<std::string>>());
        }
      }
    }
    if (auto it = script.find("score"); it != script.end()) {
      for (const auto& [prompt, entry] : it->items()) {
        if (prompt == "*") {
          backend->set_default_scores(entry.at("table").get<std::map<std::string, double>>(),
                                      entry.value("jitter", 0.0), optional_missing(entry));
        } else {
          backend->set_scores(prompt, entry.get<std::map<std::string, double>>());
        }
      }
    }
    if (auto it = script.find("generate_rules"); it != script.end()) {
      for (const auto& rule : *it) {
        backend->add_generation_rule(rule.at("contains").get<std::string>(),
                                     rule.at("pool").get<std::vector<std::string>>());
      }
    }
    if (auto it = script.find("score_rules"); it != script.end()) {
      for (const auto& rule : *it) {
        backend->add_score_rule(rule.at("contains").get<std::string>(),
                                rule.at("table").get<std::map<std::string, double>>(), rule.value("jitter", 0.0),
                                optional_missing(rule));
      }
    }
    if (auto it = script.find("token_counts"); it != script.end()) {
      backend->set_token_counts(it->get<std::map<std::string, int>>());
    }
    if (auto it = script.find("embed"); it != script.end()) {
      if (auto table = it->find("table"); table != it->end()) {
        for (const auto& [tok, vec] : table->items()) {
          backend->set_embedding(tok, vec.get<std::vector<double>>());
        }
      }
      if (it->value("fallback", std::string()) == "hash") {
        backend->set_embedding_fallback(it->value("dim", std::size_t{64}),
                                        it->value("seed", std::uint64_t{13}));
      }
    }
    if (!script.value("can_score", true)) backend->disable_scoring();
    return backend;
  } catch (const json::exception& e) {
    fail(Errc::format, std::string("malformed backend script: ") + e.what());
  }
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  auto content = text::read_file(path);
  json script = json::parse(content, nullptr, false);
  if (script.is_discarded()) fail(Errc::format, "backend script is not valid JSON: " + path.string());
  return from_json(script);
}

void ScriptedBackend::queue_generations(const std::string& prompt, std::vector<std::string> texts) {
  std::lock_guard lock(mutex_);
  auto& q = queues_[prompt];
  for (auto& t : texts) q.push_back(std::move(t));
}

void ScriptedBackend::set_generation_pool(const std::string& prompt, std::vector<std::string> texts) {
  if (texts.empty()) fail(Errc::invalid_argument, "generation pool is empty");
  std::lock_guard lock(mutex_);
  pools_[prompt] = std::move(texts);
}

void ScriptedBackend::set_scores(const std::string& prompt, std::map<std::string, double> table) {
  std::lock_guard lock(mutex_);
  scores_[prompt] = std::move(table);
}

void ScriptedBackend::set_default_scores(std::map<std::string, double> table, double jitter,
                                         std::optional<double> missing) {
  std::lock_guard lock(mutex_);
  default_scores_ = DefaultScores{std::move(table), jitter, missing};
}

void ScriptedBackend::add_generation_rule(std::string needle, std::vector<std::string> pool) {
  if (pool.empty()) fail(Errc::invalid_argument, "generation rule pool is empty");
  std::lock_guard lock(mutex_);
  generation_rules_.push_back({std::move(needle), std::move(pool)});
}

void ScriptedBackend::add_score_rule(std::string needle, std::map<std::string, double> table, double jitter,
                                     std::optional<double> missing) {
  std::lock_guard lock(mutex_);
  score_rules_.push_back({std::move(needle), DefaultScores{std::move(table), jitter, missing}});
}

void ScriptedBackend::set_token_counts(std::map<std::string, int> counts) {
  std::lock_guard lock(mutex_);
  token_counts_ = std::move(counts);
}

void ScriptedBackend::set_embedding(const std::string& token, std::vector<double> vector) {
  std::lock_guard lock(mutex_);
  embed_table_[token] = std::move(vector);
}

void ScriptedBackend::set_embedding_fallback(std::size_t dim, std::uint64_t seed) {
  std::lock_guard lock(mutex_);
  embed_fallback_ = std::make_unique<HashProjectionEmbeddingProvider>(dim, seed);
}

BackendCapabilities ScriptedBackend::capabilities() const {
  std::lock_guard lock(mutex_);
  BackendCapabilities caps;
  caps.can_score = can_score_;
  caps.can_embed = !embed_table_.empty() || embed_fallback_ != nullptr;
  caps.thread_safe = queues_.empty();
  return caps;
}

std::vector<GenerationResult> ScriptedBackend::generate(std::string_view prompt,
                                                        const SamplingParams& params) {
  ++calls_;
  std::lock_guard lock(mutex_);
  std::vector<GenerationResult> out;
  out.reserve(static_cast<std::size_t>(params.num_samples));

  // Lookup order: exact queue, exact pool, rules, "*" queue, "*" pool.
  const std::vector<std::string>* pool = nullptr;
  std::deque<std::string>* queue = nullptr;
  auto find_key = [&](std::string_view key) {
    if (auto q = queues_.find(key); q != queues_.end() && !q->second.empty()) {
      queue = &q->second;
    } else if (auto p = pools_.find(key); p != pools_.end()) {
      pool = &p->second;
    }
    return queue || pool;
  };
  if (!find_key(prompt)) {
    for (const auto& rule : generation_rules_) {
      if (prompt.find(rule.needle) != std::string_view::npos) {
        pool = &rule.pool;
        break;
      }
    }
    if (!pool) find_key("*");
  }
  if (queue) {
    if (queue->size() < static_cast<std::size_t>(params.num_samples)) {
      fail(Errc::backend_rejected, "scripted queue for prompt exhausted");
    }
    for (int i = 0; i < params.num_samples; ++i) {
      out.push_back({queue->front(), FinishReason::stop, i});
      queue->pop_front();
    }
    return out;
  }
  if (!pool) fail(Errc::backend_rejected, "no scripted generation for prompt");

  const std::uint64_t seed = params.seed.value_or(seed_);
  const std::uint64_t prompt_hash = fnv1a64(prompt);
  for (int i = 0; i < params.num_samples; ++i) {
    std::uint64_t pick =
        splitmix64(prompt_hash ^ splitmix64(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(i)));
    const auto& texts = *pool;
    out.push_back({texts[pick % texts.size()], FinishReason::stop, i});
  }
  return out;
}

int ScriptedBackend::token_count(const std::string& candidate) const {
  if (auto it = token_counts_.find(candidate); it != token_counts_.end()) return it->second;
  auto words = text::word_tokens(candidate);
  return words.empty() ? 1 : static_cast<int>(words.size());
}

std::vector<ContinuationScore> ScriptedBackend::score_continuations(
    std::string_view prompt, std::span<const std::string> candidates, ScoringUnit /*unit*/) {
  ++calls_;
  std::lock_guard lock(mutex_);
  if (!can_score_) {
    fail(Errc::capability_unsupported, "backend '" + id_ + "' does not support continuation scoring");
  }
  std::vector<ContinuationScore> out;
  out.reserve(candidates.size());
  auto exact = scores_.find(prompt);
  const DefaultScores* table = nullptr;
  if (exact == scores_.end()) {
    for (const auto& rule : score_rules_) {
      if (prompt.find(rule.needle) != std::string_view::npos) {
        table = &rule.scores;
        break;
      }
    }
    if (!table && default_scores_) table = &*default_scores_;
    if (!table) fail(Errc::backend_rejected, "no scripted scores for prompt");
  }
  for (const auto& cand : candidates) {
    double lp = 0.0;
    if (table) {
      lp = table_score(*table, prompt, cand);
    } else {
      auto it = exact->second.find(cand);
      if (it == exact->second.end()) {
        fail(Errc::backend_rejected, "scripted score table lacks candidate '" + cand + "'");
      }
      lp = it->second;
    }
    out.push_back({cand, lp, token_count(cand)});
  }
  return out;
}

double ScriptedBackend::table_score(const DefaultScores& scores, std::string_view prompt,
                                    const std::string& cand) const {
  double lp = 0.0;
  if (auto it = scores.table.find(cand); it != scores.table.end()) {
    lp = it->second;
  } else if (scores.missing) {
    lp = *scores.missing;
  } else {
    fail(Errc::backend_rejected, "scripted score table lacks candidate '" + cand + "'");
  }
  if (scores.jitter > 0.0) {
    std::uint64_t h = splitmix64(fnv1a64(cand, fnv1a64(prompt, splitmix64(seed_))));
    // Jitter only lowers scores so log-probabilities stay <= 0.
    lp -= scores.jitter * 0.5 * (unit_symmetric(h) + 1.0);
  }
  return lp;
}

TokenEmbeddings ScriptedBackend::embed_tokens(std::string_view input) {
  ++calls_;
  std::lock_guard lock(mutex_);
  if (embed_table_.empty() && !embed_fallback_) {
    fail(Errc::provider_unavailable, "backend '" + id_ + "' has no embedding script");
  }
  TableEmbeddingProvider table(embed_table_, embed_fallback_.get());
  return table.embed_tokens(input);
}

}  // namespace emoreason
