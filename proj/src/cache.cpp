#include "emoreason/cache.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "emoreason/error.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

namespace fs = std::filesystem;

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec || !fs::is_directory(dir_)) {
    fail(Errc::cache_io, "cannot create cache directory " + dir_.string());
  }
}

fs::path ResponseCache::resolve_dir(const fs::path& fallback) {
  if (const char* env = std::getenv(std::string(kEnvVar).c_str()); env && *env) {
    return fs::path(env);
  }
  return fallback;
}

fs::path ResponseCache::path_for(const CacheKey& key) const {
  auto digest = key.digest();
  // Two-level fan-out keeps directories small on long runs.
  return dir_ / digest.substr(0, 2) / digest;
}

std::optional<std::string> ResponseCache::lookup(const CacheKey& key) const {
  auto path = path_for(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool ResponseCache::store(const CacheKey& key, std::string_view response) {
  auto path = path_for(key);
  std::lock_guard lock(write_mutex_);
  if (fs::exists(path)) return false;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  try {
    text::write_file_atomic(path, response);
  } catch (const Error& e) {
    fail(Errc::cache_io, e.what());
  }
  return true;
}

ResponseCache::GcStats ResponseCache::gc(const GcOptions& options) {
  GcStats stats;
  std::lock_guard lock(write_mutex_);
  const auto now = fs::file_time_type::clock::now();
  std::vector<fs::path> doomed;
  for (const auto& entry : fs::recursive_directory_iterator(dir_)) {
    if (!entry.is_regular_file()) continue;
    const auto name = entry.path().filename().string();
    if (name.find(".tmp.") != std::string::npos) {
      ++stats.removed_stale_temp;
      doomed.push_back(entry.path());
      continue;
    }
    if (options.max_age && now - entry.last_write_time() > *options.max_age) {
      ++stats.removed_expired;
      doomed.push_back(entry.path());
      continue;
    }
    std::string content;
    try {
      content = text::read_file(entry.path());
    } catch (const Error&) {
    }
    if (!nlohmann::json::accept(content)) {
      ++stats.removed_corrupt;
      doomed.push_back(entry.path());
      continue;
    }
    ++stats.entries;
  }
  if (!options.dry_run) {
    for (const auto& p : doomed) {
      std::error_code ec;
      fs::remove(p, ec);
    }
  }
  return stats;
}

}  // namespace emoreason
