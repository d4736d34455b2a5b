#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "emoreason/backend.hpp"

namespace emoreason {

/// Content-addressed response store: one file per CacheKey digest holding the
/// canonical response bytes. Safe for concurrent use; the first writer of a
/// key wins and later identical stores are no-ops.
class ResponseCache {
 public:
  static constexpr std::string_view kEnvVar = "EMOREASON_CACHE_DIR";

  explicit ResponseCache(std::filesystem::path dir);

  // $EMOREASON_CACHE_DIR if set, else `fallback`.
  static std::filesystem::path resolve_dir(const std::filesystem::path& fallback);

  std::optional<std::string> lookup(const CacheKey& key) const;
  // Returns false when an entry already existed.
  bool store(const CacheKey& key, std::string_view response);

  std::filesystem::path path_for(const CacheKey& key) const;
  const std::filesystem::path& dir() const { return dir_; }

  struct GcOptions {
    // Remove entries last written longer ago than this.
    std::optional<std::chrono::hours> max_age;
    bool dry_run = false;
  };
  struct GcStats {
    std::size_t entries = 0;  // kept
    std::size_t removed_stale_temp = 0;
    std::size_t removed_corrupt = 0;
    std::size_t removed_expired = 0;
  };
  // Drops leftover temp files, entries that are not valid JSON, and
  // optionally entries past max_age.
  GcStats gc(const GcOptions& options);

 private:
  std::filesystem::path dir_;
  mutable std::mutex write_mutex_;
};

}  // namespace emoreason
