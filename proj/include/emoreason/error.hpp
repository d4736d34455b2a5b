#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emoreason {

enum class Errc {
  invalid_argument,
  backend_unreachable,     // transient, retried
  backend_rejected,        // permanent, carries status detail
  capability_unsupported,
  provider_unavailable,
  empty_after_tokenization,
  empty_embedding,
  cache_io,
  wrong_renderer,
  empty_context,
  no_votes,
  empty_selection,
  io,
  format,
  header_mismatch,
  duplicate_id,
  config,
  validation,
  id_mismatch,
  corrupt_store,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }
  bool transient() const noexcept { return code_ == Errc::backend_unreachable; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace emoreason
