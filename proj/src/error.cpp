#include "emoreason/error.hpp"

namespace emoreason {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::backend_unreachable: return "backend-unreachable";
    case Errc::backend_rejected: return "backend-rejected";
    case Errc::capability_unsupported: return "capability-unsupported";
    case Errc::provider_unavailable: return "provider-unavailable";
    case Errc::empty_after_tokenization: return "empty-after-tokenization";
    case Errc::empty_embedding: return "empty-embedding";
    case Errc::cache_io: return "cache-io";
    case Errc::wrong_renderer: return "wrong-renderer";
    case Errc::empty_context: return "empty-context";
    case Errc::no_votes: return "no-votes";
    case Errc::empty_selection: return "empty-selection";
    case Errc::io: return "io";
    case Errc::format: return "format";
    case Errc::header_mismatch: return "header-mismatch";
    case Errc::duplicate_id: return "duplicate-id";
    case Errc::config: return "config";
    case Errc::validation: return "validation";
    case Errc::id_mismatch: return "id-mismatch";
    case Errc::corrupt_store: return "corrupt-store";
  }
  return "unknown";
}

}  // namespace emoreason
