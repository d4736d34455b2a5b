#pragma once

#include <string>

#include "json.hpp"

namespace emoreason {

// Compact single-line dump; invalid UTF-8 is replaced instead of throwing.
inline std::string dump_line(const nlohmann::json& j) {
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

inline std::string dump_line(const nlohmann::ordered_json& j) {
  return j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

}  // namespace emoreason
