#pragma once

#include <optional>
#include <string_view>
#include <vector>

namespace emoreason {

// Files compiled in from profiles/ and resources/, keyed by repo-relative path
// (e.g. "profiles/isear.json").
std::optional<std::string_view> find_resource(std::string_view name);
std::vector<std::string_view> resource_names();

}  // namespace emoreason
