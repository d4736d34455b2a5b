#include "emoreason/records.hpp"

#include <algorithm>

#include "emoreason/error.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) fail(Errc::invalid_argument, "label set is empty");
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const auto& l = labels_[i];
    if (l.empty() || text::to_lower(l) != l || text::trim(l) != l) {
      fail(Errc::invalid_argument, "label '" + l + "' must be lowercase and non-empty");
    }
    if (std::find(labels_.begin(), labels_.begin() + static_cast<long>(i), l) !=
        labels_.begin() + static_cast<long>(i)) {
      fail(Errc::invalid_argument, "duplicate label '" + l + "'");
    }
  }
}

bool LabelSet::contains(std::string_view label) const { return index_of(label).has_value(); }

std::optional<std::size_t> LabelSet::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

}  // namespace emoreason
