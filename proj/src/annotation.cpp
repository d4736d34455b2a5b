#include "emoreason/annotation.hpp"

#include <fstream>
#include <limits>

#include "emoreason/error.hpp"
#include "emoreason/json_util.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

using nlohmann::json;
using nlohmann::ordered_json;

AnnotationKey key_of(const AnnotationRecord& r) { return {r.sample_id, r.label_rank, r.annotator_id}; }

std::vector<FieldError> validate_annotation(const AnnotationRecord& r, int max_rank) {
  std::vector<FieldError> errors;
  if (text::trim(r.sample_id).empty()) errors.push_back({"sample_id", "must not be empty"});
  if (text::trim(r.annotator_id).empty()) errors.push_back({"annotator_id", "must not be empty"});
  if (r.label_rank < 1 || r.label_rank > max_rank) {
    errors.push_back({"label_rank", "must be in [1, " + std::to_string(max_rank) + "]"});
  }
  for (std::size_t q = 0; q < r.answers.size(); ++q) {
    if (r.answers[q] < 1 || r.answers[q] > 3) {
      errors.push_back({"q" + std::to_string(q + 1), "answer must be 1, 2 or 3"});
    }
  }
  return errors;
}

ordered_json to_json(const AnnotationRecord& r) {
  ordered_json j;
  j["sample_id"] = r.sample_id;
  j["label_rank"] = r.label_rank;
  j["answers"] = r.answers;
  j["annotator_id"] = r.annotator_id;
  j["timestamp"] = r.timestamp;
  return j;
}

std::variant<AnnotationRecord, std::vector<FieldError>> annotation_from_json(const json& j, int max_rank) {
  std::vector<FieldError> errors;
  if (!j.is_object()) return std::vector<FieldError>{{"body", "must be an object"}};
  AnnotationRecord r;
  auto get_string = [&](const char* field, std::string& out, bool required) {
    auto it = j.find(field);
    if (it == j.end() || it->is_null()) {
      if (required) errors.push_back({field, "is required"});
    } else if (!it->is_string()) {
      errors.push_back({field, "must be a string"});
    } else {
      out = it->get<std::string>();
    }
  };
  get_string("sample_id", r.sample_id, true);
  get_string("annotator_id", r.annotator_id, true);
  get_string("timestamp", r.timestamp, false);
  if (auto it = j.find("label_rank"); it == j.end() || !it->is_number_integer()) {
    errors.push_back({"label_rank", "must be an integer"});
  } else {
    r.label_rank = it->get<int>();
  }
  // Either "answers": [q1..q5] or separate "q1".."q5" fields.
  if (auto it = j.find("answers"); it != j.end()) {
    if (!it->is_array() || it->size() != 5) {
      errors.push_back({"answers", "must hold exactly five answers"});
    } else {
      for (std::size_t q = 0; q < 5; ++q) {
        if (!(*it)[q].is_number_integer()) {
          errors.push_back({"q" + std::to_string(q + 1), "must be an integer"});
        } else {
          r.answers[q] = (*it)[q].get<int>();
        }
      }
    }
  } else {
    for (std::size_t q = 0; q < 5; ++q) {
      auto name = "q" + std::to_string(q + 1);
      auto f = j.find(name);
      if (f == j.end() || !f->is_number_integer()) {
        errors.push_back({name, "is required"});
      } else {
        r.answers[q] = f->get<int>();
      }
    }
  }
  if (!errors.empty()) return errors;
  if (auto v = validate_annotation(r, max_rank); !v.empty()) return v;
  return r;
}

AnnotationSummary aggregate_annotations(std::span<const AnnotationRecord> records) {
  AnnotationSummary s;
  s.total = static_cast<int>(records.size());
  for (const auto& r : records) {
    for (std::size_t q = 0; q < 5; ++q) {
      if (r.answers[q] < 1 || r.answers[q] > 3) {
        fail(Errc::validation, "answer out of domain for sample '" + r.sample_id + "'");
      }
      ++s.per_question[q].counts[r.answers[q] - 1];
    }
  }
  if (s.total > 0) {
    for (auto& qs : s.per_question) {
      for (std::size_t a = 0; a < 3; ++a) qs.percent[a] = 100.0 * qs.counts[a] / s.total;
    }
  }
  return s;
}

ordered_json to_json(const AnnotationSummary& summary) {
  ordered_json j;
  j["total"] = summary.total;
  j["per_question"] = ordered_json::array();
  for (std::size_t q = 0; q < 5; ++q) {
    const auto& qs = summary.per_question[q];
    ordered_json e;
    e["question"] = kAnnotationQuestions[q];
    e["counts"] = {{"yes", qs.counts[0]}, {"maybe", qs.counts[1]}, {"no", qs.counts[2]}};
    e["percent"] = {{"yes", qs.percent[0]}, {"maybe", qs.percent[1]}, {"no", qs.percent[2]}};
    if (q == 1) e["maybe_reading"] = kQ2MaybeReading;
    j["per_question"].push_back(std::move(e));
  }
  return j;
}

namespace {

AnnotationRecord record_from_stored(const json& j) {
  // Stored records were validated on submit; only the shape is re-checked.
  auto parsed = annotation_from_json(j, std::numeric_limits<int>::max());
  if (auto* errors = std::get_if<std::vector<FieldError>>(&parsed)) {
    fail(Errc::corrupt_store, "invalid stored record (" + errors->front().field + ": " +
                                  errors->front().message + ")");
  }
  return std::get<AnnotationRecord>(parsed);
}

}  // namespace

AnnotationStore::AnnotationStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) fail(Errc::io, "cannot create annotation store " + dir_.string() + ": " + ec.message());

  const std::string hint =
      " (recovery: the event log is authoritative; delete state.json to rebuild it, or truncate "
      "events.jsonl before the reported line)";

  if (std::filesystem::exists(state_path())) {
    try {
      auto state = json::parse(text::read_file(state_path()));
      flushed_seq_ = seq_ = state.at("seq").get<std::size_t>();
      for (const auto& r : state.at("records")) {
        auto rec = record_from_stored(r);
        current_[key_of(rec)] = rec;
      }
    } catch (const json::exception& e) {
      fail(Errc::corrupt_store, state_path().string() + ": " + e.what() + hint);
    } catch (const Error& e) {
      fail(Errc::corrupt_store, state_path().string() + ": " + e.what() + hint);
    }
  }

  if (std::filesystem::exists(events_path())) {
    std::size_t line_no = 0;
    std::size_t events = 0;
    for (const auto& line : text::split(text::read_file(events_path()), '\n')) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      try {
        auto ev = json::parse(line);
        auto seq = ev.at("seq").get<std::size_t>();
        ++events;
        if (seq != events) fail(Errc::corrupt_store, "sequence gap");
        if (seq <= seq_) continue;
        auto rec = record_from_stored(ev.at("record"));
        current_[key_of(rec)] = rec;
        seq_ = seq;
      } catch (const std::exception& e) {
        fail(Errc::corrupt_store,
             events_path().string() + ":" + std::to_string(line_no) + ": " + e.what() + hint);
      }
    }
    if (events < seq_) {
      fail(Errc::corrupt_store, events_path().string() + " holds fewer events than state.json" + hint);
    }
  } else if (seq_ > 0) {
    fail(Errc::corrupt_store, events_path().string() + " is missing but state.json is not empty" + hint);
  }
}

AnnotationStore::~AnnotationStore() {
  try {
    flush();
  } catch (...) {
  }
}

std::optional<AnnotationRecord> AnnotationStore::submit(const AnnotationRecord& record) {
  std::lock_guard lock(mu_);
  std::optional<AnnotationRecord> previous;
  if (auto it = current_.find(key_of(record)); it != current_.end()) previous = it->second;

  ordered_json ev;
  ev["seq"] = seq_ + 1;
  ev["record"] = to_json(record);
  ev["previous"] = previous ? to_json(*previous) : ordered_json(nullptr);
  std::ofstream out(events_path(), std::ios::app | std::ios::binary);
  out << dump_line(ev) << '\n';
  out.flush();
  if (!out) fail(Errc::io, "cannot append to " + events_path().string());

  ++seq_;
  current_[key_of(record)] = record;
  return previous;
}

std::vector<AnnotationRecord> AnnotationStore::records() const {
  std::lock_guard lock(mu_);
  std::vector<AnnotationRecord> out;
  out.reserve(current_.size());
  for (const auto& [_, r] : current_) out.push_back(r);
  return out;
}

bool AnnotationStore::has(const AnnotationKey& key) const {
  std::lock_guard lock(mu_);
  return current_.contains(key);
}

std::size_t AnnotationStore::event_count() const {
  std::lock_guard lock(mu_);
  return seq_;
}

void AnnotationStore::flush() {
  std::lock_guard lock(mu_);
  flush_locked();
}

void AnnotationStore::flush_locked() {
  if (seq_ == flushed_seq_ && std::filesystem::exists(state_path())) return;
  ordered_json state;
  state["seq"] = seq_;
  state["records"] = ordered_json::array();
  for (const auto& [_, r] : current_) state["records"].push_back(to_json(r));
  text::write_file_atomic(state_path(), state.dump(2) + "\n");
  flushed_seq_ = seq_;
}

}  // namespace emoreason
