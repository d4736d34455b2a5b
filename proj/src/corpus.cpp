#include "emoreason/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "emoreason/error.hpp"
#include "emoreason/json_util.hpp"
#include "emoreason/resources.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(InputFormat format) {
  switch (format) {
    case InputFormat::canonical: return "canonical";
    case InputFormat::csv: return "csv";
    case InputFormat::tsv: return "tsv";
  }
  return "canonical";
}

InputFormat input_format_from_string(std::string_view s) {
  if (s == "canonical" || s == "jsonl") return InputFormat::canonical;
  if (s == "csv") return InputFormat::csv;
  if (s == "tsv") return InputFormat::tsv;
  fail(Errc::invalid_argument, "unknown input format '" + std::string(s) + "'");
}

DatasetProfile DatasetProfile::from_json(const json& profile) {
  try {
    DatasetProfile p;
    p.name = profile.at("name").get<std::string>();
    p.label_set = LabelSet(profile.at("labels").get<std::vector<std::string>>());
    p.prompt_profile = p.name;
    if (auto it = profile.find("label_aliases"); it != profile.end()) {
      for (const auto& [k, v] : it->items()) p.label_aliases[k] = v.get<std::string>();
    }
    if (auto it = profile.find("dataset"); it != profile.end()) {
      p.input_format = input_format_from_string(it->value("input_format", std::string("canonical")));
      if (it->contains("field_map")) {
        p.field_map = it->at("field_map").get<std::map<std::string, std::string>>();
      }
    }
    std::set<std::string> roles;
    for (const auto& [column, role] : p.field_map) {
      if (role != "id" && role != "text" && role != "gold_label") {
        fail(Errc::format, "field_map role '" + role + "' is not one of id, text, gold_label");
      }
      roles.insert(role);
    }
    if (roles.size() != 3) fail(Errc::format, "field_map must cover id, text and gold_label");
    return p;
  } catch (const json::exception& e) {
    fail(Errc::format, std::string("malformed dataset profile: ") + e.what());
  }
}

Profile builtin_profile(std::string_view name) {
  auto content = find_resource("profiles/" + std::string(name) + ".json");
  if (!content) fail(Errc::invalid_argument, "no built-in profile named '" + std::string(name) + "'");
  auto j = json::parse(*content);
  return {DatasetProfile::from_json(j), PromptProfile::from_json(j)};
}

Profile load_profile(const std::string& name_or_path) {
  if (find_resource("profiles/" + name_or_path + ".json")) return builtin_profile(name_or_path);
  auto j = json::parse(text::read_file(name_or_path), nullptr, false);
  if (j.is_discarded()) fail(Errc::format, "profile file is not valid JSON: " + name_or_path);
  return {DatasetProfile::from_json(j), PromptProfile::from_json(j)};
}

std::vector<std::vector<std::string>> parse_delimited(std::string_view content, char sep) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
  };
  auto end_row = [&] {
    end_field();
    if (row_has_content || row.size() > 1 || !row.front().empty()) rows.push_back(std::move(row));
    row.clear();
    row_has_content = false;
  };
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty()) {
      in_quotes = true;
      row_has_content = true;
    } else if (c == sep) {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      end_row();
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) fail(Errc::format, "unterminated quoted field");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

namespace {

struct RowFields {
  std::optional<std::string> id, text, gold;
};

void accept_row(std::size_t line, RowFields fields, std::string raw, const DatasetProfile& profile,
                std::set<std::string>& seen_ids, LoadResult& out) {
  if (!fields.id || fields.id->empty()) fail(Errc::format, "line " + std::to_string(line) + ": missing id");
  if (!seen_ids.insert(*fields.id).second) {
    fail(Errc::duplicate_id, "line " + std::to_string(line) + ": duplicate id '" + *fields.id + "'");
  }
  InputRecord rec;
  rec.id = *fields.id;
  rec.text = fields.text ? std::string(text::trim(*fields.text)) : std::string();
  if (rec.text.empty()) {
    out.rejected.push_back({line, rec.id, "empty text", std::move(raw)});
    return;
  }
  if (fields.gold) {
    auto gold = text::to_lower(text::trim(*fields.gold));
    if (!gold.empty()) {
      if (!profile.label_set.contains(gold)) {
        out.rejected.push_back({line, rec.id, "unknown gold label '" + gold + "'", std::move(raw)});
        return;
      }
      rec.gold_label = gold;
    }
  }
  out.records.push_back(std::move(rec));
}

}  // namespace

LoadResult load_dataset(const std::filesystem::path& path, const DatasetProfile& profile,
                        const LoadOptions& options) {
  const auto content = text::read_file(path);
  const auto format = options.format.value_or(profile.input_format);
  LoadResult out;
  std::set<std::string> seen_ids;

  auto role_of = [&](const std::string& column) -> std::optional<std::string> {
    auto it = profile.field_map.find(column);
    if (it == profile.field_map.end()) return std::nullopt;
    return it->second;
  };

  if (format == InputFormat::canonical) {
    std::size_t line_no = 0;
    for (const auto& line : text::split(content, '\n')) {
      ++line_no;
      if (text::trim(line).empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.is_object()) {
        fail(Errc::format, path.string() + ":" + std::to_string(line_no) + ": not a JSON object");
      }
      RowFields fields;
      for (const auto& [key, value] : j.items()) {
        auto role = role_of(key);
        if (!role || value.is_null()) continue;
        std::string v = value.is_string() ? value.get<std::string>() : value.dump();
        if (*role == "id") fields.id = v;
        if (*role == "text") fields.text = v;
        if (*role == "gold_label") fields.gold = v;
      }
      accept_row(line_no, std::move(fields), std::string(text::trim(line)), profile, seen_ids, out);
    }
  } else {
    auto rows = parse_delimited(content, format == InputFormat::csv ? ',' : '\t');
    if (rows.empty()) fail(Errc::header_mismatch, path.string() + ": missing header row");
    const auto& header = rows.front();
    std::map<std::string, std::size_t> column_index;
    for (std::size_t c = 0; c < header.size(); ++c) column_index[std::string(text::trim(header[c]))] = c;
    std::map<std::string, std::size_t> role_column;
    std::vector<std::string> missing;
    for (const auto& [column, role] : profile.field_map) {
      auto it = column_index.find(column);
      if (it == column_index.end()) {
        missing.push_back(column);
      } else {
        role_column[role] = it->second;
      }
    }
    if (!missing.empty()) {
      fail(Errc::header_mismatch,
           path.string() + ": header lacks mapped column(s) " + text::join(missing, ", "));
    }
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      auto cell = [&](const char* role) -> std::optional<std::string> {
        auto c = role_column.at(role);
        if (c >= row.size()) return std::nullopt;
        return row[c];
      };
      RowFields fields{cell("id"), cell("text"), cell("gold_label")};
      accept_row(r + 1, std::move(fields), text::join(row, std::string(1, format == InputFormat::csv ? ',' : '\t')),
                 profile, seen_ids, out);
    }
  }

  if (options.errors_path) write_rejected(out.rejected, *options.errors_path);
  return out;
}

void write_rejected(const std::vector<RejectedRow>& rows, const std::filesystem::path& path) {
  std::string body;
  for (const auto& rej : rows) {
    ordered_json j;
    j["line"] = rej.line;
    j["id"] = rej.id;
    j["reason"] = rej.reason;
    j["raw"] = rej.raw;
    body += dump_line(j) + "\n";
  }
  text::write_file_atomic(path, body);
}

ordered_json to_json(const AugmentedRecord& record) {
  ordered_json j;
  j["schema"] = kAugmentedSchema;
  j["id"] = record.id;
  j["text"] = record.text;
  j["gold_label"] = record.gold_label ? ordered_json(*record.gold_label) : ordered_json(nullptr);
  j["voted_label"] = {{"label", record.voted_label.label},
                      {"vote_count", record.voted_label.vote_count},
                      {"total_votes", record.voted_label.total_votes},
                      {"tie_broken", record.voted_label.tie_broken}};
  j["top"] = ordered_json::array();
  for (const auto& t : record.top) {
    ordered_json e;
    e["label"] = t.label;
    e["explanation"] = t.explanation;
    e["support"] = t.support;
    e["context_index"] = t.context_index ? ordered_json(*t.context_index) : ordered_json(nullptr);
    e["complete"] = t.complete;
    j["top"].push_back(std::move(e));
  }
  j["emotion_words"] = record.emotion_words;
  j["contexts"] = record.contexts;
  j["generated_labels"] = ordered_json::array();
  for (const auto& [label, count] : record.generated_labels) {
    j["generated_labels"].push_back({{"label", label}, {"count", count}});
  }
  j["run_id"] = record.run_id;
  return j;
}

AugmentedRecord augmented_from_json(const json& j) {
  try {
    if (j.value("schema", std::string()) != kAugmentedSchema) {
      fail(Errc::format, "unsupported augmented schema '" + j.value("schema", std::string()) + "'");
    }
    AugmentedRecord r;
    r.id = j.at("id").get<std::string>();
    r.text = j.at("text").get<std::string>();
    if (!j.at("gold_label").is_null()) r.gold_label = j.at("gold_label").get<std::string>();
    const auto& v = j.at("voted_label");
    r.voted_label = {v.at("label").get<std::string>(), v.at("vote_count").get<int>(),
                     v.at("total_votes").get<int>(), v.at("tie_broken").get<bool>()};
    for (const auto& t : j.at("top")) {
      TopEntry e;
      e.label = t.at("label").get<std::string>();
      e.explanation = t.at("explanation").get<std::string>();
      e.support = t.at("support").get<int>();
      if (!t.at("context_index").is_null()) e.context_index = t.at("context_index").get<int>();
      e.complete = t.at("complete").get<bool>();
      r.top.push_back(std::move(e));
    }
    for (const auto& w : j.at("emotion_words")) r.emotion_words.insert(w.get<std::string>());
    r.contexts = j.at("contexts").get<std::vector<std::string>>();
    for (const auto& g : j.at("generated_labels")) {
      r.generated_labels.emplace_back(g.at("label").get<std::string>(), g.at("count").get<int>());
    }
    r.run_id = j.at("run_id").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    fail(Errc::format, std::string("malformed augmented record: ") + e.what());
  }
}

void write_augmented(const std::vector<AugmentedRecord>& records, const std::filesystem::path& path) {
  std::string body;
  for (const auto& r : records) body += dump_line(to_json(r)) + "\n";
  text::write_file_atomic(path, body);
}

std::vector<AugmentedRecord> read_augmented(const std::filesystem::path& path) {
  std::vector<AugmentedRecord> out;
  std::size_t line_no = 0;
  for (const auto& line : text::split(text::read_file(path), '\n')) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      fail(Errc::format, path.string() + ":" + std::to_string(line_no) + ": not valid JSON");
    }
    out.push_back(augmented_from_json(j));
  }
  return out;
}

Metrics compute_metrics(const std::map<std::string, std::string>& predictions,
                        const std::map<std::string, std::string>& golds, const LabelSet& labels) {
  if (golds.empty()) fail(Errc::invalid_argument, "compute_metrics: no gold labels");
  std::size_t unknown = 0;
  for (const auto& [id, _] : predictions) {
    if (!golds.contains(id)) ++unknown;
  }
  if (unknown) {
    fail(Errc::id_mismatch, std::to_string(unknown) + " of " + std::to_string(predictions.size()) +
                                " prediction ids have no gold label");
  }

  std::map<std::string, int> tp, fp, fn;
  Metrics m;
  int correct = 0;
  for (const auto& [id, gold] : golds) {
    ++m.total;
    auto it = predictions.find(id);
    if (it == predictions.end()) {
      ++m.missing_predictions;
      ++fn[gold];
      continue;
    }
    if (it->second == gold) {
      ++correct;
      ++tp[gold];
    } else {
      ++fn[gold];
      ++fp[it->second];
    }
  }
  m.accuracy = static_cast<double>(correct) / m.total;
  double f1_sum = 0.0;
  for (const auto& label : labels.labels()) {
    ClassMetrics c;
    c.support = tp[label] + fn[label];
    double p_den = tp[label] + fp[label];
    double r_den = tp[label] + fn[label];
    c.precision = p_den > 0 ? tp[label] / p_den : 0.0;
    c.recall = r_den > 0 ? tp[label] / r_den : 0.0;
    c.f1 = c.precision + c.recall > 0 ? 2 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
    f1_sum += c.f1;
    m.per_class[label] = c;
  }
  m.macro_f1 = f1_sum / static_cast<double>(labels.size());
  return m;
}

ordered_json to_json(const Metrics& metrics) {
  ordered_json j;
  j["accuracy"] = metrics.accuracy;
  j["macro_f1"] = metrics.macro_f1;
  j["total"] = metrics.total;
  j["missing_predictions"] = metrics.missing_predictions;
  j["per_class"] = ordered_json::object();
  for (const auto& [label, c] : metrics.per_class) {
    j["per_class"][label] = {{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1},
                             {"support", c.support}};
  }
  return j;
}

std::vector<std::pair<std::string, int>> label_distribution(const std::vector<std::string>& labels) {
  std::map<std::string, int> counts;
  for (const auto& l : labels) ++counts[l];
  std::vector<std::pair<std::string, int>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::string format_distribution(const std::vector<std::pair<std::string, int>>& dist) {
  std::string out = "label\tcount\n";
  for (const auto& [label, count] : dist) out += label + "\t" + std::to_string(count) + "\n";
  return out;
}

}  // namespace emoreason
