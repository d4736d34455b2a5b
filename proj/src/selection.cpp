#include "emoreason/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "emoreason/error.hpp"
#include "emoreason/parallel.hpp"
#include "emoreason/resources.hpp"
#include "emoreason/text.hpp"

namespace emoreason {

using nlohmann::json;

// ---------------------------------------------------------------- lexicon

EmotionLexicon::EmotionLexicon(std::set<std::string, std::less<>> words, AliasMap aliases)
    : words_(std::move(words)), aliases_(std::move(aliases)) {
  if (words_.empty()) fail(Errc::invalid_argument, "emotion lexicon is empty");
  for (const auto& [alias, target] : aliases_) {
    if (!words_.contains(target)) {
      fail(Errc::invalid_argument, "lexicon alias '" + alias + "' points at unknown word '" + target + "'");
    }
  }
}

EmotionLexicon EmotionLexicon::parse(std::string_view content) {
  std::set<std::string, std::less<>> words;
  AliasMap aliases;
  int line_no = 0;
  for (const auto& raw_line : text::split(content, '\n')) {
    ++line_no;
    auto line = text::trim(raw_line);
    if (line.empty() || line.front() == '#') continue;
    std::string_view arrow;
    std::size_t at = std::string_view::npos;
    for (std::string_view candidate : {std::string_view("->"), std::string_view("→")}) {
      if (auto pos = line.find(candidate); pos != std::string_view::npos) {
        arrow = candidate;
        at = pos;
        break;
      }
    }
    if (at == std::string_view::npos) {
      words.insert(text::to_lower(line));
      continue;
    }
    auto alias = text::to_lower(text::trim(line.substr(0, at)));
    auto target = text::to_lower(text::trim(line.substr(at + arrow.size())));
    if (alias.empty() || target.empty()) {
      fail(Errc::format, "lexicon line " + std::to_string(line_no) + ": malformed alias");
    }
    aliases[alias] = target;
  }
  return EmotionLexicon(std::move(words), std::move(aliases));
}

EmotionLexicon EmotionLexicon::load(const std::string& path) { return parse(text::read_file(path)); }

const EmotionLexicon& EmotionLexicon::builtin() {
  static const EmotionLexicon lexicon = parse(*find_resource("resources/emotion_lexicon.txt"));
  return lexicon;
}

std::string EmotionLexicon::canonical(std::string_view word) const {
  if (auto it = aliases_.find(word); it != aliases_.end()) return it->second;
  return std::string(word);
}

// ---------------------------------------------------------------- labels

namespace {

bool is_strip_char(char c) {
  static constexpr std::string_view kStrip = " \t\r\n.,;:!?\"'`*_~()[]{}<>#";
  return kStrip.find(c) != std::string_view::npos;
}

// \textbf{x} and friends -> x
std::string_view strip_latex_command(std::string_view s) {
  if (s.size() < 4 || s.front() != '\\') return s;
  std::size_t i = 1;
  while (i < s.size() && text::is_ascii_letter(s[i])) ++i;
  if (i == 1 || i >= s.size() || s[i] != '{') return s;
  auto close = s.rfind('}');
  if (close == std::string_view::npos || close < i) return s;
  return s.substr(i + 1, close - i - 1);
}

}  // namespace

std::string normalize_label(std::string_view raw, const EmotionLexicon::AliasMap* aliases) {
  auto s = strip_latex_command(text::trim(raw));
  while (!s.empty() && is_strip_char(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_strip_char(s.back())) s.remove_suffix(1);
  s = strip_latex_command(s);

  std::string out;
  bool pending_space = false;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  out = text::to_lower(out);
  if (aliases) {
    if (auto it = aliases->find(out); it != aliases->end()) return it->second;
  }
  return out;
}

std::string normalize_label(std::string_view raw, const EmotionLexicon& lexicon) {
  return normalize_label(raw, &lexicon.aliases());
}

// ---------------------------------------------------------------- parsing

namespace {

constexpr std::string_view kFinalLabelCue = "final emotion label is";
constexpr std::string_view kAuthorFeelsCue = "the author feels";

bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?' || c == '\n'; }
bool is_markup(char c) { return c == '*' || c == '_' || c == '`' || c == '"' || c == '\''; }

// Position after a \textbf{ style opener at `pos`, or `pos` itself.
std::size_t skip_latex_open(std::string_view t, std::size_t pos) {
  if (pos >= t.size() || t[pos] != '\\') return pos;
  std::size_t i = pos + 1;
  while (i < t.size() && text::is_ascii_letter(t[i])) ++i;
  return (i > pos + 1 && i < t.size() && t[i] == '{') ? i + 1 : pos;
}

// Start of the sentence containing position `pos`.
std::size_t sentence_start(std::string_view t, std::size_t pos) {
  while (pos > 0 && !is_sentence_end(t[pos - 1])) --pos;
  return pos;
}

}  // namespace

ParseOutcome parse_output(std::string_view t, const EmotionLexicon::AliasMap* aliases,
                          ReasoningSource source) {
  if (text::trim(t).empty()) return Malformed{source, "empty output"};

  if (auto pos = text::rfind_icase(t, kFinalLabelCue); pos != std::string_view::npos) {
    std::size_t start = pos + kFinalLabelCue.size();
    while (start < t.size() && (t[start] == ' ' || t[start] == ':' || t[start] == '\t')) ++start;
    std::size_t end = start;
    while (end < t.size() && !is_sentence_end(t[end])) ++end;
    ParsedReasoning out;
    out.source = source;
    out.label_raw = std::string(text::trim(t.substr(start, end - start)));
    out.label_norm = normalize_label(out.label_raw, aliases);
    if (!out.label_norm.empty()) {
      out.explanation = std::string(text::trim(t.substr(0, sentence_start(t, pos))));
      out.complete = !out.explanation.empty();
      return out;
    }
  }

  auto pos = text::rfind_icase(t, kAuthorFeelsCue);
  if (pos == std::string_view::npos) return Malformed{source, "no final-label sentence"};
  std::size_t start = pos + kAuthorFeelsCue.size();
  while (start < t.size() && (t[start] == ' ' || is_markup(t[start]))) ++start;
  start = skip_latex_open(t, start);
  std::size_t end = start;
  while (end < t.size() && (text::is_word_char(t[end]) || t[end] == '-')) ++end;
  if (end == start) return Malformed{source, "no label after 'the author feels'"};

  ParsedReasoning out;
  out.source = source;
  out.label_raw = std::string(t.substr(start, end - start));
  out.label_norm = normalize_label(out.label_raw, aliases);
  if (out.label_norm.empty()) return Malformed{source, "empty label"};

  std::size_t rest = end;
  while (rest < t.size() && (is_markup(t[rest]) || t[rest] == ' ' || t[rest] == '}')) ++rest;
  std::size_t sentence_end = rest;
  while (sentence_end < t.size() && !is_sentence_end(t[sentence_end])) ++sentence_end;
  if (text::trim(t.substr(rest, sentence_end - rest)).empty()) {
    // Label-only sentence: whatever came before it is the explanation.
    out.explanation = std::string(text::trim(t.substr(0, sentence_start(t, pos))));
  } else {
    // "The author feels X because ..." carries its own justification.
    if (sentence_end < t.size()) ++sentence_end;
    out.explanation = std::string(text::trim(t.substr(0, sentence_end)));
  }
  out.complete = !out.explanation.empty();
  return out;
}

ParseOutcome parse_output(const RawReasoning& raw, const EmotionLexicon::AliasMap* aliases) {
  return parse_output(raw.text, aliases, ReasoningSource{raw.context_index, raw.sample_index});
}

// ---------------------------------------------------------------- bertscore

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

}  // namespace

ScoreTriple bertscore(const TokenEmbeddings& candidate, const TokenEmbeddings& reference) {
  if (candidate.empty() || reference.empty()) {
    fail(Errc::empty_embedding, "bertscore needs non-empty candidate and reference embeddings");
  }
  if (candidate.dim() != reference.dim()) {
    fail(Errc::invalid_argument, "bertscore embedding dimensions differ");
  }
  const auto& cand = candidate.vectors();
  const auto& ref = reference.vectors();
  // cosine[i][j]: reference token i vs candidate token j
  std::vector<double> cosine(ref.size() * cand.size());
  for (std::size_t i = 0; i < ref.size(); ++i) {
    for (std::size_t j = 0; j < cand.size(); ++j) {
      cosine[i * cand.size() + j] = clamp_unit(dot(ref[i], cand[j]));
    }
  }
  double recall = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    double best = -1.0;
    for (std::size_t j = 0; j < cand.size(); ++j) best = std::max(best, cosine[i * cand.size() + j]);
    recall += best;
  }
  recall /= static_cast<double>(ref.size());

  double precision = 0.0;
  for (std::size_t j = 0; j < cand.size(); ++j) {
    double best = -1.0;
    for (std::size_t i = 0; i < ref.size(); ++i) best = std::max(best, cosine[i * cand.size() + j]);
    precision += best;
  }
  precision /= static_cast<double>(cand.size());

  double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return {precision, recall, f1};
}

// ---------------------------------------------------------------- similarity

SimilarityMatrix::SimilarityMatrix(std::size_t size) : size_(size), values_(size * size, 0.0) {
  for (std::size_t i = 0; i < size_; ++i) values_[i * size_ + i] = 1.0;
}

void SimilarityMatrix::set_symmetric(std::size_t i, std::size_t j, double v) {
  v = clamp_unit(v);
  values_[i * size_ + j] = v;
  values_[j * size_ + i] = v;
}

SimilarityMatrix SimilarityMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  SimilarityMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) fail(Errc::invalid_argument, "similarity matrix is not square");
    if (std::abs(rows[i][i] - 1.0) > 1e-9) {
      fail(Errc::invalid_argument, "similarity matrix diagonal must be 1");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(rows[i][j] - rows[j][i]) > 1e-9) {
        fail(Errc::invalid_argument, "similarity matrix is not symmetric");
      }
      m.set_symmetric(i, j, rows[i][j]);
    }
  }
  return m;
}

std::string_view similarity_text(const ParsedReasoning& item) {
  return item.explanation.empty() ? std::string_view(item.label_raw) : std::string_view(item.explanation);
}

SimilarityMatrix similarity_matrix(std::span<const ParsedReasoning> parsed,
                                   EmbeddingProvider& provider, std::size_t parallelism) {
  if (parsed.empty()) fail(Errc::invalid_argument, "similarity_matrix: no items");
  const std::size_t n = parsed.size();

  // Identical texts share one embedding call.
  std::vector<std::size_t> slot(n);
  std::vector<std::string_view> unique_texts;
  {
    std::map<std::string_view, std::size_t> seen;
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, inserted] = seen.try_emplace(similarity_text(parsed[i]), unique_texts.size());
      if (inserted) unique_texts.push_back(it->first);
      slot[i] = it->second;
    }
  }
  std::vector<TokenEmbeddings> embeddings(unique_texts.size());
  parallel_for(unique_texts.size(), parallelism, [&](std::size_t u) {
    try {
      embeddings[u] = provider.embed_tokens(unique_texts[u]);
    } catch (const Error& e) {
      std::size_t item = static_cast<std::size_t>(std::find(slot.begin(), slot.end(), u) - slot.begin());
      const auto& src = parsed[item].source;
      throw Error(e.code(), "embedding item " + std::to_string(item) + " (context " +
                                std::to_string(src.context_index) + ", sample " +
                                std::to_string(src.sample_index) + "): " + e.what());
    }
  });

  SimilarityMatrix m(n);
  std::vector<std::vector<double>> rows(n);
  parallel_for(n, parallelism, [&](std::size_t a) {
    rows[a].assign(n, 0.0);
    for (std::size_t b = a + 1; b < n; ++b) {
      rows[a][b] = slot[a] == slot[b] ? 1.0 : bertscore(embeddings[slot[b]], embeddings[slot[a]]).f1;
    }
  });
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) m.set_symmetric(a, b, rows[a][b]);
  }
  return m;
}

// ---------------------------------------------------------------- selection

namespace {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

double mean_cross(const SimilarityMatrix& sim, const std::vector<std::size_t>& a,
                  const std::vector<std::size_t>& b) {
  double sum = 0.0;
  for (auto i : a) {
    for (auto j : b) sum += sim.at(i, j);
  }
  return sum / static_cast<double>(a.size() * b.size());
}

double mean_intra(const SimilarityMatrix& sim, const std::vector<std::size_t>& members) {
  if (members.size() < 2) return 1.0;
  double sum = 0.0;
  for (std::size_t x = 0; x < members.size(); ++x) {
    for (std::size_t y = x + 1; y < members.size(); ++y) sum += sim.at(members[x], members[y]);
  }
  return sum / static_cast<double>(members.size() * (members.size() - 1) / 2);
}

}  // namespace

SelectionResult select_top_k(std::span<const ParsedReasoning> parsed, const SimilarityMatrix& sim,
                             const SelectionOptions& options, std::size_t discarded_count) {
  if (options.k < 1) fail(Errc::invalid_argument, "select_top_k: k must be >= 1");
  if (!(options.tau_group > 0.0 && options.tau_group <= 1.0)) {
    fail(Errc::invalid_argument, "select_top_k: tau_group must be in (0, 1]");
  }
  if (parsed.empty()) fail(Errc::empty_selection, "no well-formed reasoning outputs to select from");
  if (sim.size() != parsed.size()) {
    fail(Errc::invalid_argument, "select_top_k: similarity matrix size does not match items");
  }

  // Exact-label groups in lexicographic label order.
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < parsed.size(); ++i) by_label[parsed[i].label_norm].push_back(i);
  std::vector<std::string> base_labels;
  std::vector<std::vector<std::size_t>> base_members;
  for (auto& [label, members] : by_label) {
    base_labels.push_back(label);
    base_members.push_back(std::move(members));
  }

  DisjointSets sets(base_labels.size());
  for (std::size_t a = 0; a < base_labels.size(); ++a) {
    for (std::size_t b = a + 1; b < base_labels.size(); ++b) {
      if (mean_cross(sim, base_members[a], base_members[b]) >= options.tau_group) sets.unite(a, b);
    }
  }

  std::map<std::size_t, std::vector<std::size_t>> components;  // root -> base group ids
  for (std::size_t g = 0; g < base_labels.size(); ++g) components[sets.find(g)].push_back(g);

  std::vector<LabelGroup> groups;
  for (const auto& [root, ids] : components) {
    LabelGroup group;
    std::size_t lead = ids.front();
    for (auto g : ids) {
      if (base_members[g].size() > base_members[lead].size()) lead = g;
      group.merged_labels.push_back(base_labels[g]);
      group.member_indices.insert(group.member_indices.end(), base_members[g].begin(), base_members[g].end());
    }
    std::sort(group.member_indices.begin(), group.member_indices.end());
    group.label = base_labels[lead];
    group.support = static_cast<int>(group.member_indices.size());
    group.mean_intra_similarity = mean_intra(sim, group.member_indices);

    double best = 0.0;
    for (auto i : group.member_indices) {
      if (!parsed[i].complete) continue;
      double total = 0.0;
      for (auto j : group.member_indices) {
        if (j != i) total += sim.at(i, j);
      }
      if (!group.medoid_index || total > best) {
        group.medoid_index = i;
        best = total;
      }
    }
    groups.push_back(std::move(group));
  }

  std::sort(groups.begin(), groups.end(), [](const LabelGroup& a, const LabelGroup& b) {
    if (a.support != b.support) return a.support > b.support;
    if (a.mean_intra_similarity != b.mean_intra_similarity) {
      return a.mean_intra_similarity > b.mean_intra_similarity;
    }
    return a.label < b.label;
  });

  SelectionResult result;
  result.discarded_count = discarded_count;
  for (std::size_t g = 0; g < groups.size() && g < options.k; ++g) {
    const auto& group = groups[g];
    TopEntry entry;
    entry.label = group.label;
    entry.support = group.support;
    if (group.medoid_index) {
      const auto& medoid = parsed[*group.medoid_index];
      entry.explanation = medoid.explanation;
      entry.context_index = medoid.source.context_index;
    } else {
      entry.complete = false;
    }
    result.top.push_back(std::move(entry));
  }
  result.groups = std::move(groups);
  return result;
}

std::set<std::string> extract_emotion_words(std::span<const std::string> texts,
                                            const EmotionLexicon& lexicon) {
  std::set<std::string> out;
  for (const auto& t : texts) {
    for (const auto& tok : text::letter_tokens(t)) {
      auto word = lexicon.canonical(tok);
      if (lexicon.contains(word)) out.insert(std::move(word));
    }
  }
  return out;
}

json to_json(const ParsedReasoning& item) {
  return {{"context_index", item.source.context_index},
          {"sample_index", item.source.sample_index},
          {"label_raw", item.label_raw},
          {"label_norm", item.label_norm},
          {"explanation", item.explanation},
          {"complete", item.complete}};
}

json to_json(const LabelGroup& group) {
  return {{"label", group.label},
          {"support", group.support},
          {"member_indices", group.member_indices},
          {"medoid_index", group.medoid_index ? json(*group.medoid_index) : json(nullptr)},
          {"mean_intra_similarity", group.mean_intra_similarity},
          {"merged_labels", group.merged_labels}};
}

}  // namespace emoreason
