#include "emoreason/prompts.hpp"

#include "emoreason/error.hpp"

namespace emoreason {

using nlohmann::json;

namespace {

constexpr std::string_view kInputLabel = "Input: ";
constexpr std::string_view kContextLabel = "Context: ";
constexpr std::string_view kContextCue = "Context:";

bool is_placeholder_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

// Length of a "{name}" token starting at tmpl[pos], or 0.
std::size_t placeholder_at(std::string_view tmpl, std::size_t pos) {
  if (tmpl[pos] != '{') return 0;
  std::size_t end = pos + 1;
  while (end < tmpl.size() && is_placeholder_char(tmpl[end])) ++end;
  if (end == pos + 1 || end >= tmpl.size() || tmpl[end] != '}') return 0;
  return end - pos + 1;
}

void require_non_empty(std::string_view value, std::string_view what) {
  if (value.empty()) fail(Errc::invalid_argument, std::string(what) + " must be non-empty");
}

}  // namespace

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::context_gen: return "ContextGen";
    case PromptKind::emotion_qa: return "EmotionQA";
    case PromptKind::baseline_standard: return "BaselineStandard";
    case PromptKind::baseline_cot: return "BaselineCoT";
  }
  return "ContextGen";
}

PromptKind prompt_kind_from_string(std::string_view s) {
  for (auto k : {PromptKind::context_gen, PromptKind::emotion_qa, PromptKind::baseline_standard,
                 PromptKind::baseline_cot}) {
    if (to_string(k) == s) return k;
  }
  fail(Errc::invalid_argument, "unknown prompt kind '" + std::string(s) + "'");
}

std::vector<std::string> placeholders(std::string_view tmpl) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (auto len = placeholder_at(tmpl, i)) {
      out.emplace_back(tmpl.substr(i + 1, len - 2));
      i += len - 1;
    }
  }
  return out;
}

std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (auto len = placeholder_at(tmpl, i)) {
      std::string name(tmpl.substr(i + 1, len - 2));
      auto it = values.find(name);
      if (it == values.end()) {
        fail(Errc::invalid_argument, "template placeholder {" + name + "} has no value");
      }
      out += it->second;
      i += len - 1;
    } else {
      out.push_back(tmpl[i]);
    }
  }
  return out;
}

PromptProfile PromptProfile::from_json(const json& profile) {
  try {
    PromptProfile p;
    p.name = profile.at("name").get<std::string>();
    const auto& prompts = profile.at("prompts");
    p.context_template.instruction = prompts.at("context_instruction").get<std::string>();
    for (const auto& ex : prompts.at("context_examples")) {
      p.context_template.examples.push_back(
          {ex.at("input").get<std::string>(), ex.at("context").get<std::string>()});
    }
    p.emotion_qa = prompts.value("emotion_qa", std::string(kEmotionQaTemplate));
    p.baseline_standard = prompts.value("baseline_standard", std::string(kBaselineStandardTemplate));
    p.baseline_cot = prompts.value("baseline_cot", std::string(kBaselineCotTemplate));
    return p;
  } catch (const json::exception& e) {
    fail(Errc::format, std::string("malformed prompt profile: ") + e.what());
  }
}

RenderedPrompt render_context_prompt(const FewShotTemplate& tmpl, std::string_view input_text) {
  require_non_empty(input_text, "input text");
  std::string text = tmpl.instruction;
  text += "\n\n";
  for (const auto& ex : tmpl.examples) {
    text.append(kInputLabel).append(ex.input).push_back('\n');
    text.append(kContextLabel).append(ex.context).append("\n\n");
  }
  text.append(kInputLabel).append(input_text).push_back('\n');
  text.append(kContextCue);
  return {PromptKind::context_gen, std::move(text), {{"input", std::string(input_text)}}};
}

RenderedPrompt render_emotion_prompt(std::string_view context, std::string_view input_text,
                                     std::string_view tmpl) {
  if (context.empty()) {
    fail(Errc::empty_context, "emotion prompt requires a generated context");
  }
  require_non_empty(input_text, "input text");
  std::map<std::string, std::string> subs{{"context", std::string(context)},
                                          {"input", std::string(input_text)}};
  return {PromptKind::emotion_qa, substitute(tmpl, subs), subs};
}

RenderedPrompt render_baseline_prompt(PromptKind kind, std::string_view input_text,
                                      const PromptProfile& profile) {
  std::string_view tmpl;
  if (kind == PromptKind::baseline_standard) {
    tmpl = profile.baseline_standard;
  } else if (kind == PromptKind::baseline_cot) {
    tmpl = profile.baseline_cot;
  } else {
    fail(Errc::wrong_renderer,
         std::string(to_string(kind)) + " prompts are not rendered by render_baseline_prompt");
  }
  require_non_empty(input_text, "input text");
  std::map<std::string, std::string> subs{{"input", std::string(input_text)}};
  return {kind, substitute(tmpl, subs), subs};
}

RenderedPrompt render_baseline_prompt(PromptKind kind, std::string_view input_text) {
  static const PromptProfile defaults;
  return render_baseline_prompt(kind, input_text, defaults);
}

std::optional<ParsedContextPrompt> parse_context_prompt(std::string_view text) {
  std::vector<std::string_view> blocks;
  std::size_t start = 0;
  while (true) {
    auto sep = text.find("\n\n", start);
    blocks.push_back(text.substr(start, sep == std::string_view::npos ? sep : sep - start));
    if (sep == std::string_view::npos) break;
    start = sep + 2;
  }
  if (blocks.size() < 2) return std::nullopt;

  ParsedContextPrompt out;
  out.instruction = std::string(blocks.front());

  auto split_pair = [](std::string_view block) -> std::optional<std::pair<std::string_view, std::string_view>> {
    if (!block.starts_with(kInputLabel)) return std::nullopt;
    auto nl = block.find('\n');
    if (nl == std::string_view::npos) return std::nullopt;
    return std::pair{block.substr(kInputLabel.size(), nl - kInputLabel.size()), block.substr(nl + 1)};
  };

  for (std::size_t i = 1; i + 1 < blocks.size(); ++i) {
    auto pair = split_pair(blocks[i]);
    if (!pair || !pair->second.starts_with(kContextLabel)) return std::nullopt;
    out.examples.push_back({std::string(pair->first), std::string(pair->second.substr(kContextLabel.size()))});
  }
  auto last = split_pair(blocks.back());
  if (!last || last->second != kContextCue) return std::nullopt;
  out.final_input = std::string(last->first);
  return out;
}

}  // namespace emoreason
