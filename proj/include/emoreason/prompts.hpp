#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace emoreason {

enum class PromptKind { context_gen, emotion_qa, baseline_standard, baseline_cot };

// Stable serialized names: ContextGen, EmotionQA, BaselineStandard, BaselineCoT.
std::string_view to_string(PromptKind kind);
PromptKind prompt_kind_from_string(std::string_view s);

struct FewShotExample {
  std::string input;
  std::string context;

  bool operator==(const FewShotExample&) const = default;
};

struct FewShotTemplate {
  std::string instruction;
  std::vector<FewShotExample> examples;

  std::size_t k() const { return examples.size(); }
  bool operator==(const FewShotTemplate&) const = default;
};

struct RenderedPrompt {
  PromptKind kind;
  std::string text;
  std::map<std::string, std::string> substitutions;
};

inline constexpr std::string_view kEmotionQaTemplate =
    "Q: Given the context, what emotions does the author of the input text feel and why?\n"
    "Give me the reason followed by the final emotion label.\n"
    "Context: {context}\n"
    "Input: {input}\n"
    "A: Let's think step-by-step.";

inline constexpr std::string_view kBaselineStandardTemplate =
    "This is an emotion classification task.\n"
    "Text: {input}\n"
    "Emotion:";

inline constexpr std::string_view kBaselineCotTemplate =
    "Q: What emotion is expressed by the author in the input text? Let's think step-by-step\n"
    "Text: {input}\n"
    "Emotion:";

/// Templates for one dataset. Loaded from the "prompts" section of a profile
/// file so rewording never needs a rebuild.
struct PromptProfile {
  std::string name;
  FewShotTemplate context_template;
  std::string emotion_qa{kEmotionQaTemplate};
  std::string baseline_standard{kBaselineStandardTemplate};
  std::string baseline_cot{kBaselineCotTemplate};

  static PromptProfile from_json(const nlohmann::json& profile);
};

// Replaces {name} placeholders in one pass. Substituted values are never
// rescanned. Throws invalid_argument for a placeholder with no value.
std::string substitute(std::string_view tmpl, const std::map<std::string, std::string>& values);

// Names of the {placeholder}s a template references, in order of appearance.
std::vector<std::string> placeholders(std::string_view tmpl);

/// instruction, blank line, "Input:/Context:" pairs separated by blank lines,
/// then the query block ending in a bare "Context:" cue.
RenderedPrompt render_context_prompt(const FewShotTemplate& tmpl, std::string_view input_text);

RenderedPrompt render_emotion_prompt(std::string_view context, std::string_view input_text,
                                     std::string_view tmpl = kEmotionQaTemplate);

// kind must be baseline_standard or baseline_cot, otherwise wrong_renderer.
RenderedPrompt render_baseline_prompt(PromptKind kind, std::string_view input_text);
RenderedPrompt render_baseline_prompt(PromptKind kind, std::string_view input_text,
                                      const PromptProfile& profile);

struct ParsedContextPrompt {
  std::string instruction;
  std::vector<FewShotExample> examples;
  std::string final_input;
};

// Inverse of render_context_prompt for texts whose fields contain no blank
// lines. Returns nullopt when the layout does not match.
std::optional<ParsedContextPrompt> parse_context_prompt(std::string_view text);

}  // namespace emoreason
