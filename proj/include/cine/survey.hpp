#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cine/agent.hpp"
#include "cine/llm_gateway.hpp"
#include "cine/reflection.hpp"

namespace cine {

/// Ordinal coding: 1 = strongly disagree ... 5 = strongly agree with the
/// male-privileging statement, so lower means are more egalitarian.
inline constexpr std::array<std::string_view, 5> kAgreementScale = {
    "Strongly disagree", "Disagree", "Neither agree nor disagree", "Agree", "Strongly agree"};

struct SurveyItem {
  std::string item_id;
  std::string statement;
  std::array<std::string_view, 5> scale = kAgreementScale;
};

/// job_priority, political_leaders, university_education -- in that order.
const std::vector<SurveyItem>& survey_items();
const SurveyItem& survey_item(std::string_view item_id);

struct SurveyResponse {
  std::string film_id;
  std::string character;
  std::string gender;
  std::string decade;
  std::string item_id;
  int response = 0;
  std::string raw_output;
  std::string run_id;
};

/// The survey-emulation template, including its leading variables comment
/// block. Rendering strips everything up to the comment marker.
extern const std::string_view kSurveyPromptTemplate;
/// The four numbered instruction steps, exactly as they appear in the template.
extern const std::string_view kSurveyStepsBlock;

/// Header (name, age, time period) followed by the 15 reflections grouped by expert.
std::string render_persona_block(const CharacterAgent& agent, const std::vector<Reflection>& reflections);
/// Numbered questions with their 1-5 options and the answer-format line.
std::string render_question_block(const std::vector<SurveyItem>& items);

struct SurveyPromptOptions {
  std::string model_name;
  double temperature = 0.0;
};

/// Fills both template slots. Throws Error(MissingReflections) unless there
/// are five reflections from each expert.
ChatRequest render_survey_prompt(const CharacterAgent& agent, const std::vector<Reflection>& reflections,
                                 const std::vector<SurveyItem>& items, const SurveyPromptOptions& options = {});

/// Value on a "Response:" line: a leading integer or one of the scale labels.
std::optional<int> parse_response_value(std::string_view value, const SurveyItem& item);

/// Per item (in `items` order): the last "Response:" line inside that
/// item's "Question <n>" block, or nullopt when the block or value is unusable.
std::vector<std::optional<int>> parse_survey_output_partial(std::string_view content,
                                                            const std::vector<SurveyItem>& items);

/// All-or-nothing variant. Throws Error(Unparseable) naming the first bad item.
std::vector<std::pair<std::string, int>> parse_survey_output(std::string_view content,
                                                             const std::vector<SurveyItem>& items);

struct SurveyAgent {
  CharacterAgent agent;
  std::vector<Reflection> reflections;
};

struct SurveyOptions {
  std::string run_id;
  std::filesystem::path run_dir;  // raw/ lives underneath
  bool per_item_prompts = false;
  std::size_t concurrency = 1;
  SurveyPromptOptions prompt;
  /// Test hook: stop with Error(Interrupted) once this many agents were newly surveyed.
  std::optional<std::size_t> halt_after;
};

struct MissingItem {
  std::string agent_id;
  std::string item_id;
  std::string reason;
};

struct SurveyRunResult {
  std::vector<SurveyResponse> responses;  // agent order, then item order
  std::vector<MissingItem> missing;
  std::vector<std::string> failed_agents;  // gateway failures; retried on resume
  std::size_t surveyed_now = 0;
  std::size_t resumed = 0;
};

/// One completion per agent (or per item with per_item_prompts). Each agent's
/// outcome is persisted under raw/ as soon as it is known, so a rerun skips
/// finished agents. Items still unparseable after one retry with a format
/// reminder are recorded as missing.
SurveyRunResult run_survey(const std::vector<SurveyAgent>& agents, const std::vector<SurveyItem>& items,
                           Gateway& gateway, const SurveyOptions& options);

std::filesystem::path raw_survey_path(const std::filesystem::path& run_dir, const CharacterIdentity& identity);

inline constexpr std::string_view kResponsesHeader = "film_id,character,gender,decade,item_id,response";

std::string responses_to_csv(const std::vector<SurveyResponse>& responses);
std::vector<SurveyResponse> responses_from_csv(std::string_view csv);

}  // namespace cine
