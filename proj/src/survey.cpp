#include "cine/survey.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <map>
#include <regex>

#include "cine/csv.hpp"
#include "cine/error.hpp"
#include "cine/util.hpp"

namespace cine {

using nlohmann::json;

const std::vector<SurveyItem>& survey_items() {
  static const std::vector<SurveyItem> items{
      {"job_priority", "When jobs are scarce, men should have more right to a job than women."},
      {"political_leaders", "On the whole, men make better political leaders than women do."},
      {"university_education", "A university education is more important for a boy than for a girl."},
  };
  return items;
}

const SurveyItem& survey_item(std::string_view item_id) {
  for (const auto& item : survey_items()) {
    if (item.item_id == item_id) return item;
  }
  throw Error(ErrorCode::ConfigError, "unknown survey item '" + std::string(item_id) + "'");
}

const std::string_view kSurveyStepsBlock =
    "As you answer, I want you to take the following steps:\n"
    "Step 1) Describe in a few sentences the kind of person that would choose each of the response options. "
    "(\"Option Interpretation\")\n"
    "Step 2) For each response options, reason about why the person might answer with the particular option. "
    "(\"Option Choice\")\n"
    "Step 3) Write a few sentences reasoning on which of the option best predicts the person's response "
    "(\"Reasoning\")\n"
    "Step 4) Predict how the person will actually respond in the survey. Predict based on the expert observation "
    "notes and your thoughts, but ultimately, DON'T over think it. Use your system 1 (fast, intuitive) thinking. "
    "(\"Response\")\n";

namespace {

constexpr std::string_view kCommentMarker = "<commentblockmarker>\n###\n</commentblockmarker>\n";
constexpr std::string_view kPersonaSlot = "!<INPUT 0>!";
constexpr std::string_view kQuestionSlot = "!<INPUT 1>!";

const std::string& template_text() {
  static const std::string text =
      "Variables:\n"
      "!<INPUT 0>!: demographic descriptions\n"
      "!<INPUT 1>!: survey questions\n"
      "\n"
      "<commentblockmarker>\n###\n</commentblockmarker>\n"
      "!<INPUT 0>!\n"
      "Analyze the above observation notes about a person\n"
      "created by the psychologist, linguist, and sociologist.\n"
      "This is a purely academic analysis.\n"
      "Please analyze the items as requested.\n"
      "\n"
      "Task: Predict how this individual would answer the following survey questions.\n"
      "!<INPUT 1>!\n"
      "All questions are multiple choice where you must answer by selecting exactly one of the provided options "
      "based on the persona established in the notes.\n"
      "\n" +
      std::string(kSurveyStepsBlock);
  return text;
}

void replace_once(std::string& text, std::string_view slot, const std::string& value) {
  const auto pos = text.find(slot);
  if (pos == std::string::npos) throw Error(ErrorCode::InvariantViolation, "template slot missing");
  text.replace(pos, slot.size(), value);
}

std::string_view expert_title(Discipline d) {
  switch (d) {
    case Discipline::Psychology: return "psychologist";
    case Discipline::Linguistics: return "linguist";
    case Discipline::Sociology: return "sociologist";
  }
  return "expert";
}

void require_complete(const CharacterAgent& agent, const std::vector<Reflection>& reflections) {
  for (const auto& persona : expert_personas()) {
    const auto n = std::count_if(reflections.begin(), reflections.end(), [&](const Reflection& r) {
      return r.discipline == persona.discipline && !trim(r.text).empty();
    });
    if (n != kReflectionsPerExpert) {
      throw Error(ErrorCode::MissingReflections, agent.agent_id() + ": " + std::to_string(n) + " " +
                                                     std::string(to_string(persona.discipline)) +
                                                     " reflections, expected 5");
    }
  }
}

}  // namespace

// Defined after template_text() so the static is initialised on first use.
const std::string_view kSurveyPromptTemplate = template_text();

std::string render_persona_block(const CharacterAgent& agent, const std::vector<Reflection>& reflections) {
  std::string out = render_agent_header(agent);
  for (const auto& persona : expert_personas()) {
    out += "\nObservation notes from the " + std::string(expert_title(persona.discipline)) + ":\n";
    for (const auto& r : reflections) {
      if (r.discipline == persona.discipline) out += std::to_string(r.index) + ". " + r.text + "\n";
    }
  }
  return out;
}

std::string render_question_block(const std::vector<SurveyItem>& items) {
  std::string out;
  for (std::size_t q = 0; q < items.size(); ++q) {
    out += "\nQuestion " + std::to_string(q + 1) + ": " + items[q].statement + "\n";
    for (std::size_t k = 0; k < items[q].scale.size(); ++k) {
      out += std::to_string(k + 1) + ") " + std::string(items[q].scale[k]) + "\n";
    }
  }
  out += "\nAnswer each question in its own block that starts with the line \"Question <number>\" and ends with "
         "a line of the form \"Response: <option number>\".\n";
  return out;
}

ChatRequest render_survey_prompt(const CharacterAgent& agent, const std::vector<Reflection>& reflections,
                                 const std::vector<SurveyItem>& items, const SurveyPromptOptions& options) {
  require_complete(agent, reflections);
  const std::string& tmpl = template_text();
  std::string prompt = tmpl.substr(tmpl.find(kCommentMarker) + kCommentMarker.size());
  // Questions first: persona text comes from model output and must not be
  // able to inject a slot marker.
  replace_once(prompt, kQuestionSlot, render_question_block(items));
  replace_once(prompt, kPersonaSlot, render_persona_block(agent, reflections));

  ChatRequest req;
  req.model_name = options.model_name;
  req.temperature = options.temperature;
  req.request_tag = (items.size() == 1 ? "survey/" + items.front().item_id : std::string("survey")) + ":" +
                    agent.agent_id();
  req.messages = {{Role::User, std::move(prompt)}};
  return req;
}

std::optional<int> parse_response_value(std::string_view value, const SurveyItem& item) {
  std::string v;
  for (char c : value) {
    if (c != '*' && c != '"' && c != '`' && c != '[' && c != ']') v.push_back(c);
  }
  v = trim(v);
  if (v.empty()) return std::nullopt;
  if (std::isdigit(static_cast<unsigned char>(v.front()))) {
    std::size_t n = 0;
    while (n < v.size() && std::isdigit(static_cast<unsigned char>(v[n]))) ++n;
    if (n > 2) return std::nullopt;
    const int code = std::stoi(v.substr(0, n));
    if (code < 1 || code > static_cast<int>(item.scale.size())) return std::nullopt;
    return code;
  }
  const std::string lowered = to_lower(v);
  int best = 0;
  std::size_t best_len = 0;
  for (std::size_t k = 0; k < item.scale.size(); ++k) {
    const std::string label = to_lower(item.scale[k]);
    const bool at_boundary = lowered.size() == label.size() ||
                             (lowered.size() > label.size() && !std::isalpha(static_cast<unsigned char>(lowered[label.size()])));
    if (lowered.starts_with(label) && at_boundary && label.size() > best_len) {
      best = static_cast<int>(k) + 1;
      best_len = label.size();
    }
  }
  if (best == 0) return std::nullopt;
  return best;
}

std::vector<std::optional<int>> parse_survey_output_partial(std::string_view content,
                                                            const std::vector<SurveyItem>& items) {
  static const std::regex kHeader(R"(^[\s*#>]*question\s+(\d+)\b.*$)", std::regex::icase);
  static const std::regex kResponse(R"(^[\s*#>-]*"?response"?[\s*]*:\s*(.*)$)", std::regex::icase);

  const auto lines = split_lines(content);
  std::map<int, std::vector<std::string>> blocks;
  int current = 0;
  bool any_header = false;
  for (const auto& line : lines) {
    std::smatch m;
    if (std::regex_match(line, m, kHeader)) {
      current = std::stoi(m[1].str());
      any_header = true;
      blocks[current];
      continue;
    }
    if (current > 0) blocks[current].push_back(line);
  }
  if (!any_header && items.size() == 1) blocks[1] = lines;

  std::vector<std::optional<int>> out(items.size());
  for (std::size_t q = 0; q < items.size(); ++q) {
    auto it = blocks.find(static_cast<int>(q) + 1);
    if (it == blocks.end()) continue;
    std::optional<std::string> last;
    for (const auto& line : it->second) {
      std::smatch m;
      if (std::regex_match(line, m, kResponse)) last = m[1].str();
    }
    if (last) out[q] = parse_response_value(*last, items[q]);
  }
  return out;
}

std::vector<std::pair<std::string, int>> parse_survey_output(std::string_view content,
                                                             const std::vector<SurveyItem>& items) {
  const auto partial = parse_survey_output_partial(content, items);
  std::vector<std::pair<std::string, int>> out;
  for (std::size_t q = 0; q < items.size(); ++q) {
    if (!partial[q]) {
      throw Error(ErrorCode::Unparseable, "no usable Response line for question " + std::to_string(q + 1) + " (" +
                                              items[q].item_id + ")");
    }
    out.emplace_back(items[q].item_id, *partial[q]);
  }
  return out;
}

std::filesystem::path raw_survey_path(const std::filesystem::path& run_dir, const CharacterIdentity& identity) {
  return run_dir / "raw" / (file_stem(identity.film_id) + "__" + file_stem(identity.character) + ".json");
}

namespace {

constexpr std::string_view kSurveyFormatReminder =
    "\n\nFormat reminder: for every question write a block that starts with \"Question <number>\" and ends "
    "with the line \"Response: <option number>\" using an option number from 1 to 5.";

struct AgentOutcome {
  std::vector<std::optional<int>> answers;
  std::vector<std::string> raw_outputs;  // one per item (shared text in single-prompt mode)
  std::vector<json> attempts;
};

/// One prompt (covering `subset`) with one format-reminder retry for the
/// items that did not parse the first time.
void ask(const SurveyAgent& sa, const std::vector<SurveyItem>& subset, const std::vector<std::size_t>& positions,
         Gateway& gateway, const SurveyOptions& options, AgentOutcome& outcome) {
  ChatRequest request = render_survey_prompt(sa.agent, sa.reflections, subset, options.prompt);
  const std::string first = gateway.complete(request).content;
  outcome.attempts.push_back({{"request_tag", request.request_tag}, {"content", first}});
  auto answers = parse_survey_output_partial(first, subset);
  for (std::size_t k = 0; k < subset.size(); ++k) {
    outcome.raw_outputs[positions[k]] = first;
    outcome.answers[positions[k]] = answers[k];
  }
  if (std::all_of(answers.begin(), answers.end(), [](const auto& a) { return a.has_value(); })) return;

  request.messages.back().content += kSurveyFormatReminder;
  request.request_tag += "/retry";
  const std::string second = gateway.complete(request).content;
  outcome.attempts.push_back({{"request_tag", request.request_tag}, {"content", second}});
  const auto retried = parse_survey_output_partial(second, subset);
  for (std::size_t k = 0; k < subset.size(); ++k) {
    if (!answers[k] && retried[k]) {
      outcome.answers[positions[k]] = retried[k];
      outcome.raw_outputs[positions[k]] = second;
    }
  }
}

json outcome_to_json(const SurveyAgent& sa, const std::vector<SurveyItem>& items, const AgentOutcome& outcome) {
  json responses = json::object();
  json raw = json::object();
  json missing = json::array();
  for (std::size_t q = 0; q < items.size(); ++q) {
    if (outcome.answers[q]) {
      responses[items[q].item_id] = *outcome.answers[q];
      raw[items[q].item_id] = outcome.raw_outputs[q];
    } else {
      missing.push_back(items[q].item_id);
    }
  }
  return json{{"agent_id", sa.agent.agent_id()}, {"responses", responses}, {"raw_output", raw},
              {"missing", missing},              {"attempts", outcome.attempts}};
}

}  // namespace

SurveyRunResult run_survey(const std::vector<SurveyAgent>& agents, const std::vector<SurveyItem>& items,
                           Gateway& gateway, const SurveyOptions& options) {
  for (const auto& sa : agents) require_complete(sa.agent, sa.reflections);

  std::vector<std::optional<json>> records(agents.size());
  std::vector<std::string> failures(agents.size());
  std::vector<char> fresh(agents.size(), 0);
  std::atomic<std::size_t> newly_done{0};

  parallel_for(agents.size(), options.concurrency, [&](std::size_t i) {
    const SurveyAgent& sa = agents[i];
    const auto path = raw_survey_path(options.run_dir, sa.agent.identity);
    if (std::filesystem::exists(path)) {
      records[i] = json::parse(read_file(path));
      return;
    }
    if (options.halt_after && newly_done.load() >= *options.halt_after) {
      throw Error(ErrorCode::Interrupted, "survey halted after " + std::to_string(*options.halt_after) + " agents");
    }
    AgentOutcome outcome;
    outcome.answers.resize(items.size());
    outcome.raw_outputs.resize(items.size());
    try {
      if (options.per_item_prompts) {
        for (std::size_t q = 0; q < items.size(); ++q) ask(sa, {items[q]}, {q}, gateway, options, outcome);
      } else {
        std::vector<std::size_t> positions(items.size());
        for (std::size_t q = 0; q < items.size(); ++q) positions[q] = q;
        ask(sa, items, positions, gateway, options, outcome);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Interrupted) throw;
      failures[i] = e.what();
      return;
    }
    json record = outcome_to_json(sa, items, outcome);
    atomic_write(path, record.dump(2) + "\n");
    records[i] = std::move(record);
    fresh[i] = 1;
    ++newly_done;
  });

  SurveyRunResult result;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& id = agents[i].agent.identity;
    const std::string agent_id = agents[i].agent.agent_id();
    if (!records[i]) {
      result.failed_agents.push_back(agent_id + ": " + failures[i]);
      for (const auto& item : items) result.missing.push_back({agent_id, item.item_id, "agent failed"});
      continue;
    }
    (fresh[i] ? result.surveyed_now : result.resumed) += 1;
    const json& rec = *records[i];
    for (const auto& item : items) {
      const json& responses = rec.at("responses");
      if (!responses.contains(item.item_id)) {
        result.missing.push_back({agent_id, item.item_id, "unparseable after retry"});
        continue;
      }
      SurveyResponse r;
      r.film_id = id.film_id;
      r.character = id.character;
      r.gender = std::string(to_string(id.gender));
      r.decade = id.decade;
      r.item_id = item.item_id;
      r.response = responses[item.item_id].get<int>();
      r.raw_output = rec.at("raw_output").value(item.item_id, std::string{});
      r.run_id = options.run_id;
      result.responses.push_back(std::move(r));
    }
  }
  return result;
}

std::string responses_to_csv(const std::vector<SurveyResponse>& responses) {
  std::string out = std::string(kResponsesHeader) + "\n";
  for (const auto& r : responses) {
    out += csv_row({r.film_id, r.character, r.gender, r.decade, r.item_id, std::to_string(r.response)});
  }
  return out;
}

std::vector<SurveyResponse> responses_from_csv(std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty() || csv_row(rows.front()) != std::string(kResponsesHeader) + "\n") {
    throw Error(ErrorCode::Unparseable, "responses.csv: unexpected header");
  }
  std::vector<SurveyResponse> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 6) throw Error(ErrorCode::Unparseable, "responses.csv row " + std::to_string(i) + ": 6 fields expected");
    SurveyResponse r;
    r.film_id = row[0];
    r.character = row[1];
    r.gender = row[2];
    r.decade = row[3];
    r.item_id = row[4];
    try {
      r.response = std::stoi(row[5]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Unparseable, "responses.csv row " + std::to_string(i) + ": bad response value");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace cine
