#include "cine/reflection.hpp"

#include <regex>

#include "cine/error.hpp"
#include "cine/util.hpp"

namespace cine {

using nlohmann::json;

std::string_view to_string(Discipline d) {
  switch (d) {
    case Discipline::Psychology: return "psychology";
    case Discipline::Linguistics: return "linguistics";
    case Discipline::Sociology: return "sociology";
  }
  return "psychology";
}

Discipline discipline_from_string(std::string_view s) {
  for (auto d : {Discipline::Psychology, Discipline::Linguistics, Discipline::Sociology}) {
    if (to_string(d) == s) return d;
  }
  throw Error(ErrorCode::InvariantViolation, "unknown discipline '" + std::string(s) + "'");
}

const std::array<ExpertPersona, 3>& expert_personas() {
  static const std::array<ExpertPersona, 3> personas{{
      {Discipline::Psychology,
       "You are a psychologist reading the record of a film character: the lines they speak and the scene "
       "descriptions that mention them. Describe the character's personality traits, emotional patterns and "
       "motivations. Every observation must rest on the record; cite the bracketed labels of the observations "
       "you rely on and do not speculate beyond them."},
      {Discipline::Linguistics,
       "You are a linguist reading the record of a film character: the lines they speak and the scene "
       "descriptions that mention them. Describe how the character uses language: register, directness, "
       "politeness, who they address and how they claim or yield the floor, and what that reveals about them. "
       "Every observation must rest on the record; cite the bracketed labels of the observations you rely on."},
      {Discipline::Sociology,
       "You are a sociologist reading the record of a film character: the lines they speak and the scene "
       "descriptions that mention them. Describe the character's social position, the roles and institutions "
       "they move through, their relations of authority and dependence, and the values their conduct implies. "
       "Every observation must rest on the record; cite the bracketed labels of the observations you rely on."},
  }};
  return personas;
}

std::string render_memory_node(const MemoryNode& node) {
  return "[" + std::string(to_string(node.kind)) + " " + std::to_string(node.sequence_index) + "] " + node.text;
}

std::string render_agent_header(const CharacterAgent& agent) {
  std::string out = "Name: " + title_case(agent.identity.character) + "\n";
  out += "Age: " + (agent.identity.age_at_release ? std::to_string(*agent.identity.age_at_release) : "unknown") + "\n";
  out += "Time period: " + std::to_string(agent.time_period) + "\n";
  return out;
}

namespace {

constexpr std::string_view kFiveReflections =
    "Write exactly five evidence-based reflections about this character from your disciplinary perspective. "
    "Cover personality traits, motivations, the social roles the character occupies and the values their "
    "behavior implies. Number the reflections 1. to 5., write each as a single paragraph, and cite the "
    "bracketed observation labels that support it.";

constexpr std::string_view kConsolidate =
    "The reflections above were written separately for consecutive parts of this character's record. "
    "Consolidate them into exactly five evidence-based reflections covering the whole record. Number them "
    "1. to 5., write each as a single paragraph, and keep the observation labels they cite.";

constexpr std::string_view kFormatReminder =
    "\n\nFormat reminder: reply with exactly five numbered items, 1. to 5., one paragraph each.";

std::size_t rendered_size(std::span<const MemoryNode> nodes) {
  std::size_t n = 0;
  for (const auto& node : nodes) n += render_memory_node(node).size() + 1;
  return n;
}

std::string render_nodes(std::span<const MemoryNode> nodes) {
  std::string out;
  for (const auto& node : nodes) out += render_memory_node(node) + "\n";
  return out;
}

ChatRequest make_request(const CharacterAgent& agent, const ExpertPersona& persona, const ReflectionOptions& options,
                         std::string user, std::string tag_suffix) {
  ChatRequest req;
  req.model_name = options.model_name;
  req.temperature = options.temperature;
  req.request_tag = "reflect/" + std::string(to_string(persona.discipline)) + tag_suffix + ":" + agent.agent_id();
  req.messages = {{Role::System, persona.system_instruction}, {Role::User, std::move(user)}};
  return req;
}

ChatRequest chunk_request(const CharacterAgent& agent, const ExpertPersona& persona, const ReflectionOptions& options,
                          std::span<const MemoryNode> nodes, std::size_t part, std::size_t parts) {
  std::string user = render_agent_header(agent) + "\n";
  if (parts == 1) {
    user += "Memory record (" + std::to_string(nodes.size()) + " observations, in story order):\n";
  } else {
    user += "Memory record, part " + std::to_string(part + 1) + " of " + std::to_string(parts) + " (" +
            std::to_string(nodes.size()) + " observations, in story order):\n";
  }
  user += render_nodes(nodes);
  user += "\n";
  user += kFiveReflections;
  return make_request(agent, persona, options, std::move(user),
                      parts == 1 ? std::string{} : "/part" + std::to_string(part + 1));
}

/// Completion plus parse, with one retry carrying a format reminder.
std::vector<Reflection> request_five(Gateway& gateway, ChatRequest request, Discipline discipline,
                                     const ReflectionOptions& options) {
  try {
    return parse_reflections(gateway.complete(request).content, discipline, options.max_reflection_chars);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::CountMismatch && e.code() != ErrorCode::InvariantViolation) throw;
  }
  request.messages.back().content += kFormatReminder;
  request.request_tag += "/retry";
  return parse_reflections(gateway.complete(request).content, discipline, options.max_reflection_chars);
}

}  // namespace

ChatRequest render_reflection_prompt(const CharacterAgent& agent, const ExpertPersona& persona,
                                     const ReflectionOptions& options) {
  if (agent.memory.empty()) {
    throw Error(ErrorCode::InvariantViolation, agent.agent_id() + ": cannot render a prompt for an empty memory bank");
  }
  const std::size_t size = rendered_size(agent.memory);
  if (size > options.chunk_chars) {
    throw Error(ErrorCode::OverBudget, agent.agent_id() + ": memory bank renders to " + std::to_string(size) +
                                           " characters, over the " + std::to_string(options.chunk_chars) +
                                           " chunk budget");
  }
  return chunk_request(agent, persona, options, agent.memory, 0, 1);
}

std::vector<Reflection> parse_reflections(std::string_view content, Discipline discipline, std::size_t max_chars) {
  static const std::regex kItem(R"(^[\s*#]*(\d+)[.)]\**\s+(.*)$)");
  std::vector<std::pair<int, std::string>> items;
  for (const std::string& raw : split_lines(content)) {
    std::smatch m;
    if (std::regex_match(raw, m, kItem)) {
      items.emplace_back(std::stoi(m[1].str()), trim(m[2].str()));
    } else if (!items.empty()) {
      const std::string t = trim(raw);
      if (!t.empty()) items.back().second += (items.back().second.empty() ? "" : " ") + t;
    }
  }
  if (items.size() != static_cast<std::size_t>(kReflectionsPerExpert)) {
    throw Error(ErrorCode::CountMismatch, std::string(to_string(discipline)) + ": expected 5 numbered items, found " +
                                              std::to_string(items.size()));
  }
  std::vector<Reflection> out;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& [number, text] = items[k];
    if (number != static_cast<int>(k) + 1) {
      throw Error(ErrorCode::CountMismatch, "items are not numbered 1 to 5");
    }
    const std::string body = collapse_whitespace(text);
    if (body.empty()) throw Error(ErrorCode::CountMismatch, "item " + std::to_string(number) + " is empty");
    if (body.size() > max_chars) {
      throw Error(ErrorCode::InvariantViolation, "item " + std::to_string(number) + " is " +
                                                     std::to_string(body.size()) + " characters long");
    }
    out.push_back({discipline, number, body});
  }
  return out;
}

std::vector<std::span<const MemoryNode>> chunk_memory(std::span<const MemoryNode> memory, std::size_t chunk_chars) {
  std::vector<std::span<const MemoryNode>> chunks;
  std::size_t begin = 0;
  std::size_t size = 0;
  for (std::size_t i = 0; i < memory.size(); ++i) {
    const std::size_t node_size = render_memory_node(memory[i]).size() + 1;
    if (i > begin && size + node_size > chunk_chars) {
      chunks.push_back(memory.subspan(begin, i - begin));
      begin = i;
      size = 0;
    }
    size += node_size;
  }
  if (begin < memory.size()) chunks.push_back(memory.subspan(begin));
  return chunks;
}

std::vector<Reflection> chunked_condense(const CharacterAgent& agent, const ExpertPersona& persona, Gateway& gateway,
                                         const ReflectionOptions& options) {
  const auto chunks = chunk_memory(agent.memory, options.chunk_chars);
  if (chunks.empty()) {
    throw Error(ErrorCode::InvariantViolation, agent.agent_id() + ": empty memory bank");
  }
  if (chunks.size() == 1) {
    return request_five(gateway, chunk_request(agent, persona, options, chunks[0], 0, 1), persona.discipline, options);
  }

  std::string interim;
  for (std::size_t part = 0; part < chunks.size(); ++part) {
    const auto five = request_five(gateway, chunk_request(agent, persona, options, chunks[part], part, chunks.size()),
                                   persona.discipline, options);
    interim += "Part " + std::to_string(part + 1) + ":\n";
    for (const auto& r : five) interim += std::to_string(r.index) + ". " + r.text + "\n";
  }
  std::string user = render_agent_header(agent) + "\nInterim reflections:\n" + interim + "\n" + std::string(kConsolidate);
  return request_five(gateway, make_request(agent, persona, options, std::move(user), "/final"), persona.discipline,
                      options);
}

std::vector<Reflection> condense_agent(const CharacterAgent& agent, Gateway& gateway,
                                       const ReflectionOptions& options) {
  std::vector<Reflection> all;
  for (const auto& persona : expert_personas()) {
    std::vector<Reflection> five;
    try {
      five = request_five(gateway, render_reflection_prompt(agent, persona, options), persona.discipline, options);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::OverBudget) throw;
      five = chunked_condense(agent, persona, gateway, options);
    }
    all.insert(all.end(), five.begin(), five.end());
  }
  return all;
}

json to_json(const Reflection& r) {
  return json{{"discipline", to_string(r.discipline)}, {"index", r.index}, {"text", r.text}};
}

Reflection reflection_from_json(const json& j) {
  return {discipline_from_string(j.at("discipline").get<std::string>()), j.at("index").get<int>(),
          j.at("text").get<std::string>()};
}

std::filesystem::path reflections_path(const std::filesystem::path& agents_dir, const CharacterIdentity& identity) {
  return agents_dir / file_stem(identity.film_id) / (file_stem(identity.character) + ".reflections.json");
}

void save_reflections(const std::filesystem::path& agents_dir, const CharacterAgent& agent,
                      const std::vector<Reflection>& reflections) {
  json arr = json::array();
  for (const auto& r : reflections) arr.push_back(to_json(r));
  const json doc{{"agent_id", agent.agent_id()}, {"persona_version", kPersonaVersion}, {"reflections", arr}};
  atomic_write(reflections_path(agents_dir, agent.identity), doc.dump(2) + "\n");
}

std::vector<Reflection> load_reflections(const std::filesystem::path& agents_dir, const CharacterIdentity& identity) {
  const auto path = reflections_path(agents_dir, identity);
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::MissingReflections, identity.film_id + "/" + identity.character);
  }
  std::vector<Reflection> out;
  try {
    const json doc = json::parse(read_file(path));
    for (const auto& r : doc.at("reflections")) out.push_back(reflection_from_json(r));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MissingReflections, path.string() + ": " + e.what());
  }
  for (const auto& persona : expert_personas()) {
    const auto n = std::count_if(out.begin(), out.end(),
                                 [&](const Reflection& r) { return r.discipline == persona.discipline; });
    if (n != kReflectionsPerExpert) {
      throw Error(ErrorCode::MissingReflections, path.string() + ": expected 5 " +
                                                     std::string(to_string(persona.discipline)) + " reflections");
    }
  }
  return out;
}

std::pair<std::vector<Reflection>, bool> condense_and_store(const CharacterAgent& agent, Gateway& gateway,
                                                            const std::filesystem::path& agents_dir, bool force,
                                                            const ReflectionOptions& options) {
  if (!force && std::filesystem::exists(reflections_path(agents_dir, agent.identity))) {
    return {load_reflections(agents_dir, agent.identity), false};
  }
  auto reflections = condense_agent(agent, gateway, options);
  save_reflections(agents_dir, agent, reflections);
  return {std::move(reflections), true};
}

}  // namespace cine
