#include "cine/agent.hpp"

#include "cine/error.hpp"
#include "cine/util.hpp"

namespace cine {

using nlohmann::json;

std::string_view to_string(MemoryKind kind) { return kind == MemoryKind::Dialogue ? "Dialogue" : "Action"; }

std::vector<MemoryNode> build_memory_bank(const CharacterEvidence& evidence) {
  const auto& dl = evidence.dialogue_lines;
  const auto& am = evidence.action_mentions;
  if (dl.empty() && am.empty()) {
    throw Error(ErrorCode::EmptyEvidence, "no evidence for " + evidence.character);
  }
  std::vector<MemoryNode> bank;
  bank.reserve(dl.size() + am.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < dl.size() || j < am.size()) {
    const bool take_dialogue = j == am.size() || (i < dl.size() && dl[i].line_index <= am[j].line_index);
    const EvidenceLine& line = take_dialogue ? dl[i++] : am[j++];
    bank.push_back({take_dialogue ? MemoryKind::Dialogue : MemoryKind::Action, line.text, bank.size()});
  }
  return bank;
}

CharacterAgent build_agent(const CharacterIdentity& identity, int release_year, std::vector<MemoryNode> memory) {
  auto violation = [&](const std::string& what) {
    throw Error(ErrorCode::InvariantViolation, identity.film_id + "/" + identity.character + ": " + what);
  };
  if (identity.film_id.empty() || identity.character.empty() || identity.decade.empty()) {
    violation("incomplete identity");
  }
  if (identity.gender == Gender::Unknown) violation("gender unknown");
  if (memory.empty()) violation("empty memory bank");
  for (std::size_t k = 0; k < memory.size(); ++k) {
    if (trim(memory[k].text).empty()) violation("empty memory node text at " + std::to_string(k));
    if (k > 0 && memory[k].sequence_index <= memory[k - 1].sequence_index) {
      violation(memory[k].sequence_index == memory[k - 1].sequence_index ? "duplicate sequence_index"
                                                                          : "memory not sorted by sequence_index");
    }
  }
  if (decade_of(release_year) != identity.decade) violation("decade does not match release year");
  return CharacterAgent{identity, release_year, std::move(memory)};
}

json to_json(const MemoryNode& node) {
  return json{{"kind", to_string(node.kind)}, {"text", node.text}, {"sequence_index", node.sequence_index}};
}

json to_json(const CharacterAgent& agent) {
  json memory = json::array();
  for (const auto& n : agent.memory) memory.push_back(to_json(n));
  return json{{"identity", to_json(agent.identity)}, {"time_period", agent.time_period}, {"memory", std::move(memory)}};
}

CharacterAgent character_agent_from_json(const json& j) {
  std::vector<MemoryNode> memory;
  for (const auto& n : j.at("memory")) {
    const std::string kind = n.at("kind").get<std::string>();
    memory.push_back({kind == "Action" ? MemoryKind::Action : MemoryKind::Dialogue, n.at("text").get<std::string>(),
                      n.at("sequence_index").get<std::size_t>()});
  }
  return build_agent(character_identity_from_json(j.at("identity")), j.at("time_period").get<int>(),
                     std::move(memory));
}

std::filesystem::path agent_path(const std::filesystem::path& agents_dir, const CharacterIdentity& identity) {
  return agents_dir / file_stem(identity.film_id) / (file_stem(identity.character) + ".json");
}

void save_agent(const std::filesystem::path& agents_dir, const CharacterAgent& agent) {
  atomic_write(agent_path(agents_dir, agent.identity), to_json(agent).dump(2) + "\n");
}

CharacterAgent load_agent(const std::filesystem::path& path) {
  try {
    return character_agent_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

}  // namespace cine
