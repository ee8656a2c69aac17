#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cine/agent.hpp"
#include "cine/llm_gateway.hpp"

namespace cine {

enum class Discipline { Psychology, Linguistics, Sociology };

std::string_view to_string(Discipline d);
Discipline discipline_from_string(std::string_view s);

struct ExpertPersona {
  Discipline discipline;
  std::string system_instruction;
};

inline constexpr std::string_view kPersonaVersion = "experts-v1";
inline constexpr int kReflectionsPerExpert = 5;

/// The three experts, in the order they are run for every agent.
const std::array<ExpertPersona, 3>& expert_personas();

struct Reflection {
  Discipline discipline = Discipline::Psychology;
  int index = 1;  // 1..5
  std::string text;

  bool operator==(const Reflection&) const = default;
};

struct ReflectionOptions {
  std::string model_name;
  double temperature = 0.1;
  /// Memory blocks larger than this are condensed chunk by chunk.
  std::size_t chunk_chars = 40000;
  std::size_t max_reflection_chars = 2000;
};

/// Renders one memory node as "[<kind> <sequence_index>] <text>".
std::string render_memory_node(const MemoryNode& node);

/// Name, age and time period only; gender is deliberately left out so that
/// nothing downstream can condition on it.
std::string render_agent_header(const CharacterAgent& agent);

/// System message = persona instruction; user message = header, the full
/// memory bank and the five-reflection instruction. Throws Error(OverBudget)
/// when the rendered bank exceeds options.chunk_chars and
/// Error(InvariantViolation) for an empty bank.
ChatRequest render_reflection_prompt(const CharacterAgent& agent, const ExpertPersona& persona,
                                     const ReflectionOptions& options = {});

/// Extracts items "1." .. "5." in order; continuation lines are folded into
/// a single paragraph. Throws Error(CountMismatch) unless there are exactly
/// five items numbered 1-5, and Error(InvariantViolation) when an item is
/// longer than max_chars.
std::vector<Reflection> parse_reflections(std::string_view content, Discipline discipline,
                                          std::size_t max_chars = 2000);

/// Contiguous runs of nodes whose rendered size stays within chunk_chars. A
/// node is never split; an oversized node becomes a chunk of its own.
std::vector<std::span<const MemoryNode>> chunk_memory(std::span<const MemoryNode> memory, std::size_t chunk_chars);

/// Per-chunk interim reflections followed by a consolidation pass down to
/// exactly five. With a single chunk this is the plain single-prompt path.
std::vector<Reflection> chunked_condense(const CharacterAgent& agent, const ExpertPersona& persona, Gateway& gateway,
                                         const ReflectionOptions& options = {});

/// 15 reflections, experts run in order. Chunking kicks in per expert when
/// the bank is too large.
std::vector<Reflection> condense_agent(const CharacterAgent& agent, Gateway& gateway,
                                       const ReflectionOptions& options = {});

nlohmann::json to_json(const Reflection& r);
Reflection reflection_from_json(const nlohmann::json& j);

std::filesystem::path reflections_path(const std::filesystem::path& agents_dir, const CharacterIdentity& identity);
void save_reflections(const std::filesystem::path& agents_dir, const CharacterAgent& agent,
                      const std::vector<Reflection>& reflections);
/// Throws Error(MissingReflections) if the file is absent or does not hold 5 per expert.
std::vector<Reflection> load_reflections(const std::filesystem::path& agents_dir, const CharacterIdentity& identity);

/// Loads persisted reflections unless `force`, otherwise condenses and saves.
/// Returns the reflections and whether the gateway was used.
std::pair<std::vector<Reflection>, bool> condense_and_store(const CharacterAgent& agent, Gateway& gateway,
                                                            const std::filesystem::path& agents_dir, bool force,
                                                            const ReflectionOptions& options = {});

}  // namespace cine
