#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cine/corpus.hpp"
#include "cine/screenplay.hpp"

namespace cine {

enum class MemoryKind { Dialogue, Action };

std::string_view to_string(MemoryKind kind);

struct MemoryNode {
  MemoryKind kind = MemoryKind::Dialogue;
  std::string text;
  std::size_t sequence_index = 0;

  bool operator==(const MemoryNode&) const = default;
};

/// Immutable once built; construct through build_agent().
struct CharacterAgent {
  CharacterIdentity identity;
  int time_period = 0;  // film release year
  std::vector<MemoryNode> memory;

  std::string agent_id() const { return identity.film_id + "/" + identity.character; }
};

inline constexpr std::size_t kDefaultMinMemoryNodes = 10;

/// Interleaves dialogue and action evidence by source line into one
/// chronological stream numbered 0..n-1. Throws Error(EmptyEvidence).
std::vector<MemoryNode> build_memory_bank(const CharacterEvidence& evidence);

/// Throws Error(InvariantViolation) for an empty bank, unsorted or duplicate
/// sequence indices, empty node text, or an incomplete identity.
CharacterAgent build_agent(const CharacterIdentity& identity, int release_year, std::vector<MemoryNode> memory);

nlohmann::json to_json(const MemoryNode& node);
nlohmann::json to_json(const CharacterAgent& agent);
CharacterAgent character_agent_from_json(const nlohmann::json& j);

/// agents/<film_id>/<character stem>.json
std::filesystem::path agent_path(const std::filesystem::path& agents_dir, const CharacterIdentity& identity);
void save_agent(const std::filesystem::path& agents_dir, const CharacterAgent& agent);
CharacterAgent load_agent(const std::filesystem::path& path);

}  // namespace cine
