#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cine {

enum class ElementKind { SceneHeading, Action, CharacterCue, Dialogue, Transition };

std::string_view to_string(ElementKind kind);
ElementKind element_kind_from_string(std::string_view name);

struct ScriptElement {
  ElementKind kind = ElementKind::Action;
  std::string text;
  std::size_t scene_index = 0;
  std::size_t line_index = 0;
  std::optional<std::string> speaker;  // Dialogue only

  bool operator==(const ScriptElement&) const = default;
};

struct Screenplay {
  std::string film_id;
  std::vector<ScriptElement> elements;
  std::set<std::string> character_cues;
  /// Recoverable parse problems (e.g. a cue with no dialogue, reclassified as Action).
  std::vector<std::string> warnings;
};

/// One piece of evidence: the source line it came from and its text.
struct EvidenceLine {
  std::size_t line_index = 0;
  std::string text;

  bool operator==(const EvidenceLine&) const = default;
};

struct CharacterEvidence {
  std::string character;
  std::vector<EvidenceLine> dialogue_lines;
  std::vector<EvidenceLine> action_mentions;
};

/// Cue decorations recognised by name. Any other trailing "(...)" group is
/// stripped as well; this list exists so callers can document what they expect.
inline constexpr std::string_view kKnownCueExtensions[] = {
    "(V.O.)", "(O.S.)", "(O.C.)", "(CONT'D)", "(CONT.)", "(CONTD)", "(CONTINUING)", "(PRE-LAP)", "(ON PHONE)", "(FILTERED)"};

/// Uppercases, strips trailing parentheticals, trims. Idempotent.
/// Throws Error(EmptyAfterNormalization) when nothing but decoration remains.
std::string normalize_character_name(std::string_view cue_text);

/// Classifies raw LF-or-CRLF screenplay text, one pass, top to bottom:
///
///  - SceneHeading: line starts with INT., EXT., INT./EXT. or I/E.
///  - Transition:   uppercase line ending in "TO:"
///  - CharacterCue: uppercase, at most 40 characters, no terminal . ! ? or :,
///                  and the next line is non-blank and not a heading
///  - Dialogue:     the lines under a cue, up to a blank line, heading or new
///                  cue; one speech becomes one element whose text is the
///                  lines joined with single spaces
///  - Action:       everything else
///
/// A line that looks like a cue but has nothing to say under it is kept as
/// Action and reported in Screenplay::warnings. scene_index is 0 before the
/// first heading and increments at each heading.
Screenplay parse_screenplay(std::string_view source_text, std::string film_id);

/// Reads the pre-tagged JSON layout:
///   { "film_id", "scenes": [ { "heading", "elements": [
///       {"type":"dialogue","character","text"} | {"type":"action","text"} ] } ] }
/// Each dialogue entry expands to a CharacterCue and a Dialogue element;
/// line_index is the element's ordinal position.
Screenplay parse_tagged_screenplay(const nlohmann::json& doc);
Screenplay parse_tagged_screenplay(std::string_view json_text);

/// Dialogue spoken by `character` plus Action lines naming any alias (or the
/// character itself) as a whole word, case-insensitively.
/// Throws Error(UnknownCharacter) when neither channel has a match.
CharacterEvidence extract_character_evidence(const Screenplay& screenplay, const std::string& character,
                                             const std::set<std::string>& aliases);

nlohmann::json to_json(const ScriptElement& element);
nlohmann::json to_json(const Screenplay& screenplay);
nlohmann::json to_json(const CharacterEvidence& evidence);
ScriptElement script_element_from_json(const nlohmann::json& j);
Screenplay screenplay_from_json(const nlohmann::json& j);

}  // namespace cine
