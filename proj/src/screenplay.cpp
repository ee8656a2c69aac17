#include "cine/screenplay.hpp"

#include <algorithm>
#include <cctype>

#include "cine/error.hpp"
#include "cine/util.hpp"

namespace cine {

using nlohmann::json;

namespace {

constexpr std::size_t kMaxCueLength = 40;

// Name suffixes that legitimately end a cue with a period ("SAM JR.").
constexpr std::string_view kNameAbbreviations[] = {"JR.", "SR.", "DR.", "MR.", "MRS.", "MS.", "ST.", "DET.", "SGT.", "LT."};

bool is_blank(std::string_view line) { return trim(line).empty(); }

bool is_heading(std::string_view line) {
  const std::string t = trim(line);
  return t.starts_with("INT.") || t.starts_with("EXT.") || t.starts_with("INT./EXT.") || t.starts_with("I/E.");
}

/// Removes every trailing "(...)" group. Returns the trimmed remainder.
std::string strip_trailing_parentheticals(std::string_view text) {
  std::string s = trim(text);
  while (!s.empty() && s.back() == ')') {
    const auto open = s.rfind('(');
    if (open == std::string::npos) break;
    s = trim(std::string_view(s).substr(0, open));
  }
  return s;
}

bool is_uppercase_text(std::string_view s) {
  bool has_letter = false;
  for (char c : s) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::islower(uc)) return false;
    if (std::isupper(uc)) has_letter = true;
  }
  return has_letter;
}

bool is_transition(std::string_view line) {
  const std::string t = trim(line);
  return is_uppercase_text(t) && t.ends_with("TO:");
}

bool has_terminal_punctuation(const std::string& name) {
  if (name.empty()) return false;
  const char last = name.back();
  if (last == ':' || last == '!' || last == '?') return true;
  if (last != '.') return false;
  const auto words = split_words(name);
  const std::string& tail = words.back();
  return std::find(std::begin(kNameAbbreviations), std::end(kNameAbbreviations), tail) ==
         std::end(kNameAbbreviations);
}

/// Shape test only; whether the cue actually has dialogue is checked by the caller.
bool looks_like_cue(std::string_view line) {
  const std::string t = trim(line);
  if (t.empty() || t.size() > kMaxCueLength) return false;
  if (is_heading(t) || is_transition(t)) return false;
  const std::string name = strip_trailing_parentheticals(t);
  return is_uppercase_text(name) && !has_terminal_punctuation(name);
}

}  // namespace

std::string_view to_string(ElementKind kind) {
  switch (kind) {
    case ElementKind::SceneHeading: return "SceneHeading";
    case ElementKind::Action: return "Action";
    case ElementKind::CharacterCue: return "CharacterCue";
    case ElementKind::Dialogue: return "Dialogue";
    case ElementKind::Transition: return "Transition";
  }
  return "Action";
}

ElementKind element_kind_from_string(std::string_view name) {
  for (auto k : {ElementKind::SceneHeading, ElementKind::Action, ElementKind::CharacterCue, ElementKind::Dialogue,
                 ElementKind::Transition}) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorCode::InvalidTaggedScript, "unknown element kind '" + std::string(name) + "'");
}

std::string normalize_character_name(std::string_view cue_text) {
  std::string name = to_upper(strip_trailing_parentheticals(cue_text));
  if (name.empty()) {
    throw Error(ErrorCode::EmptyAfterNormalization, "cue '" + std::string(cue_text) + "' has no name");
  }
  return name;
}

Screenplay parse_screenplay(std::string_view source_text, std::string film_id) {
  const std::vector<std::string> lines = split_lines(source_text);
  if (std::all_of(lines.begin(), lines.end(), [](const std::string& l) { return is_blank(l); })) {
    throw Error(ErrorCode::EmptyInput, "screenplay '" + film_id + "' has no content");
  }

  Screenplay play;
  play.film_id = std::move(film_id);
  std::size_t scene = 0;

  auto emit = [&](ElementKind kind, std::string text, std::size_t line, std::optional<std::string> speaker = {}) {
    play.elements.push_back(ScriptElement{kind, std::move(text), scene, line, std::move(speaker)});
  };

  std::size_t i = 0;
  while (i < lines.size()) {
    const std::string& raw = lines[i];
    if (is_blank(raw)) {
      ++i;
      continue;
    }
    const std::string text = trim(raw);

    if (is_heading(text)) {
      ++scene;
      emit(ElementKind::SceneHeading, text, i);
      ++i;
      continue;
    }
    if (is_transition(text)) {
      emit(ElementKind::Transition, text, i);
      ++i;
      continue;
    }
    if (looks_like_cue(text)) {
      const bool has_dialogue = i + 1 < lines.size() && !is_blank(lines[i + 1]) && !is_heading(lines[i + 1]);
      if (!has_dialogue) {
        play.warnings.push_back("line " + std::to_string(i) + ": cue '" + text +
                                "' has no dialogue; kept as action");
        emit(ElementKind::Action, text, i);
        ++i;
        continue;
      }
      const std::string speaker = normalize_character_name(text);
      emit(ElementKind::CharacterCue, text, i);

      // The line right under a cue is always dialogue; further lines continue
      // the speech until a blank line or another structural line.
      std::size_t j = i + 1;
      std::string speech = trim(lines[j]);
      ++j;
      while (j < lines.size() && !is_blank(lines[j]) && !is_heading(lines[j]) && !is_transition(lines[j])) {
        const bool next_is_cue =
            looks_like_cue(lines[j]) && j + 1 < lines.size() && !is_blank(lines[j + 1]) && !is_heading(lines[j + 1]);
        if (next_is_cue) break;
        speech += ' ';
        speech += trim(lines[j]);
        ++j;
      }
      emit(ElementKind::Dialogue, collapse_whitespace(speech), i + 1, speaker);
      play.character_cues.insert(speaker);
      i = j;
      continue;
    }
    emit(ElementKind::Action, text, i);
    ++i;
  }
  return play;
}

Screenplay parse_tagged_screenplay(const json& doc) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidTaggedScript, msg); };
  if (!doc.is_object()) fail("document is not a JSON object");
  if (!doc.contains("film_id") || !doc["film_id"].is_string()) fail("missing string field 'film_id'");
  if (!doc.contains("scenes") || !doc["scenes"].is_array()) fail("missing array field 'scenes'");

  Screenplay play;
  play.film_id = doc["film_id"].get<std::string>();
  std::size_t scene = 0;
  std::size_t ordinal = 0;

  const json& scenes = doc["scenes"];
  for (std::size_t s = 0; s < scenes.size(); ++s) {
    const json& sc = scenes[s];
    const std::string where_scene = "scene " + std::to_string(s);
    if (!sc.is_object()) fail(where_scene + ": not an object");
    const std::string heading = trim(sc.value("heading", std::string{}));
    if (!heading.empty()) {
      ++scene;
      play.elements.push_back({ElementKind::SceneHeading, heading, scene, ordinal++, std::nullopt});
    }
    if (!sc.contains("elements")) continue;
    if (!sc["elements"].is_array()) fail(where_scene + ": 'elements' is not an array");
    const json& elems = sc["elements"];
    for (std::size_t e = 0; e < elems.size(); ++e) {
      const std::string where = where_scene + " element " + std::to_string(e);
      const json& el = elems[e];
      if (!el.is_object() || !el.contains("type") || !el["type"].is_string()) fail(where + ": missing 'type'");
      const std::string type = el["type"].get<std::string>();
      if (!el.contains("text") || !el["text"].is_string()) fail(where + ": missing 'text'");
      const std::string text = collapse_whitespace(el["text"].get<std::string>());
      if (text.empty()) fail(where + ": empty text");
      if (type == "dialogue") {
        if (!el.contains("character") || !el["character"].is_string()) fail(where + ": dialogue without 'character'");
        const std::string cue = trim(el["character"].get<std::string>());
        std::string speaker;
        try {
          speaker = normalize_character_name(cue);
        } catch (const Error&) {
          fail(where + ": character name is empty");
        }
        play.elements.push_back({ElementKind::CharacterCue, cue, scene, ordinal++, std::nullopt});
        play.elements.push_back({ElementKind::Dialogue, text, scene, ordinal++, speaker});
        play.character_cues.insert(speaker);
      } else if (type == "action") {
        play.elements.push_back({ElementKind::Action, text, scene, ordinal++, std::nullopt});
      } else {
        fail(where + ": unknown element type '" + type + "'");
      }
    }
  }
  if (play.elements.empty()) throw Error(ErrorCode::EmptyInput, "tagged screenplay '" + play.film_id + "' is empty");
  return play;
}

Screenplay parse_tagged_screenplay(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::InvalidTaggedScript, std::string("malformed JSON: ") + e.what());
  }
  return parse_tagged_screenplay(doc);
}

CharacterEvidence extract_character_evidence(const Screenplay& screenplay, const std::string& character,
                                             const std::set<std::string>& aliases) {
  CharacterEvidence ev;
  ev.character = character;
  std::vector<std::string> names(aliases.begin(), aliases.end());
  names.push_back(character);

  for (const auto& el : screenplay.elements) {
    if (el.kind == ElementKind::Dialogue && el.speaker == character) {
      ev.dialogue_lines.push_back({el.line_index, el.text});
    } else if (el.kind == ElementKind::Action) {
      const bool mentioned = std::any_of(names.begin(), names.end(),
                                         [&](const std::string& n) { return contains_word_icase(el.text, n); });
      if (mentioned) ev.action_mentions.push_back({el.line_index, el.text});
    }
  }
  if (ev.dialogue_lines.empty() && ev.action_mentions.empty()) {
    throw Error(ErrorCode::UnknownCharacter,
                "no dialogue or action mentions for '" + character + "' in " + screenplay.film_id);
  }
  return ev;
}

json to_json(const ScriptElement& element) {
  json j{{"kind", to_string(element.kind)},
         {"text", element.text},
         {"scene_index", element.scene_index},
         {"line_index", element.line_index}};
  if (element.speaker) j["speaker"] = *element.speaker;
  return j;
}

json to_json(const Screenplay& screenplay) {
  json elements = json::array();
  for (const auto& el : screenplay.elements) elements.push_back(to_json(el));
  return json{{"film_id", screenplay.film_id},
              {"elements", std::move(elements)},
              {"character_cues", screenplay.character_cues},
              {"warnings", screenplay.warnings}};
}

json to_json(const CharacterEvidence& evidence) {
  auto lines = [](const std::vector<EvidenceLine>& v) {
    json a = json::array();
    for (const auto& l : v) a.push_back({{"line_index", l.line_index}, {"text", l.text}});
    return a;
  };
  return json{{"character", evidence.character},
              {"dialogue_lines", lines(evidence.dialogue_lines)},
              {"action_mentions", lines(evidence.action_mentions)}};
}

ScriptElement script_element_from_json(const json& j) {
  ScriptElement el;
  el.kind = element_kind_from_string(j.at("kind").get<std::string>());
  el.text = j.at("text").get<std::string>();
  el.scene_index = j.at("scene_index").get<std::size_t>();
  el.line_index = j.at("line_index").get<std::size_t>();
  if (j.contains("speaker")) el.speaker = j["speaker"].get<std::string>();
  return el;
}

Screenplay screenplay_from_json(const json& j) {
  Screenplay play;
  play.film_id = j.at("film_id").get<std::string>();
  for (const auto& e : j.at("elements")) play.elements.push_back(script_element_from_json(e));
  for (const auto& el : play.elements) {
    if (el.speaker) play.character_cues.insert(*el.speaker);
  }
  if (j.contains("warnings")) play.warnings = j["warnings"].get<std::vector<std::string>>();
  return play;
}

}  // namespace cine
