#include <gtest/gtest.h>

#include <deque>
#include <random>

#include "cine/error.hpp"
#include "cine/reflection.hpp"
#include "cine/util.hpp"
#include "test_support.hpp"

using namespace cine;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorCode::IoError;
}

CharacterAgent maya() {
  const Screenplay sp = parse_screenplay(support::slurp(support::fixture("goldens/script_01.txt")), "script_01");
  CharacterIdentity id;
  id.film_id = "script_01";
  id.character = "MAYA";
  id.gender = Gender::F;
  id.age_at_release = 30;
  id.decade = "1990s";
  id.credited_as = "Maya";
  return build_agent(id, 1995, build_memory_bank(extract_character_evidence(sp, "MAYA", {"Maya"})));
}

CharacterAgent synthetic_agent(std::size_t nodes, std::size_t text_len, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  CharacterIdentity id;
  id.film_id = "synthetic";
  id.character = "AGENT" + std::to_string(seed);
  id.gender = Gender::M;
  id.age_at_release = 40;
  id.decade = "2000s";
  std::vector<MemoryNode> memory;
  for (std::size_t i = 0; i < nodes; ++i) {
    const std::size_t len = 1 + rng() % text_len;
    std::string text(len, 'a' + static_cast<char>(rng() % 26));
    memory.push_back({rng() % 2 ? MemoryKind::Dialogue : MemoryKind::Action, text, i});
  }
  return build_agent(id, 2004, memory);
}

std::string render_request(const ChatRequest& r) {
  return "tag: " + r.request_tag + "\ntemperature: " + std::to_string(r.temperature) + "\n\n" + r.concatenated() + "\n";
}

class RecordingProvider final : public Provider {
 public:
  explicit RecordingProvider(std::deque<std::string> script) : script_(std::move(script)) {}
  std::string name() const override { return "recording"; }
  std::string send(const ChatRequest& r) override {
    tags.push_back(r.request_tag);
    texts.push_back(r.concatenated());
    if (script_.empty()) throw Error(ErrorCode::TransportError, "script exhausted");
    auto next = script_.front();
    script_.pop_front();
    return next;
  }
  std::vector<std::string> tags;
  std::vector<std::string> texts;

 private:
  std::deque<std::string> script_;
};

std::size_t rendered_total(const std::vector<MemoryNode>& memory) {
  std::size_t n = 0;
  for (const auto& node : memory) n += render_memory_node(node).size() + 1;
  return n;
}

const std::string kFive = "1. A\n2. B\n3. C\n4. D\n5. E";

GatewayConfig quiet() {
  GatewayConfig cfg;
  cfg.max_in_flight = 1;
  return cfg;
}

}  // namespace

// ---- personas ----

TEST(Personas, ThreeFixedExpertsInOrder) {
  const auto& p = expert_personas();
  EXPECT_EQ(p[0].discipline, Discipline::Psychology);
  EXPECT_EQ(p[1].discipline, Discipline::Linguistics);
  EXPECT_EQ(p[2].discipline, Discipline::Sociology);
  for (const auto& persona : p) {
    EXPECT_FALSE(persona.system_instruction.empty());
    EXPECT_EQ(discipline_from_string(to_string(persona.discipline)), persona.discipline);
  }
  EXPECT_NE(p[0].system_instruction, p[1].system_instruction);
  EXPECT_EQ(kPersonaVersion, "experts-v1");
}

// ---- prompt rendering ----

TEST(ReflectionPrompt, MayaGoldenPerExpert) {
  const auto agent = maya();
  std::string all;
  for (const auto& persona : expert_personas()) all += render_request(render_reflection_prompt(agent, persona));
  EXPECT_EQ(all, support::golden("reflection_prompts_MAYA.txt", all));
}

TEST(ReflectionPrompt, StructureAndPurity) {
  const auto agent = maya();
  const auto& persona = expert_personas()[0];
  const auto a = render_reflection_prompt(agent, persona);
  const auto b = render_reflection_prompt(agent, persona);
  EXPECT_EQ(a.concatenated(), b.concatenated());
  ASSERT_EQ(a.messages.size(), 2u);
  EXPECT_EQ(a.messages[0].role, Role::System);
  EXPECT_EQ(a.messages[0].content, persona.system_instruction);
  EXPECT_DOUBLE_EQ(a.temperature, 0.1);
  const std::string& user = a.messages[1].content;
  EXPECT_TRUE(user.starts_with("Name: Maya\nAge: 30\nTime period: 1995\n"));
  std::size_t last = 0;
  for (const auto& node : agent.memory) {
    const auto pos = user.find(render_memory_node(node) + "\n");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_GT(pos, last);
    last = pos;
  }
  EXPECT_NE(user.find("exactly five"), std::string::npos);
  for (const char* absent : {"Gender", "female", "woman", "Response:", "Question"}) {
    EXPECT_EQ(a.concatenated().find(absent), std::string::npos) << absent;
  }
}

TEST(ReflectionPrompt, NodeRendering) {
  EXPECT_EQ(render_memory_node({MemoryKind::Dialogue, "We leave at dawn.", 1}), "[Dialogue 1] We leave at dawn.");
  EXPECT_EQ(render_memory_node({MemoryKind::Action, "Maya pours coffee.", 0}), "[Action 0] Maya pours coffee.");
}

TEST(ReflectionPrompt, PreconditionsAndBudget) {
  auto agent = maya();
  ReflectionOptions small;
  small.chunk_chars = 40;
  EXPECT_EQ(code_of([&] { render_reflection_prompt(agent, expert_personas()[0], small); }), ErrorCode::OverBudget);
  agent.memory.clear();
  EXPECT_EQ(code_of([&] { render_reflection_prompt(agent, expert_personas()[0]); }), ErrorCode::InvariantViolation);
}

// ---- parsing ----

TEST(ParseReflections, FivePlainItems) {
  const auto r = parse_reflections(kFive, Discipline::Linguistics);
  ASSERT_EQ(r.size(), 5u);
  const char* want[] = {"A", "B", "C", "D", "E"};
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(r[i].text, want[i]);
    EXPECT_EQ(r[i].index, i + 1);
    EXPECT_EQ(r[i].discipline, Discipline::Linguistics);
  }
}

TEST(ParseReflections, MultiLineBodiesGolden) {
  const auto r = parse_reflections(support::slurp(support::fixture("reflections/multiline_reply.txt")),
                                   Discipline::Psychology);
  json arr = json::array();
  for (const auto& x : r) {
    arr.push_back(to_json(x));
    EXPECT_EQ(x.text.find('\n'), std::string::npos);
  }
  const std::string actual = arr.dump(2) + "\n";
  EXPECT_EQ(actual, support::golden("reflections_multiline.json", actual));
}

TEST(ParseReflections, CountMismatches) {
  EXPECT_EQ(code_of([] { parse_reflections("1. A\n2. B\n3. C\n4. D", Discipline::Sociology); }),
            ErrorCode::CountMismatch);
  EXPECT_EQ(code_of([] { parse_reflections(kFive + "\n6. F", Discipline::Sociology); }), ErrorCode::CountMismatch);
  EXPECT_EQ(code_of([] { parse_reflections("1. A\n2. B\n4. C\n3. D\n5. E", Discipline::Sociology); }),
            ErrorCode::CountMismatch);
  EXPECT_EQ(code_of([] { parse_reflections("", Discipline::Sociology); }), ErrorCode::CountMismatch);
  EXPECT_EQ(code_of([] { parse_reflections("no list at all", Discipline::Sociology); }), ErrorCode::CountMismatch);
}

TEST(ParseReflections, LengthBound) {
  const std::string long_item = "1. " + std::string(2001, 'x') + "\n2. B\n3. C\n4. D\n5. E";
  EXPECT_EQ(code_of([&] { parse_reflections(long_item, Discipline::Psychology); }), ErrorCode::InvariantViolation);
  const std::string at_limit = "1. " + std::string(2000, 'x') + "\n2. B\n3. C\n4. D\n5. E";
  EXPECT_EQ(parse_reflections(at_limit, Discipline::Psychology)[0].text.size(), 2000u);
  EXPECT_EQ(code_of([&] { parse_reflections(kFive, Discipline::Psychology, 0); }), ErrorCode::InvariantViolation);
}

TEST(ParseReflections, MarkdownNumberingVariants) {
  const auto r = parse_reflections("**1.** A\n## 2. B\n3) C\n  4. D\n* 5. E", Discipline::Psychology);
  ASSERT_EQ(r.size(), 5u);
  EXPECT_EQ(r[0].text, "A");
  EXPECT_EQ(r[2].text, "C");
  EXPECT_EQ(r[4].text, "E");
}

// ---- chunking ----

TEST(ChunkMemory, FuzzedBanksNeverSplitNodes) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const auto agent = synthetic_agent(1 + rng() % 80, 1 + rng() % 120, rng());
    const std::size_t budget = 10 + rng() % 600;
    const auto chunks = chunk_memory(agent.memory, budget);
    std::size_t next = 0;
    for (std::size_t c = 0; c < chunks.size(); ++c) {
      ASSERT_FALSE(chunks[c].empty());
      std::size_t size = 0;
      for (const auto& node : chunks[c]) {
        ASSERT_EQ(&node, &agent.memory[next]);
        ++next;
        size += render_memory_node(node).size() + 1;
      }
      if (chunks[c].size() > 1) ASSERT_LE(size, budget);
      if (c + 1 < chunks.size()) {
        // Greedy: the next node would not have fit.
        ASSERT_GT(size + render_memory_node(chunks[c + 1].front()).size() + 1, budget);
      }
    }
    ASSERT_EQ(next, agent.memory.size());
  }
}

TEST(ChunkMemory, OversizedNodeIsItsOwnChunk) {
  std::vector<MemoryNode> memory{{MemoryKind::Action, "a", 0},
                                 {MemoryKind::Action, std::string(500, 'b'), 1},
                                 {MemoryKind::Action, "c", 2}};
  const auto chunks = chunk_memory(memory, 100);
  ASSERT_EQ(chunks.size(), 3u);
  EXPECT_EQ(chunks[1].size(), 1u);
  EXPECT_TRUE(chunk_memory({}, 100).empty());
}

TEST(ChunkedCondense, SingleChunkMatchesPlainPath) {
  const auto agent = maya();
  for (const auto& persona : expert_personas()) {
    Gateway g1(std::make_shared<MockProvider>(7, Rulebook{}), quiet(), nullptr, [](Seconds) {});
    Gateway g2(std::make_shared<MockProvider>(7, Rulebook{}), quiet(), nullptr, [](Seconds) {});
    const auto plain = parse_reflections(g1.complete(render_reflection_prompt(agent, persona)).content,
                                         persona.discipline);
    EXPECT_EQ(chunked_condense(agent, persona, g2), plain);
  }
}

TEST(ChunkedCondense, TwoChunksConsolidateToFive) {
  const auto agent = synthetic_agent(20, 30, 3);
  ReflectionOptions opts;
  opts.chunk_chars = rendered_total(agent.memory) / 2 + 40;
  const auto chunks = chunk_memory(agent.memory, opts.chunk_chars);
  ASSERT_EQ(chunks.size(), 2u);
  auto provider = std::make_shared<RecordingProvider>(std::deque<std::string>{kFive, kFive, "1. V\n2. W\n3. X\n4. Y\n5. Z"});
  Gateway gw(provider, quiet(), nullptr, [](Seconds) {});
  const auto five = chunked_condense(agent, expert_personas()[1], gw, opts);
  ASSERT_EQ(five.size(), 5u);
  EXPECT_EQ(five[4].text, "Z");
  ASSERT_EQ(provider->tags.size(), 3u);
  EXPECT_NE(provider->tags[0].find("/part1"), std::string::npos);
  EXPECT_NE(provider->tags[1].find("/part2"), std::string::npos);
  EXPECT_NE(provider->tags[2].find("/final"), std::string::npos);
  EXPECT_NE(provider->texts[2].find("Part 2:\n1. A"), std::string::npos);
  // Each part prompt carries only its own nodes.
  EXPECT_NE(provider->texts[0].find(render_memory_node(chunks[0].back())), std::string::npos);
  EXPECT_EQ(provider->texts[0].find(render_memory_node(chunks[1].front())), std::string::npos);
}

TEST(CondenseAgent, OverBudgetBankFallsBackToChunksWithMock) {
  const auto agent = synthetic_agent(60, 50, 9);
  ReflectionOptions opts;
  opts.chunk_chars = 700;
  auto provider = std::make_shared<MockProvider>(7, Rulebook{});
  Gateway gw(provider, quiet(), nullptr, [](Seconds) {});
  const auto all = condense_agent(agent, gw, opts);
  ASSERT_EQ(all.size(), 15u);
  const auto parts = chunk_memory(agent.memory, opts.chunk_chars).size();
  ASSERT_GT(parts, 1u);
  EXPECT_EQ(provider->calls(), static_cast<int>(3 * (parts + 1)));
}

// ---- condense_agent ----

TEST(CondenseAgent, SeededMockGolden) {
  Gateway gw(std::make_shared<MockProvider>(derive_seed(7, "mock"), Rulebook{}), quiet(), nullptr, [](Seconds) {});
  const auto all = condense_agent(maya(), gw);
  ASSERT_EQ(all.size(), 15u);
  json arr = json::array();
  for (const auto& r : all) arr.push_back(to_json(r));
  const std::string actual = arr.dump(2) + "\n";
  EXPECT_EQ(actual, support::golden("reflections_MAYA_seed7.json", actual));
  for (int i = 0; i < 15; ++i) {
    EXPECT_EQ(all[i].discipline, expert_personas()[i / 5].discipline);
    EXPECT_EQ(all[i].index, i % 5 + 1);
    EXPECT_FALSE(all[i].text.empty());
    EXPECT_LE(all[i].text.size(), 2000u);
  }
}

TEST(CondenseAgent, DeterministicForSameSeed) {
  Gateway g1(std::make_shared<MockProvider>(7, Rulebook{}), quiet(), nullptr, [](Seconds) {});
  Gateway g2(std::make_shared<MockProvider>(7, Rulebook{}), quiet(), nullptr, [](Seconds) {});
  Gateway g3(std::make_shared<MockProvider>(8, Rulebook{}), quiet(), nullptr, [](Seconds) {});
  EXPECT_EQ(condense_agent(maya(), g1), condense_agent(maya(), g2));
  EXPECT_NE(condense_agent(maya(), g1), condense_agent(maya(), g3));
}

TEST(CondenseAgent, MalformedReplyIsRetriedOnceWithReminder) {
  auto provider = std::make_shared<RecordingProvider>(
      std::deque<std::string>{"1. only\n2. two", kFive, kFive, kFive});
  Gateway gw(provider, quiet(), nullptr, [](Seconds) {});
  const auto all = condense_agent(maya(), gw);
  EXPECT_EQ(all.size(), 15u);
  ASSERT_EQ(provider->tags.size(), 4u);
  EXPECT_TRUE(provider->tags[1].ends_with("/retry"));
  EXPECT_NE(provider->texts[1].find("Format reminder"), std::string::npos);
}

TEST(CondenseAgent, SecondMalformedReplyIsFatalForAgent) {
  auto provider = std::make_shared<RecordingProvider>(std::deque<std::string>{"1. A", "1. A\n2. B"});
  Gateway gw(provider, quiet(), nullptr, [](Seconds) {});
  EXPECT_EQ(code_of([&] { condense_agent(maya(), gw); }), ErrorCode::CountMismatch);
  EXPECT_EQ(provider->tags.size(), 2u);
}

// ---- persistence ----

TEST(ReflectionStore, IdempotentWithoutForce) {
  support::TempDir dir("refl");
  auto provider = std::make_shared<MockProvider>(7, Rulebook{});
  Gateway gw(provider, quiet(), nullptr, [](Seconds) {});
  const auto agent = maya();
  const auto [first, used_first] = condense_and_store(agent, gw, dir.path(), false);
  EXPECT_TRUE(used_first);
  EXPECT_EQ(provider->calls(), 3);
  EXPECT_TRUE(std::filesystem::exists(reflections_path(dir.path(), agent.identity)));
  const auto [second, used_second] = condense_and_store(agent, gw, dir.path(), false);
  EXPECT_FALSE(used_second);
  EXPECT_EQ(provider->calls(), 3);
  EXPECT_EQ(second, first);
  const auto [third, used_third] = condense_and_store(agent, gw, dir.path(), true);
  EXPECT_TRUE(used_third);
  EXPECT_EQ(provider->calls(), 6);
  EXPECT_EQ(third, first);
}

TEST(ReflectionStore, FailingProviderLeavesNoFile) {
  support::TempDir dir("refl");
  auto provider = std::make_shared<RecordingProvider>(std::deque<std::string>{});
  Gateway gw(provider, quiet(), nullptr, [](Seconds) {});
  const auto agent = maya();
  EXPECT_EQ(code_of([&] { condense_and_store(agent, gw, dir.path(), false); }), ErrorCode::TransportError);
  EXPECT_FALSE(std::filesystem::exists(reflections_path(dir.path(), agent.identity)));
  EXPECT_EQ(code_of([&] { load_reflections(dir.path(), agent.identity); }), ErrorCode::MissingReflections);
}

TEST(ReflectionStore, IncompleteFileIsRejected) {
  support::TempDir dir("refl");
  const auto agent = maya();
  std::vector<Reflection> partial = parse_reflections(kFive, Discipline::Psychology);
  save_reflections(dir.path(), agent, partial);
  EXPECT_EQ(code_of([&] { load_reflections(dir.path(), agent.identity); }), ErrorCode::MissingReflections);
  atomic_write(reflections_path(dir.path(), agent.identity), "{not json");
  EXPECT_EQ(code_of([&] { load_reflections(dir.path(), agent.identity); }), ErrorCode::MissingReflections);
}
