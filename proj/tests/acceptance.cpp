#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "cine/agent.hpp"
#include "cine/error.hpp"
#include "cine/pipeline.hpp"
#include "cine/reflection.hpp"
#include "cine/screenplay.hpp"
#include "cine/stats.hpp"
#include "cine/survey.hpp"
#include "cine/util.hpp"
#include "fixture_run.hpp"
#include "prompt_oracle.hpp"
#include "script_generator.hpp"
#include "stats_oracle.hpp"
#include "test_support.hpp"

using namespace cine;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

/// Collects failed expectations for one criterion.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    failed_ |= !ok;
  }
  bool failed() const { return failed_; }
  int count() const { return count_; }
  const std::vector<std::string>& failures() const { return failures_; }
  std::string note;

 private:
  bool failed_ = false;
  int count_ = 0;
  std::vector<std::string> failures_;
};

Sleeper no_sleep() {
  return [](Seconds) {};
}

std::shared_ptr<MockProvider> fixture_mock() { return std::make_shared<MockProvider>(derive_seed(7, "mock"), Rulebook{}); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::vector<ScriptElement> load_elements(const std::string& golden) {
  std::vector<ScriptElement> out;
  for (const auto& j : json::parse(support::slurp(support::fixture("goldens/" + golden)))) {
    out.push_back(script_element_from_json(j));
  }
  return out;
}

// ---- 1: parser corpus ----

/// Every non-blank line belongs to exactly one element and dialogue is the
/// covered lines joined. Returns the first violation.
std::optional<std::string> partition_violation(const std::string& text, const Screenplay& sp) {
  const auto lines = split_lines(text);
  std::vector<int> owner(lines.size(), -1);
  for (std::size_t e = 0; e < sp.elements.size(); ++e) {
    const auto& el = sp.elements[e];
    if (el.line_index >= lines.size()) return "line index out of range";
    if (e > 0 && el.line_index <= sp.elements[e - 1].line_index) return "elements out of order";
    std::size_t end = el.line_index + 1;
    if (el.kind == ElementKind::Dialogue) {
      end = e + 1 < sp.elements.size() ? sp.elements[e + 1].line_index : lines.size();
      while (end > el.line_index + 1 && trim(lines[end - 1]).empty()) --end;
      std::string joined;
      for (std::size_t k = el.line_index; k < end; ++k) joined += (k > el.line_index ? " " : "") + trim(lines[k]);
      if (collapse_whitespace(joined) != el.text) return "dialogue text differs from its lines";
    } else if (trim(lines[el.line_index]) != el.text) {
      return "element text differs from its line";
    }
    for (std::size_t k = el.line_index; k < end; ++k) {
      if (owner[k] != -1) return fmt::format("line {} covered twice", k);
      owner[k] = static_cast<int>(e);
    }
  }
  for (std::size_t k = 0; k < lines.size(); ++k) {
    if (!trim(lines[k]).empty() && owner[k] == -1) return fmt::format("line {} not covered", k);
  }
  return std::nullopt;
}

/// Each Dialogue directly follows the cue naming its speaker.
std::optional<std::string> attribution_violation(const Screenplay& sp) {
  for (std::size_t e = 0; e < sp.elements.size(); ++e) {
    const auto& el = sp.elements[e];
    if (el.kind != ElementKind::Dialogue) continue;
    if (e == 0 || sp.elements[e - 1].kind != ElementKind::CharacterCue) return "dialogue without a cue";
    const auto& cue = sp.elements[e - 1];
    if (!el.speaker || *el.speaker != normalize_character_name(cue.text)) return "speaker does not match cue";
    if (cue.scene_index != el.scene_index) return "cue and dialogue in different scenes";
    if (!sp.character_cues.contains(*el.speaker)) return "speaker missing from cue index";
  }
  return std::nullopt;
}

void parser_corpus(Checks& c) {
  for (const char* name : {"script_01", "script_02", "script_03"}) {
    const std::string n(name);
    const Screenplay raw = parse_screenplay(support::slurp(support::fixture("goldens/" + n + ".txt")), n);
    c.expect(raw.elements == load_elements(n + ".elements.json"), n + " raw text differs from golden");
    const Screenplay tagged =
        parse_tagged_screenplay(std::string_view(support::slurp(support::fixture("goldens/" + n + ".tagged.json"))));
    c.expect(tagged.elements == load_elements(n + ".tagged.elements.json"), n + " tagged JSON differs from golden");
  }
  constexpr int kScripts = 1000;
  int violations = 0;
  for (int s = 0; s < kScripts; ++s) {
    support::ScriptGenerator gen(1000 + s);
    const auto g = gen.make();
    const Screenplay sp = parse_screenplay(g.text, "fuzz");
    std::optional<std::string> v;
    if (sp.elements != g.expected) v = "elements differ from generator";
    if (!v && sp.warnings.size() != g.expected_warnings) v = "warning count differs";
    if (!v) v = partition_violation(g.text, sp);
    if (!v) v = attribution_violation(sp);
    const Screenplay tsp = parse_tagged_screenplay(g.tagged);
    if (!v && tsp.elements != g.expected_tagged) v = "tagged elements differ from generator";
    if (!v) v = attribution_violation(tsp);
    if (v) {
      ++violations;
      c.expect(false, fmt::format("generated script {}: {}", s, *v));
    }
  }
  c.note = fmt::format("3 fixtures x 2 formats, {} generated scripts, {} violations", kScripts, violations);
}

// ---- 2: statistics oracles ----

void statistics_oracles(Checks& c) {
  int i = 0;
  for (const auto& w : support::kWelchOracle) {
    const auto r = welch_t({w.a, "a"}, {w.b, "b"});
    c.expect(std::fabs(r.statistic - w.t) <= 1e-9, fmt::format("welch case {} t {} vs {}", i, r.statistic, w.t));
    c.expect(r.df && std::fabs(*r.df - w.df) <= 1e-9, fmt::format("welch case {} df", i));
    ++i;
  }
  struct Row {
    double df, one_tail_05, two_tail_05;
  };
  // Published Student t critical values.
  const Row table[] = {{1, 6.314, 12.706}, {5, 2.015, 2.571}, {10, 1.812, 2.228}, {30, 1.697, 2.042}, {100, 1.660, 1.984}};
  for (const auto& r : table) {
    c.expect(std::fabs(student_t_quantile(0.95, r.df) - r.one_tail_05) <= 1e-3, fmt::format("t(0.95, {})", r.df));
    c.expect(std::fabs(student_t_quantile(0.975, r.df) - r.two_tail_05) <= 1e-3, fmt::format("t(0.975, {})", r.df));
    c.expect(std::fabs(student_t_cdf(r.two_tail_05, r.df) - 0.975) <= 1e-3, fmt::format("cdf at t(0.975, {})", r.df));
  }
  std::mt19937_64 rng(21);
  int cases = 0;
  for (std::size_t na = 2; na <= 8; ++na) {
    for (std::size_t nb = 2; nb <= 8; ++nb) {
      for (int trial = 0; trial < 11; ++trial, ++cases) {
        const int levels = 2 + static_cast<int>(rng() % 6);
        std::vector<double> a(na), b(nb);
        for (auto& x : a) x = static_cast<double>(rng() % levels);
        for (auto& x : b) x = static_cast<double>(rng() % levels);
        const auto [u, p] = support::mann_whitney_brute_force(a, b);
        const auto r = mann_whitney_u({a, "a"}, {b, "b"});
        c.expect(r.statistic == u, fmt::format("U for case {}", cases));
        c.expect(std::fabs(r.p_two_sided - p) <= 1e-12, fmt::format("MW p for case {}", cases));
      }
    }
  }
  c.expect(cases >= 500, "too few Mann-Whitney cases");
  bool rejected = false;
  try {
    mann_whitney_u({{1.0}, "a"}, {{1.0, 2.0}, "b"});
  } catch (const Error& e) {
    rejected = e.code() == ErrorCode::DegenerateSample;
  }
  c.expect(rejected, "a one-value sample was not rejected");
  c.note = fmt::format("20 Welch pairs, 5 table rows, {} Mann-Whitney cases", cases);
}

// ---- 3: prompt fidelity ----

std::vector<CharacterAgent> agents_in(const fs::path& agents_dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(agents_dir)) {
    const std::string name = e.path().filename().string();
    if (e.is_regular_file() && name.ends_with(".json") && !name.ends_with(".reflections.json")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<CharacterAgent> out;
  for (const auto& f : files) out.push_back(load_agent(f));
  return out;
}

void prompt_fidelity(Checks& c, const Pipeline& run) {
  const auto agents = agents_in(run.agents_dir());
  c.expect(agents.size() == 10, fmt::format("{} fixture agents, expected 10", agents.size()));
  for (const auto& agent : agents) {
    const auto reflections = load_reflections(run.agents_dir(), agent.identity);
    const std::string text = render_survey_prompt(agent, reflections, survey_items()).messages.at(0).content;
    const std::string id = agent.identity.film_id + "_" + agent.identity.character;
    c.expect(text == support::golden("prompts/survey_" + id + ".txt", text), id + " prompt differs from golden");
    c.expect(text.find(support::kExpectedStepsBlock) != std::string::npos, id + " lacks the four-step block");
    const std::string lower = to_lower(text);
    for (const char* word : {"gender", "female", "male", "woman", "sex:"}) {
      c.expect(lower.find(word) == std::string::npos, id + " prompt mentions " + word);
    }
    // The label itself, on its own line or after a colon.
    const std::string label(to_string(agent.identity.gender));
    c.expect(text.find(": " + label + "\n") == std::string::npos && text.find("\n" + label + "\n") == std::string::npos,
             id + " prompt carries the gender label");
  }
  c.note = fmt::format("{} agents", agents.size());
}

// ---- 4: end-to-end determinism ----

void determinism(Checks& c, const Pipeline& first, support::TempDir& second_dir) {
  auto cfg = support::fixture_run_config(second_dir.path());
  cfg.concurrency = 1;
  Pipeline second(cfg, nullptr, no_sleep());
  c.expect(second.run_all().exit_code == kExitOk, "second run exit code");
  for (const auto& name : support::deterministic_outputs()) {
    const std::string a = read_file(first.run_dir() / name);
    c.expect(a == read_file(second.run_dir() / name), name + " differs between runs");
    c.expect(a == support::slurp(support::fixture("goldens/pipeline/" + name)), name + " differs from golden");
  }
  c.note = "4 outputs identical across runs and equal to goldens";
}

// ---- 5: gender-gap plumbing ----

struct Behaviour {
  std::string script_marker;
  std::string trait;
  int answers[3];
};

// Female leads act out egalitarian behaviour, male leads traditional behaviour.
const Behaviour kFemaleBehaviour[] = {
    {"splits the overtime evenly across the whole crew", "Treats every colleague as an equal at work.", {1, 2, 1}},
    {"hands the promotion to the strongest candidate, a woman", "Rewards merit over who holds power.", {2, 1, 2}},
    {"insists her daughter apply to the university too", "Wants every child to get the same schooling.", {2, 2, 1}},
};
const Behaviour kMaleBehaviour[] = {
    {"tells the new hire the good jobs belong to the men", "Believes the best jobs are owed to men.", {5, 4, 4}},
    {"says politics is no business for a woman", "Sees leadership as a job for men.", {4, 5, 4}},
    {"pays his son's tuition but not his daughter's", "Puts sons' schooling ahead of daughters'.", {4, 4, 5}},
};

std::string reflection_reply(const std::string& trait) {
  std::string out;
  for (int k = 1; k <= 5; ++k) out += fmt::format("{}. {} Observation {}.\n", k, trait, k);
  return out;
}

std::string survey_reply(const int (&answers)[3]) {
  std::string out;
  for (int q = 0; q < 3; ++q) out += fmt::format("Question {}\nReasoning: Follows the notes.\nResponse: {}\n\n", q + 1, answers[q]);
  return out;
}

/// 30 films (ten per decade) with 7 or 6 leads each: 200 agents.
void write_gendered_corpus(const fs::path& dir) {
  const char* names[] = {"Alma", "Bruno", "Cora", "Dmitri", "Elsa", "Felix", "Greta"};
  const char* chatter[] = {"We should check the north road.", "Nobody answers the phone anymore.",
                           "Bring the ledger when you come.", "The rain will not stop tonight.",
                           "I counted the boxes twice.", "Tell them we open at nine."};
  const char* moves[] = {"crosses to the window.", "sets down a mug.", "reads the notice board.", "locks the drawer."};
  fs::create_directories(dir);
  json metadata = json::array();
  for (int film = 0; film < 30; ++film) {
    const int year = 1990 + 10 * (film / 10) + film % 10;
    const int leads = film < 20 ? 7 : 6;
    const std::string film_id = fmt::format("synthetic_{:02}", film);
    json actors = json::array();
    std::string script = "FADE IN:\n\n";
    for (int i = 0; i < leads; ++i) {
      const bool female = (film + i) % 2 == 0;
      const auto& b = (female ? kFemaleBehaviour : kMaleBehaviour)[(film * 7 + i) % 3];
      const std::string name = names[i];
      actors.push_back({{"actor", fmt::format("Actor {}-{}", film, i)},
                        {"character", name},
                        {"gender", female ? "F" : "M"},
                        {"birth_year", year - 25 - i}});
      script += fmt::format("INT. OFFICE {} - DAY\n\n{} {}.\n\n", i + 1, name, b.script_marker);
      for (const char* m : moves) script += fmt::format("{} {}\n\n", name, m);
      for (const char* line : chatter) script += fmt::format("{}\n{}\n\n", to_upper(name), line);
    }
    atomic_write(dir / (film_id + ".txt"), script);
    metadata.push_back({{"film_id", film_id},
                        {"title", fmt::format("Synthetic {}", film)},
                        {"release_year", year},
                        {"genres", json::array({"Drama"})},
                        {"credited_actors", actors},
                        {"imdb_votes", 1000 + film}});
  }
  atomic_write(dir / "metadata.json", metadata.dump(2));
}

void write_rulebook(const fs::path& path) {
  json rules = json::array();
  for (const auto* set : {kFemaleBehaviour, kMaleBehaviour}) {
    for (int v = 0; v < 3; ++v) {
      rules.push_back({{"marker", set[v].script_marker}, {"reply", reflection_reply(set[v].trait)}});
      rules.push_back({{"marker", set[v].trait}, {"reply", survey_reply(set[v].answers)}});
    }
  }
  atomic_write(path, rules.dump(2));
}

void gender_gap(Checks& c) {
  support::TempDir dir("accept_gap");
  write_gendered_corpus(dir.path() / "corpus");
  write_rulebook(dir.path() / "rules.json");
  RunConfig cfg;
  cfg.run_id = "gap";
  cfg.workdir = dir.path();
  cfg.corpus_dir = dir.path() / "corpus";
  cfg.rulebook = dir.path() / "rules.json";
  cfg.reference_csv = support::fixture("reference/reference_us.csv");
  cfg.per_decade = 10;
  cfg.max_leads = 7;
  Pipeline p(cfg, nullptr, no_sleep());
  const auto result = p.run_all();
  c.expect(result.exit_code == kExitOk, fmt::format("pipeline exit {}", result.exit_code));
  const auto rows = rows_from_responses(responses_from_csv(read_file(p.run_dir() / "responses.csv")));
  c.expect(rows.size() == 600, fmt::format("{} response rows, expected 600", rows.size()));
  std::string detail;
  for (const auto& item : survey_items()) {
    double sum[2] = {0, 0};
    int n[2] = {0, 0};
    for (const auto& r : rows) {
      if (r.item_id != item.item_id) continue;
      const int g = r.gender == "M";
      sum[g] += r.response;
      ++n[g];
    }
    const double mean_f = sum[0] / n[0], mean_m = sum[1] / n[1];
    c.expect(mean_f < mean_m, item.item_id + ": female mean not below male mean");
    const auto [welch, mw] = gender_contrast(rows, item.item_id);
    // Positive statistics favour the first-named group.
    const double sign = welch.group_order.first == "M" ? 1.0 : -1.0;
    c.expect(sign * welch.statistic > 0 && welch.p_two_sided < 1e-3, item.item_id + ": Welch");
    const double half = static_cast<double>(n[0]) * n[1] / 2.0;
    const double mw_sign = mw.group_order.first == "M" ? 1.0 : -1.0;
    c.expect(mw_sign * (mw.statistic - half) > 0 && mw.p_two_sided < 1e-3, item.item_id + ": Mann-Whitney");
    detail += fmt::format("{} F {:.2f} vs M {:.2f} t {:.2f}; ", item.item_id, mean_f, mean_m, sign * welch.statistic);
  }
  c.note = "200 agents: " + detail.substr(0, detail.size() - 2);
}

// ---- 6: cell gap ----

/// Ten integer responses whose mean is exactly `tenths` / 10.
std::vector<int> responses_with_mean(int tenths) {
  std::vector<int> out(10, tenths / 10);
  for (int k = 0; k < tenths % 10; ++k) ++out[static_cast<std::size_t>(k)];
  return out;
}

void cell_gap(Checks& c) {
  const char* genders[] = {"F", "M"};
  const std::pair<const char*, int> decades[] = {{"1990s", 1993}, {"2000s", 2004}, {"2010s", 2016}};
  // Simulated cells with means between 1.5 and 3.5, every response in 1-4.
  std::vector<ResponseRow> sim;
  std::vector<int> sim_tenths;
  for (const auto& item : survey_items()) {
    int k = 0;
    for (const char* g : genders) {
      for (const auto& [decade, year] : decades) {
        const int tenths = 15 + 4 * k++ + static_cast<int>(item.item_id.size() % 3);
        for (int v : responses_with_mean(tenths)) sim.push_back({g, decade, item.item_id, static_cast<double>(v)});
        sim_tenths.push_back(tenths);
      }
    }
  }
  // Real answers are the simulated ones plus one.
  std::string exact = "year,gender,item_id,response\n";
  for (const auto& r : sim) {
    const int year = r.decade == "1990s" ? 1993 : r.decade == "2000s" ? 2004 : 2016;
    exact += fmt::format("{},{},{},{}\n", year, r.gender, r.item_id, static_cast<int>(r.response) + 1);
  }
  const auto sim_cells = aggregate_cells(sim, Source::Simulated);
  const auto real_exact = aggregate_cells(parse_reference_csv(exact).rows, Source::Real);
  for (const auto& item : survey_items()) {
    const auto gap = cell_gap_test(sim_cells, real_exact, item.item_id);
    c.expect(std::fabs(gap.delta_mean + 1.0) <= 1e-9, fmt::format("{} delta {}", item.item_id, gap.delta_mean));
    c.expect(!gap.test && gap.diagnostic == "all differences identical", item.item_id + ": no degenerate diagnostic");
    c.expect(gap.matched.size() == 6, item.item_id + ": matched cells");
  }
  // Noisy offset: sim - real per cell, with the paired t computed by hand.
  const int offsets[] = {-5, -10, -7, -13, -9, -4};
  const double hand_t = -5.8554004376911990761, hand_p = 0.0020585239624297984804;
  std::string noisy = "year,gender,item_id,response\n";
  std::size_t cell = 0;
  for (const auto& item : survey_items()) {
    int k = 0;
    for (const char* g : genders) {
      for (const auto& [decade, year] : decades) {
        for (int v : responses_with_mean(sim_tenths[cell++] - offsets[k++])) {
          noisy += fmt::format("{},{},{},{}\n", year, g, item.item_id, v);
        }
      }
    }
  }
  const auto real_noisy = aggregate_cells(parse_reference_csv(noisy).rows, Source::Real);
  for (const auto& item : survey_items()) {
    const auto gap = cell_gap_test(sim_cells, real_noisy, item.item_id);
    c.expect(gap.test.has_value(), item.item_id + ": noisy offset produced no test");
    if (!gap.test) continue;
    c.expect(std::fabs(gap.delta_mean + 0.8) <= 1e-9, fmt::format("{} noisy delta {}", item.item_id, gap.delta_mean));
    c.expect(std::fabs(gap.test->statistic - hand_t) <= 1e-9,
             fmt::format("{} paired t {:.12f} vs {:.12f}", item.item_id, gap.test->statistic, hand_t));
    c.expect(std::fabs(gap.test->p_two_sided - hand_p) <= 1e-9, item.item_id + ": paired p");
  }
  c.note = "exact offset diagnosed, noisy offset t = -5.855400";
}

// ---- 7: resume ----

void resume(Checks& c) {
  support::TempDir dir("accept_resume");
  auto cfg = support::fixture_run_config(dir.path());
  cfg.halt_after = 4;
  bool interrupted = false;
  try {
    Pipeline(cfg, fixture_mock(), no_sleep()).run_all();
  } catch (const Error& e) {
    interrupted = e.code() == ErrorCode::Interrupted;
  }
  c.expect(interrupted, "halted run was not interrupted");
  cfg.halt_after.reset();
  auto provider = fixture_mock();
  Pipeline p(cfg, provider, no_sleep());
  std::size_t finished = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(p.run_dir() / "raw")) ++finished;
  c.expect(p.run_all().exit_code == kExitOk, "resumed run exit code");
  const std::size_t unfinished = 10 - finished;
  c.expect(static_cast<std::size_t>(provider->calls()) == unfinished,
           fmt::format("{} calls for {} unfinished agents", provider->calls(), unfinished));
  for (const auto& name : support::deterministic_outputs()) {
    c.expect(read_file(p.run_dir() / name) == support::slurp(support::fixture("goldens/pipeline/" + name)),
             name + " differs from golden after resume");
  }
  c.note = fmt::format("{} finished before the halt, {} calls on resume", finished, provider->calls());
}

// ---- 8: permutation sanity ----

double ks_against_uniform(std::vector<double> ps) {
  std::sort(ps.begin(), ps.end());
  const double n = static_cast<double>(ps.size());
  double d = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    d = std::max({d, (static_cast<double>(i) + 1) / n - ps[i], ps[i] - static_cast<double>(i) / n});
  }
  return d;
}

void permutation_sanity(Checks& c) {
  constexpr int kTrials = 1000;
  constexpr int kAgents = 200;
  std::mt19937_64 rng(20240601);
  // Ordinal answers with the same skewed distribution for both genders.
  std::discrete_distribution<int> answer({0.10, 0.20, 0.30, 0.25, 0.15});
  std::vector<double> welch_p, mw_p;
  for (int t = 0; t < kTrials; ++t) {
    std::vector<std::string> genders(kAgents / 2, "F");
    genders.resize(kAgents, "M");
    std::shuffle(genders.begin(), genders.end(), rng);
    std::vector<ResponseRow> rows;
    for (int a = 0; a < kAgents; ++a) rows.push_back({genders[a], "2000s", "job_priority", answer(rng) + 1.0});
    const auto [w, mw] = gender_contrast(rows, "job_priority");
    welch_p.push_back(w.p_two_sided);
    mw_p.push_back(mw.p_two_sided);
  }
  const double ks_w = ks_against_uniform(welch_p), ks_mw = ks_against_uniform(mw_p);
  c.expect(ks_w < 0.05, fmt::format("Welch KS {:.4f}", ks_w));
  c.expect(ks_mw < 0.05, fmt::format("Mann-Whitney KS {:.4f}", ks_mw));
  c.note = fmt::format("KS Welch {:.4f}, Mann-Whitney {:.4f} over {} trials", ks_w, ks_mw, kTrials);
}

struct Criterion {
  int number;
  std::string title;
  double budget_seconds;  // 0 when unbounded
  std::function<void(Checks&)> run;
};

}  // namespace

int main() {
  support::TempDir first_dir("accept_a"), second_dir("accept_b");
  std::optional<Pipeline> fixture_run;
  auto fixture = [&]() -> const Pipeline& {
    if (!fixture_run) {
      fixture_run.emplace(support::fixture_run_config(first_dir.path()), nullptr, no_sleep());
      if (fixture_run->run_all().exit_code != kExitOk) throw Error(ErrorCode::IoError, "fixture run failed");
    }
    return *fixture_run;
  };

  const std::vector<Criterion> criteria = {
      {1, "parser corpus and generated scripts", 10, parser_corpus},
      {2, "statistics oracles", 30, statistics_oracles},
      {3, "survey prompt fidelity", 0, [&](Checks& c) { prompt_fidelity(c, fixture()); }},
      {4, "end-to-end determinism", 60,
       [&](Checks& c) {
         fixture_run.reset();
         fixture();
         determinism(c, fixture(), second_dir);
       }},
      {5, "gender gap plumbing", 60, gender_gap},
      {6, "cell gap", 0, cell_gap},
      {7, "resume after interruption", 0, resume},
      {8, "null p-values uniform", 120, permutation_sanity},
  };

  int failed = 0;
  for (const auto& k : criteria) {
    Checks c;
    const auto start = std::chrono::steady_clock::now();
    try {
      k.run(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const double elapsed = seconds_since(start);
    if (k.budget_seconds > 0) c.expect(elapsed < k.budget_seconds, fmt::format("took {:.1f} s", elapsed));
    failed += c.failed();
    std::cout << fmt::format("{} criterion {}: {} [{:.2f} s] {}", c.failed() ? "FAIL" : "PASS", k.number, k.title,
                             elapsed, c.note)
              << "\n";
    for (const auto& f : c.failures()) std::cout << "    " << f << "\n";
  }
  return failed == 0 ? 0 : 1;
}
