#include "cine/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <map>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "cine/agent.hpp"
#include "cine/corpus.hpp"
#include "cine/csv.hpp"
#include "cine/error.hpp"
#include "cine/reflection.hpp"
#include "cine/screenplay.hpp"
#include "cine/survey.hpp"
#include "cine/util.hpp"

namespace cine {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string path_or_empty(const std::optional<fs::path>& p) { return p ? p->string() : std::string{}; }

std::optional<fs::path> optional_path(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  const auto s = j[key].get<std::string>();
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

void write_json(const fs::path& path, const json& j) { atomic_write(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, path.string() + " not found; run the earlier stage first");
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json optional_number(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

json test_to_json(const TestResult& t) {
  return json{{"test", t.test_name},
              {"statistic", t.statistic},
              {"df", t.df ? json(*t.df) : json(nullptr)},
              {"p_two_sided", t.p_two_sided},
              {"group_order", json::array({t.group_order.first, t.group_order.second})}};
}

std::string fmt_p(double p) { return p < 0.001 ? "< .001" : fmt::format("{:.3f}", p); }

std::string describe_test(const json& t) {
  std::string out = fmt::format("{} = {:.3f}", t["test"] == "mann_whitney_u" ? "U" : "t", t["statistic"].get<double>());
  if (!t["df"].is_null()) out += fmt::format(", df = {:.2f}", t["df"].get<double>());
  return out + ", p " + fmt_p(t["p_two_sided"].get<double>());
}

struct RosterEntry {
  CharacterIdentity identity;
  std::size_t dialogue_lines = 0;
  std::size_t action_mentions = 0;
};

std::vector<RosterEntry> load_roster(const fs::path& run_dir) {
  const json j = read_json(run_dir / "roster.json");
  std::vector<RosterEntry> out;
  for (const auto& a : j.at("admitted")) {
    out.push_back({character_identity_from_json(a.at("identity")), a.at("dialogue_lines").get<std::size_t>(),
                   a.at("action_mentions").get<std::size_t>()});
  }
  return out;
}

}  // namespace

// ---- config ----

json to_json(const RunConfig& c) {
  return json{{"run_id", c.run_id},
              {"seed", c.seed},
              {"provider", c.provider},
              {"concurrency", c.concurrency},
              {"per_decade", c.per_decade},
              {"max_leads", c.max_leads},
              {"min_memory", c.min_memory},
              {"items", c.items},
              {"workdir", c.workdir.string()},
              {"corpus_dir", c.corpus_dir.string()},
              {"cache_dir", c.cache_dir.string()},
              {"runs_dir", c.runs_dir.string()},
              {"reference_csv", path_or_empty(c.reference_csv)},
              {"rulebook", path_or_empty(c.rulebook)},
              {"force", c.force},
              {"per_item_prompts", c.per_item_prompts},
              {"enrich", c.enrich}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.run_id = j.value("run_id", c.run_id);
  c.seed = j.value("seed", c.seed);
  c.provider = j.value("provider", c.provider);
  c.concurrency = j.value("concurrency", c.concurrency);
  c.per_decade = j.value("per_decade", c.per_decade);
  c.max_leads = j.value("max_leads", c.max_leads);
  c.min_memory = j.value("min_memory", c.min_memory);
  c.items = j.value("items", c.items);
  c.workdir = j.value("workdir", c.workdir.string());
  c.corpus_dir = j.value("corpus_dir", std::string{});
  c.cache_dir = j.value("cache_dir", std::string{});
  c.runs_dir = j.value("runs_dir", std::string{});
  c.reference_csv = optional_path(j, "reference_csv");
  c.rulebook = optional_path(j, "rulebook");
  c.force = j.value("force", false);
  c.per_item_prompts = j.value("per_item_prompts", false);
  c.enrich = j.value("enrich", false);
  return c;
}

void StageResult::fail_partially(std::string message) {
  diagnostics.push_back(std::move(message));
  if (exit_code == kExitOk) exit_code = kExitPartial;
}

void StageResult::merge(const StageResult& other) {
  diagnostics.insert(diagnostics.end(), other.diagnostics.begin(), other.diagnostics.end());
  if (exit_code == kExitFatal || other.exit_code == kExitFatal) {
    exit_code = kExitFatal;
  } else {
    exit_code = std::max(exit_code, other.exit_code);
  }
}

// ---- pipeline ----

Pipeline::Pipeline(RunConfig config, std::shared_ptr<Provider> provider, Sleeper sleeper)
    : config_(std::move(config)), provider_(std::move(provider)), sleeper_(std::move(sleeper)) {
  if (config_.run_id.empty() || config_.run_id.find('/') != std::string::npos || config_.run_id == "." ||
      config_.run_id == "..") {
    throw Error(ErrorCode::ConfigError, "invalid run id '" + config_.run_id + "'");
  }
  if (config_.concurrency == 0) throw Error(ErrorCode::ConfigError, "concurrency must be positive");
  if (config_.provider != "mock" && config_.provider != "http") {
    throw Error(ErrorCode::ConfigError, "provider must be mock or http, got '" + config_.provider + "'");
  }
  for (const auto& item : config_.items) survey_item(item);
}

fs::path Pipeline::corpus_dir() const {
  return config_.corpus_dir.empty() ? config_.workdir / "corpus" : config_.corpus_dir;
}
fs::path Pipeline::parsed_dir() const { return config_.workdir / "parsed"; }
fs::path Pipeline::agents_dir() const { return config_.workdir / "agents"; }
fs::path Pipeline::run_dir() const {
  return (config_.runs_dir.empty() ? config_.workdir / "runs" : config_.runs_dir) / config_.run_id;
}

Provider& Pipeline::provider() {
  if (!provider_) {
    if (config_.provider == "http") {
      provider_ = std::make_shared<HttpProvider>(http_provider_config_from_env(), make_http_transport());
    } else {
      Rulebook rules = config_.rulebook ? load_rulebook(*config_.rulebook) : Rulebook{};
      provider_ = std::make_shared<MockProvider>(derive_seed(config_.seed, "mock"), std::move(rules));
    }
  }
  return *provider_;
}

Gateway& Pipeline::gateway() {
  if (!gateway_) {
    provider();
    GatewayConfig gc;
    gc.jitter_seed = derive_seed(config_.seed, "jitter");
    gc.max_in_flight = static_cast<std::ptrdiff_t>(config_.concurrency);
    fs::create_directories(run_dir());
    gateway_ = std::make_unique<Gateway>(provider_, gc, std::make_shared<RunLog>(run_dir() / "llm_log.jsonl"),
                                         sleeper_);
  }
  return *gateway_;
}

void Pipeline::write_config() const { write_json(run_dir() / "config.json", to_json(config_)); }

StageResult Pipeline::parse() {
  StageResult result;
  const fs::path dir = corpus_dir();
  std::vector<fs::path> files;
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto& p = entry.path();
      if (!entry.is_regular_file() || p.filename() == "metadata.json") continue;
      if (p.extension() == ".txt" || p.extension() == ".json") files.push_back(p);
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    result.exit_code = kExitFatal;
    result.diagnostics.push_back("no scripts found in " + dir.string());
    return result;
  }
  // Unreadable metadata is fatal for the whole stage.
  std::vector<FilmMetadata> metadata = load_metadata_file(dir / "metadata.json");

  fs::create_directories(parsed_dir());
  std::set<std::string> parsed_ids;
  parsed_now_ = 0;
  bool any_failed = false;
  for (const auto& file : files) {
    try {
      const std::string text = read_file(file);
      Screenplay sp = file.extension() == ".txt" ? parse_screenplay(text, file.stem().string())
                                                 : parse_tagged_screenplay(std::string_view(text));
      if (!parsed_ids.insert(sp.film_id).second) {
        throw Error(ErrorCode::InvalidTaggedScript, "duplicate film id '" + sp.film_id + "'");
      }
      for (const auto& w : sp.warnings) result.diagnostics.push_back(file.filename().string() + ": warning: " + w);
      write_json(parsed_dir() / (file_stem(sp.film_id) + ".json"), to_json(sp));
      ++parsed_now_;
    } catch (const std::exception& e) {
      any_failed = true;
      result.diagnostics.push_back(file.filename().string() + ": " + e.what());
    }
  }

  std::unique_ptr<MetadataClient> client;
  if (config_.enrich) {
    auto mc = metadata_config_from_env();
    mc.cache_dir = config_.cache_dir.empty() ? config_.workdir / "cache" / "metadata" : config_.cache_dir;
    client = std::make_unique<MetadataClient>(mc, make_http_transport(), sleeper_);
  }
  json meta = json::array();
  for (auto& m : metadata) {
    if (!parsed_ids.contains(m.film_id)) {
      result.diagnostics.push_back("metadata entry '" + m.film_id + "' has no screenplay");
    }
    if (client) {
      try {
        m = merge_metadata(m, client->fetch(m.title, m.release_year));
      } catch (const Error& e) {
        result.diagnostics.push_back(m.film_id + ": metadata lookup failed: " + e.what());
      }
    }
    meta.push_back(to_json(m));
  }
  write_json(parsed_dir() / "metadata.json", meta);
  if (any_failed) result.exit_code = kExitFatal;
  return result;
}

StageResult Pipeline::sample() {
  StageResult result;
  write_config();
  const json meta = read_json(parsed_dir() / "metadata.json");
  std::vector<FilmMetadata> films;
  for (const auto& m : meta) {
    FilmMetadata fm = film_metadata_from_json(m);
    if (!fs::exists(parsed_dir() / (file_stem(fm.film_id) + ".json"))) continue;
    films.push_back(std::move(fm));
  }
  const SampleResult s = stratified_sample(films, config_.per_decade, config_.seed);
  json shortfalls = json::array();
  for (const auto& sf : s.shortfalls) {
    shortfalls.push_back({{"decade", sf.decade}, {"requested", sf.requested}, {"available", sf.available}});
    result.diagnostics.push_back(fmt::format("{}: {} of {} requested films available", sf.decade, sf.available,
                                             sf.requested));
  }
  write_json(run_dir() / "sample.json", json{{"film_ids", s.film_ids}, {"shortfalls", shortfalls}});
  return result;
}

StageResult Pipeline::agents() {
  StageResult result;
  write_config();
  const json sample_doc = read_json(run_dir() / "sample.json");
  std::map<std::string, FilmMetadata> metadata;
  for (const auto& m : read_json(parsed_dir() / "metadata.json")) {
    FilmMetadata fm = film_metadata_from_json(m);
    metadata.emplace(fm.film_id, std::move(fm));
  }

  json admitted = json::array();
  json excluded = json::array();
  auto exclude = [&](const std::string& who, const std::string& why) {
    excluded.push_back({{"agent", who}, {"reason", why}});
  };
  for (const auto& film_id : sample_doc.at("film_ids")) {
    const auto& meta = metadata.at(film_id.get<std::string>());
    const Screenplay sp = screenplay_from_json(read_json(parsed_dir() / (file_stem(meta.film_id) + ".json")));
    const LeadResolution leads = resolve_lead_characters(meta, sp, config_.max_leads);
    for (const auto& d : leads.diagnostics) exclude(meta.film_id, d);
    for (const auto& id : leads.identities) {
      const std::string who = id.film_id + "/" + id.character;
      try {
        std::set<std::string> aliases;
        if (!id.credited_as.empty()) aliases.insert(id.credited_as);
        const CharacterEvidence ev = extract_character_evidence(sp, id.character, aliases);
        std::vector<MemoryNode> bank = build_memory_bank(ev);
        if (bank.size() < config_.min_memory) {
          exclude(who, fmt::format("{} memory nodes, below the threshold of {}", bank.size(), config_.min_memory));
          continue;
        }
        const CharacterAgent agent = build_agent(id, meta.release_year, std::move(bank));
        save_agent(agents_dir(), agent);
        admitted.push_back({{"identity", to_json(id)},
                            {"dialogue_lines", ev.dialogue_lines.size()},
                            {"action_mentions", ev.action_mentions.size()},
                            {"memory_nodes", agent.memory.size()}});
      } catch (const Error& e) {
        exclude(who, e.what());
      }
    }
  }
  for (const auto& x : excluded) {
    result.diagnostics.push_back("excluded " + x["agent"].get<std::string>() + ": " + x["reason"].get<std::string>());
  }
  write_json(run_dir() / "roster.json", json{{"admitted", admitted}, {"excluded", excluded}});
  if (admitted.empty()) {
    result.exit_code = kExitFatal;
    result.diagnostics.push_back("no agents admitted");
  }
  return result;
}

StageResult Pipeline::reflect() {
  StageResult result;
  write_config();
  const auto roster = load_roster(run_dir());
  ReflectionOptions opts;
  Gateway& gw = gateway();
  std::vector<std::string> failures(roster.size());
  parallel_for(roster.size(), config_.concurrency, [&](std::size_t i) {
    const auto& id = roster[i].identity;
    try {
      const CharacterAgent agent = load_agent(agent_path(agents_dir(), id));
      condense_and_store(agent, gw, agents_dir(), config_.force, opts);
    } catch (const Error& e) {
      failures[i] = id.film_id + "/" + id.character + ": " + e.what();
    }
  });
  json failed = json::array();
  for (const auto& f : failures) {
    if (f.empty()) continue;
    failed.push_back(f);
    result.fail_partially("reflection failed for " + f);
  }
  write_json(run_dir() / "reflect_status.json", json{{"failed_agents", failed}});
  return result;
}

StageResult Pipeline::survey() {
  StageResult result;
  write_config();
  const auto roster = load_roster(run_dir());
  std::vector<SurveyAgent> agents;
  json failed = json::array();
  for (const auto& entry : roster) {
    const auto& id = entry.identity;
    try {
      agents.push_back({load_agent(agent_path(agents_dir(), id)), load_reflections(agents_dir(), id)});
    } catch (const Error& e) {
      failed.push_back(id.film_id + "/" + id.character + ": " + e.what());
    }
  }
  std::vector<SurveyItem> items;
  for (const auto& item_id : config_.items) items.push_back(survey_item(item_id));

  SurveyOptions opts;
  opts.run_id = config_.run_id;
  opts.run_dir = run_dir();
  opts.per_item_prompts = config_.per_item_prompts;
  opts.concurrency = config_.concurrency;
  opts.halt_after = config_.halt_after;
  const SurveyRunResult run = run_survey(agents, items, gateway(), opts);

  for (const auto& f : run.failed_agents) failed.push_back(f);
  json missing = json::array();
  for (const auto& m : run.missing) {
    missing.push_back({{"agent", m.agent_id}, {"item_id", m.item_id}, {"reason", m.reason}});
  }
  atomic_write(run_dir() / "responses.csv", responses_to_csv(run.responses));
  write_json(run_dir() / "survey_status.json",
             json{{"failed_agents", failed}, {"missing", missing}, {"responses", run.responses.size()}});
  for (const auto& f : failed) result.fail_partially("survey failed for " + f.get<std::string>());
  if (!run.missing.empty()) {
    result.fail_partially(fmt::format("{} agent-item responses missing", run.missing.size()));
  }
  result.diagnostics.push_back(
      fmt::format("surveyed {} agents now, {} resumed from raw/", run.surveyed_now, run.resumed));
  if (run.responses.empty()) {
    result.exit_code = kExitFatal;
    result.diagnostics.push_back("no survey responses");
  }
  return result;
}

std::string plot_csv(std::vector<CellStats> cells) {
  std::sort(cells.begin(), cells.end(), [](const CellStats& a, const CellStats& b) {
    return std::tuple(a.item_id, to_string(a.source), a.gender, a.decade) <
           std::tuple(b.item_id, to_string(b.source), b.gender, b.decade);
  });
  std::string out = std::string(kPlotHeader) + "\n";
  for (const auto& c : cells) {
    out += csv_row(
        {c.item_id, std::string(to_string(c.source)), c.gender, c.decade, fmt::format("{:.6f}", c.mean), std::to_string(c.n)});
  }
  return out;
}

StageResult Pipeline::analyze() {
  StageResult result;
  write_config();
  const auto responses = responses_from_csv(read_file(run_dir() / "responses.csv"));
  std::vector<CellStats> cells = aggregate_cells(rows_from_responses(responses), Source::Simulated);
  if (config_.reference_csv) {
    const ReferenceData ref = parse_reference_csv(read_file(*config_.reference_csv));
    if (ref.skipped_out_of_window > 0) {
      result.diagnostics.push_back(fmt::format("{} reference rows outside 1990-2019 ignored", ref.skipped_out_of_window));
    }
    const auto real = aggregate_cells(ref.rows, Source::Real);
    cells.insert(cells.end(), real.begin(), real.end());
  }
  std::stable_sort(cells.begin(), cells.end(), [](const CellStats& a, const CellStats& b) {
    return std::tuple(a.item_id, to_string(a.source), a.decade, a.gender) <
           std::tuple(b.item_id, to_string(b.source), b.decade, b.gender);
  });
  atomic_write(run_dir() / "cells.csv", cells_to_csv(cells));
  atomic_write(run_dir() / "plot.csv", plot_csv(cells));
  return result;
}

const std::vector<std::string>& interpretation_caveats() {
  static const std::vector<std::string> caveats = {
      "Agents are nested within films, but these tests treat observations as independent. The p-values are "
      "therefore optimistic; a mixed-effects model with film as a random effect is the appropriate follow-up.",
      "Simulated responses mix narrative evidence and model priors. Reflections are produced by a language model "
      "and survey answers are conditioned on them, so divergence from real respondents is a signal about "
      "screen representation and the model together, not a population estimate.",
      "Character gender and age are taken from the credited actor, which is a proxy for the character's own "
      "attributes.",
      "Ordinal 1-5 responses are treated as interval data for means and t tests; the Mann-Whitney U test is "
      "reported as an ordinal check."};
  return caveats;
}

StageResult Pipeline::report() {
  StageResult result;
  write_config();
  const fs::path rd = run_dir();
  const auto roster = load_roster(rd);
  const auto responses = responses_from_csv(read_file(rd / "responses.csv"));
  const auto rows = rows_from_responses(responses);
  const auto sim_cells = aggregate_cells(rows, Source::Simulated);
  std::vector<CellStats> real_cells;
  std::optional<ReferenceData> ref;
  if (config_.reference_csv) {
    ref = parse_reference_csv(read_file(*config_.reference_csv));
    real_cells = aggregate_cells(ref->rows, Source::Real);
  }

  // Corpus summary over admitted agents and their films.
  const json sample_doc = read_json(rd / "sample.json");
  std::map<std::string, FilmMetadata> metadata;
  for (const auto& m : read_json(parsed_dir() / "metadata.json")) {
    FilmMetadata fm = film_metadata_from_json(m);
    metadata.emplace(fm.film_id, std::move(fm));
  }
  std::vector<double> votes;
  for (const auto& id : sample_doc.at("film_ids")) {
    const auto it = metadata.find(id.get<std::string>());
    if (it != metadata.end() && it->second.imdb_votes) votes.push_back(static_cast<double>(*it->second.imdb_votes));
  }
  std::sort(votes.begin(), votes.end());
  std::optional<double> median_votes;
  if (!votes.empty()) {
    const std::size_t n = votes.size();
    median_votes = n % 2 ? votes[n / 2] : 0.5 * (votes[n / 2 - 1] + votes[n / 2]);
  }
  std::map<std::string, int> by_gender;
  double dialogue = 0;
  double action = 0;
  for (const auto& e : roster) {
    by_gender[std::string(to_string(e.identity.gender))] += 1;
    dialogue += static_cast<double>(e.dialogue_lines);
    action += static_cast<double>(e.action_mentions);
  }
  const double n_agents = static_cast<double>(roster.size());
  json corpus{{"films_sampled", sample_doc.at("film_ids").size()},
              {"agents", roster.size()},
              {"agents_by_gender", by_gender},
              {"mean_dialogue_lines", roster.empty() ? json(nullptr) : json(dialogue / n_agents)},
              {"mean_action_mentions", roster.empty() ? json(nullptr) : json(action / n_agents)},
              {"median_imdb_votes", optional_number(median_votes)},
              {"sample_shortfalls", sample_doc.at("shortfalls")}};

  json items = json::array();
  for (const auto& item_id : config_.items) {
    json item{{"item_id", item_id}, {"statement", survey_item(item_id).statement}};
    std::vector<double> f_values, m_values;
    for (const auto& r : rows) {
      if (r.item_id != item_id) continue;
      (r.gender == "F" ? f_values : m_values).push_back(r.response);
    }
    item["n"] = {{"F", f_values.size()}, {"M", m_values.size()}};
    item["mean"] = {{"F", f_values.empty() ? json(nullptr) : json(mean(f_values))},
                    {"M", m_values.empty() ? json(nullptr) : json(mean(m_values))}};
    try {
      const auto [welch, mw] = gender_contrast(rows, item_id);
      item["gender_contrast"] = {{"welch", test_to_json(welch)}, {"mann_whitney", test_to_json(mw)}};
    } catch (const Error& e) {
      item["gender_contrast"] = {{"error", e.what()}};
    }
    if (ref) {
      try {
        const CellGapResult gap = cell_gap_test(sim_cells, real_cells, item_id);
        item["cell_gap"] = {{"delta_mean", gap.delta_mean},
                            {"differences", gap.differences},
                            {"matched", gap.matched},
                            {"unmatched", gap.unmatched},
                            {"test", gap.test ? test_to_json(*gap.test) : json(nullptr)},
                            {"diagnostic", gap.diagnostic}};
      } catch (const Error& e) {
        item["cell_gap"] = {{"error", e.what()}};
      }
    } else {
      item["cell_gap"] = {{"error", "no reference data configured"}};
    }
    json vol;
    for (const Source source : {Source::Simulated, Source::Real}) {
      const std::string key(to_string(source));
      try {
        vol[key] = decade_volatility(source == Source::Simulated ? sim_cells : real_cells, source, item_id);
      } catch (const Error& e) {
        vol[key] = {{"error", e.what()}};
      }
    }
    item["decade_volatility"] = vol;
    items.push_back(item);
  }

  json missing_data;
  missing_data["excluded_agents"] = read_json(rd / "roster.json").at("excluded");
  if (fs::exists(rd / "reflect_status.json")) {
    missing_data["reflection_failures"] = read_json(rd / "reflect_status.json").at("failed_agents");
  }
  if (fs::exists(rd / "survey_status.json")) {
    const json ss = read_json(rd / "survey_status.json");
    missing_data["survey_failures"] = ss.at("failed_agents");
    missing_data["missing_items"] = ss.at("missing");
  }
  missing_data["reference_rows_out_of_window"] = ref ? json(ref->skipped_out_of_window) : json(nullptr);
  std::set<std::tuple<std::string, std::string, std::string>> sim_keys, real_keys;
  for (const auto& c : sim_cells) sim_keys.insert({c.item_id, c.gender, c.decade});
  for (const auto& c : real_cells) real_keys.insert({c.item_id, c.gender, c.decade});
  json absent = json::array();
  for (const auto& item_id : config_.items) {
    for (const auto& g : {"F", "M"}) {
      for (const auto d : kDecades) {
        const auto key = std::tuple(item_id, std::string(g), std::string(d));
        const std::string label = item_id + ":" + g + "/" + std::string(d);
        if (!sim_keys.contains(key)) absent.push_back("simulated:" + label);
        if (ref && !real_keys.contains(key)) absent.push_back("real:" + label);
      }
    }
  }
  missing_data["absent_cells"] = absent;

  const json report{{"corpus", corpus},
                    {"items", items},
                    {"missing_data", missing_data},
                    {"interpretation_caveats", interpretation_caveats()}};
  write_json(rd / "report.json", report);

  // Human-readable rendering of the same numbers.
  std::string txt = "Character-agent survey report\n=============================\n\n";
  txt += "Corpus\n------\n";
  txt += fmt::format("Films sampled: {}\nAgents: {} (F {}, M {})\n", corpus["films_sampled"].get<std::size_t>(),
                     roster.size(), by_gender["F"], by_gender["M"]);
  if (!roster.empty()) {
    txt += fmt::format("Mean dialogue lines per agent: {:.1f}\nMean action mentions per agent: {:.1f}\n",
                       dialogue / n_agents, action / n_agents);
  }
  txt += "Median IMDb votes: " + (median_votes ? fmt::format("{:.0f}", *median_votes) : std::string("n/a")) + "\n";
  for (const auto& item : items) {
    txt += "\n" + item["item_id"].get<std::string>() + "\n" + std::string(item["item_id"].get<std::string>().size(), '-') +
           "\n";
    txt += "Statement: " + item["statement"].get<std::string>() + "\n";
    for (const auto& g : {"F", "M"}) {
      const json& m = item["mean"][g];
      txt += fmt::format("  {} mean: {} (n = {})\n", g, m.is_null() ? "n/a" : fmt::format("{:.3f}", m.get<double>()),
                         item["n"][g].get<std::size_t>());
    }
    const json& gc = item["gender_contrast"];
    if (gc.contains("error")) {
      txt += "  Gender contrast (M vs F): " + gc["error"].get<std::string>() + "\n";
    } else {
      txt += "  Welch (M vs F): " + describe_test(gc["welch"]) + "\n";
      txt += "  Mann-Whitney (M vs F): " + describe_test(gc["mann_whitney"]) + "\n";
    }
    const json& cg = item["cell_gap"];
    if (cg.contains("error")) {
      txt += "  Cell gap vs real: " + cg["error"].get<std::string>() + "\n";
    } else {
      txt += fmt::format("  Cell gap vs real: delta M = {:.3f} over {} cells", cg["delta_mean"].get<double>(),
                         cg["matched"].size());
      txt += cg["test"].is_null() ? " (" + cg["diagnostic"].get<std::string>() + ")\n"
                                  : "; paired " + describe_test(cg["test"]) + "\n";
    }
    for (const auto& src : {"simulated", "real"}) {
      const json& v = item["decade_volatility"][src];
      txt += fmt::format("  Decade volatility ({}): {}\n", src,
                         v.is_number() ? fmt::format("{:.3f}", v.get<double>()) : v["error"].get<std::string>());
    }
  }
  txt += "\nMissing data\n------------\n";
  txt += fmt::format("Excluded agents: {}\n", missing_data["excluded_agents"].size());
  if (missing_data.contains("survey_failures")) {
    txt += fmt::format("Survey failures: {}\nMissing agent-items: {}\n", missing_data["survey_failures"].size(),
                       missing_data["missing_items"].size());
  }
  txt += fmt::format("Absent cells: {}\n", absent.size());
  for (const auto& a : absent) txt += "  " + a.get<std::string>() + "\n";
  txt += "\nInterpretation caveats\n----------------------\n";
  for (const auto& c : interpretation_caveats()) txt += "- " + c + "\n";
  atomic_write(rd / "report.txt", txt);

  write_json(rd / "run_meta.json", json{{"report_written_at", utc_now()}, {"provider", provider_ ? provider_->name() : config_.provider}});
  return result;
}

StageResult Pipeline::run_all() {
  // Fail fast on configuration problems before touching the corpus.
  provider();
  fs::create_directories(run_dir());
  write_config();
  StageResult total;
  using Stage = StageResult (Pipeline::*)();
  for (Stage stage : {&Pipeline::parse, &Pipeline::sample, &Pipeline::agents, &Pipeline::reflect, &Pipeline::survey,
                      &Pipeline::analyze, &Pipeline::report}) {
    StageResult r = (this->*stage)();
    // A screenplay that fails to parse only removes that film from the run.
    if (stage == &Pipeline::parse && r.exit_code == kExitFatal && parsed_now_ > 0) {
      r.exit_code = kExitPartial;
    }
    total.merge(r);
    if (total.exit_code == kExitFatal) break;
  }
  return total;
}

}  // namespace cine
