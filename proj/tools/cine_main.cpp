// cine: build character agents from screenplays and survey them.

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "cine/error.hpp"
#include "cine/pipeline.hpp"

namespace {

struct CliOptions {
  cine::RunConfig config;
  std::string reference;
  std::string rulebook;
  std::size_t halt_after = 0;
};

void add_common(CLI::App* cmd, CliOptions& o) {
  auto& c = o.config;
  cmd->add_option("--run-id", c.run_id, "Run directory name under runs/")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed for sampling, mock provider and jitter")->capture_default_str();
  cmd->add_option("--provider", c.provider, "mock or http")
      ->check(CLI::IsMember({"mock", "http"}))
      ->capture_default_str();
  cmd->add_option("--concurrency", c.concurrency, "Concurrent LLM calls")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--workdir", c.workdir, "Holds parsed/, agents/ and runs/")->capture_default_str();
  cmd->add_option("--corpus", c.corpus_dir, "Screenplays plus metadata.json (default <workdir>/corpus)");
  cmd->add_option("--cache-dir", c.cache_dir, "Metadata API cache (default <workdir>/cache)");
  cmd->add_option("--runs-dir", c.runs_dir, "Run directories (default <workdir>/runs)");
  cmd->add_option("--per-decade", c.per_decade, "Films sampled per decade")->capture_default_str();
  cmd->add_option("--max-leads", c.max_leads, "Credited actors considered per film")->capture_default_str();
  cmd->add_option("--min-memory", c.min_memory, "Memory nodes needed to admit an agent")->capture_default_str();
  cmd->add_option("--reference", o.reference, "Real-respondent CSV (year,gender,item_id,response)");
  cmd->add_option("--rulebook", o.rulebook, "Marker rules for the mock provider");
  cmd->add_flag("--force", c.force, "Recompute reflections that already exist");
  cmd->add_flag("--per-item-prompts", c.per_item_prompts, "One survey prompt per item");
  cmd->add_flag("--enrich", c.enrich, "Fill genres and votes from OMDb (needs CINE_OMDB_KEY)");
  cmd->add_option("--halt-after", o.halt_after, "Interrupt the survey after N agents (testing)");
}

int report(const cine::StageResult& r) {
  for (const auto& d : r.diagnostics) std::cerr << d << "\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Character agents from screenplays, surveyed on gender-attitude items"};
  app.require_subcommand(1);
  CliOptions opts;

  using Stage = cine::StageResult (cine::Pipeline::*)();
  const std::map<std::string, std::pair<std::string, Stage>> commands = {
      {"parse", {"Parse screenplays into parsed/", &cine::Pipeline::parse}},
      {"sample", {"Draw the stratified film sample", &cine::Pipeline::sample}},
      {"agents", {"Resolve leads and build memory banks", &cine::Pipeline::agents}},
      {"reflect", {"Condense memory banks into expert reflections", &cine::Pipeline::reflect}},
      {"survey", {"Administer the survey items", &cine::Pipeline::survey}},
      {"analyze", {"Aggregate cells and plot data", &cine::Pipeline::analyze}},
      {"report", {"Write report.json and report.txt", &cine::Pipeline::report}},
      {"pipeline", {"Run every stage in order", &cine::Pipeline::run_all}},
  };
  for (const auto& [name, entry] : commands) add_common(app.add_subcommand(name, entry.first), opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (!opts.reference.empty()) opts.config.reference_csv = opts.reference;
    if (!opts.rulebook.empty()) opts.config.rulebook = opts.rulebook;
    if (opts.halt_after > 0) opts.config.halt_after = opts.halt_after;
    cine::Pipeline pipeline(opts.config);
    for (const auto& [name, entry] : commands) {
      if (app.got_subcommand(name)) return report((pipeline.*(entry.second))());
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cine::kExitFatal;
  }
  return cine::kExitFatal;
}
