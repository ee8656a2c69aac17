#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cine/llm_gateway.hpp"
#include "cine/stats.hpp"

namespace cine {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFatal = 1;
inline constexpr int kExitPartial = 2;

struct RunConfig {
  std::string run_id = "default";
  std::uint64_t seed = 7;
  std::string provider = "mock";  // mock | http
  std::size_t concurrency = 4;
  int per_decade = 54;
  int max_leads = kDefaultMaxLeads;
  std::size_t min_memory = kDefaultMinMemoryNodes;
  std::vector<std::string> items = {"job_priority", "political_leaders", "university_education"};

  std::filesystem::path workdir = ".";
  /// Defaults to <workdir>/corpus when empty.
  std::filesystem::path corpus_dir;
  /// Defaults to <workdir>/cache when empty.
  std::filesystem::path cache_dir;
  /// Defaults to <workdir>/runs when empty.
  std::filesystem::path runs_dir;
  std::optional<std::filesystem::path> reference_csv;
  std::optional<std::filesystem::path> rulebook;

  bool force = false;
  bool per_item_prompts = false;
  /// Fill genres and vote counts from the OMDb API (needs CINE_OMDB_KEY).
  bool enrich = false;
  /// Test hook: interrupt the survey stage after this many newly surveyed agents.
  std::optional<std::size_t> halt_after;
};

nlohmann::json to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

struct StageResult {
  int exit_code = kExitOk;
  std::vector<std::string> diagnostics;

  void fail_partially(std::string message);
  void merge(const StageResult& other);
};

/// Runs the stages against a working directory:
///
///   <workdir>/parsed/                  one JSON document per screenplay + metadata.json
///   <workdir>/agents/<film>/<char>.json and .reflections.json
///   <runs>/<run_id>/                   config.json, sample.json, roster.json,
///                                      responses.csv, cells.csv, plot.csv,
///                                      report.json, report.txt, llm_log.jsonl, raw/
///
/// Every stage reads what the previous one persisted, so the CLI can run
/// them one at a time. Reflections live with the agents and are reused by
/// later runs unless `force` is set.
class Pipeline {
 public:
  /// `provider` overrides the one named in the config (tests use this to count calls).
  explicit Pipeline(RunConfig config, std::shared_ptr<Provider> provider = nullptr, Sleeper sleeper = real_sleeper());

  StageResult parse();
  StageResult sample();
  StageResult agents();
  StageResult reflect();
  StageResult survey();
  StageResult analyze();
  StageResult report();
  /// All stages in order; stops at the first fatal stage.
  StageResult run_all();

  const RunConfig& config() const { return config_; }
  std::filesystem::path corpus_dir() const;
  std::filesystem::path parsed_dir() const;
  std::filesystem::path agents_dir() const;
  std::filesystem::path run_dir() const;

  /// Creates the provider on first use; throws Error(ConfigError) for an
  /// http provider without credentials.
  Provider& provider();

 private:
  Gateway& gateway();
  void write_config() const;

  RunConfig config_;
  std::shared_ptr<Provider> provider_;
  Sleeper sleeper_;
  std::unique_ptr<Gateway> gateway_;
  std::size_t parsed_now_ = 0;
};

/// `item_id,source,gender,decade,mean,n`, sorted by item, source, gender, decade.
inline constexpr std::string_view kPlotHeader = "item_id,source,gender,decade,mean,n";
std::string plot_csv(std::vector<CellStats> cells);

/// Fixed text printed under "Interpretation caveats" in every report.
const std::vector<std::string>& interpretation_caveats();

}  // namespace cine
