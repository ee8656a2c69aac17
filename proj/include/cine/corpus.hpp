#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cine/http.hpp"
#include "cine/screenplay.hpp"

namespace cine {

enum class Gender { F, M, Unknown };

std::string_view to_string(Gender g);
/// Accepts "F"/"M" (and "female"/"male", any case); anything else is Unknown.
Gender gender_from_string(std::string_view s);

struct CreditedActor {
  std::string actor_name;
  std::string character_name;
  Gender gender = Gender::Unknown;
  std::optional<int> birth_year;
};

struct FilmMetadata {
  std::string film_id;
  std::string title;
  int release_year = 0;
  std::vector<std::string> genres;  // priority order; the first one is the sampling bucket
  std::vector<CreditedActor> credited_actors;  // billing order
  std::optional<std::int64_t> imdb_votes;
};

struct CharacterIdentity {
  std::string film_id;
  std::string character;  // canonical cue name
  Gender gender = Gender::Unknown;
  std::optional<int> age_at_release;
  std::string decade;
  /// Name as credited in the metadata ("Det. Reed"); used as an extra alias.
  std::string credited_as;
};

inline constexpr int kStudyFirstYear = 1990;
inline constexpr int kStudyLastYear = 2019;
inline constexpr std::string_view kDecades[] = {"1990s", "2000s", "2010s"};
inline constexpr int kDefaultMaxLeads = 5;

/// 1990-1999 -> "1990s" and so on. Throws Error(OutOfWindow) outside 1990-2019.
std::string decade_of(int year);

struct LeadResolution {
  std::vector<CharacterIdentity> identities;
  std::vector<std::string> diagnostics;
};

/// Maps the first `max_leads` credited actors onto screenplay cues: exact
/// normalized match first, then a unique shared name token. Actors with no
/// match, an ambiguous match, or unknown gender are skipped with a diagnostic.
LeadResolution resolve_lead_characters(const FilmMetadata& metadata, const Screenplay& screenplay,
                                       int max_leads = kDefaultMaxLeads);

struct SampleShortfall {
  std::string decade;
  int requested = 0;
  int available = 0;
};

struct SampleResult {
  std::vector<std::string> film_ids;
  std::vector<SampleShortfall> shortfalls;
};

/// Per decade, films are bucketed by first genre and drawn round-robin across
/// buckets (genre order and within-bucket order shuffled from `seed`) until
/// `per_decade` films are taken or the decade runs out. Films outside the
/// study window are ignored. Throws Error(EmptyCorpus) when nothing is in window.
SampleResult stratified_sample(const std::vector<FilmMetadata>& films, int per_decade, std::uint64_t seed);

nlohmann::json to_json(const FilmMetadata& m);
FilmMetadata film_metadata_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CharacterIdentity& id);
CharacterIdentity character_identity_from_json(const nlohmann::json& j);

/// Local override file: a JSON array of FilmMetadata objects.
std::vector<FilmMetadata> load_metadata_file(const std::filesystem::path& path);

/// Local entries win; missing genres / votes are filled from `fetched`.
FilmMetadata merge_metadata(const FilmMetadata& local, const FilmMetadata& fetched);

// ---- OMDb-style metadata client ----

struct MetadataClientConfig {
  std::string endpoint = "https://www.omdbapi.com/";
  std::string api_key;
  std::filesystem::path cache_dir = "cache/metadata";
  int max_retries = 3;
  Seconds base_backoff = Seconds(0.5);
  /// Server-requested waits do not consume retries but are capped.
  int max_rate_limit_waits = 8;
  double requests_per_second = 0;
};

/// Reads `CINE_OMDB_KEY`; throws Error(ConfigError) when unset.
MetadataClientConfig metadata_config_from_env();

class MetadataClient {
 public:
  MetadataClient(MetadataClientConfig config, std::shared_ptr<HttpTransport> transport,
                 Sleeper sleeper = real_sleeper());

  /// Cached response when present; otherwise a GET with retry on transport
  /// failures (0.5 s, 1 s, 2 s) and Retry-After handling on 429.
  FilmMetadata fetch(const std::string& title, int year);

  std::filesystem::path cache_path(const std::string& title, int year) const;
  int network_calls() const { return network_calls_.load(); }

 private:
  std::string fetch_body(const std::string& title, int year);

  MetadataClientConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  Sleeper sleeper_;
  RateLimiter limiter_;
  std::atomic<int> network_calls_{0};
};

/// Maps an OMDb JSON response body. Throws Error(NotFound) on the
/// "Response": "False" marker.
FilmMetadata parse_omdb_response(const std::string& body);

FilmMetadata fetch_film_metadata(const std::string& title, int year, MetadataClient& client);

}  // namespace cine
