#include "cine/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <random>
#include <set>

#include "cine/error.hpp"
#include "cine/util.hpp"

namespace cine {

using nlohmann::json;

std::string_view to_string(Gender g) {
  switch (g) {
    case Gender::F: return "F";
    case Gender::M: return "M";
    case Gender::Unknown: return "unknown";
  }
  return "unknown";
}

Gender gender_from_string(std::string_view s) {
  const std::string v = to_lower(trim(s));
  if (v == "f" || v == "female") return Gender::F;
  if (v == "m" || v == "male") return Gender::M;
  return Gender::Unknown;
}

std::string decade_of(int year) {
  if (year < kStudyFirstYear || year > kStudyLastYear) {
    throw Error(ErrorCode::OutOfWindow, "year " + std::to_string(year) + " outside 1990-2019");
  }
  return std::to_string(year / 10 * 10) + "s";
}

namespace {

// Titles dropped before token matching; name suffixes (JR., SR.) are kept.
const std::set<std::string> kHonorifics = {"DR", "MR", "MRS", "MS", "MISS", "DET", "SGT", "LT", "CAPT", "PROF"};

std::set<std::string> name_tokens(const std::string& normalized) {
  std::set<std::string> tokens;
  for (const auto& w : split_words(normalized)) {
    std::string t;
    for (char c : w) {
      if (std::isalnum(static_cast<unsigned char>(c))) t.push_back(c);
    }
    if (!t.empty() && !kHonorifics.contains(t)) tokens.insert(t);
  }
  return tokens;
}

}  // namespace

LeadResolution resolve_lead_characters(const FilmMetadata& metadata, const Screenplay& screenplay, int max_leads) {
  LeadResolution out;
  std::string decade;
  try {
    decade = decade_of(metadata.release_year);
  } catch (const Error& e) {
    out.diagnostics.push_back(metadata.film_id + ": " + e.what());
    return out;
  }

  std::set<std::string> taken;
  const auto limit = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, max_leads)),
                                           metadata.credited_actors.size());
  for (std::size_t i = 0; i < limit; ++i) {
    const CreditedActor& actor = metadata.credited_actors[i];
    const std::string who = metadata.film_id + ": " + actor.actor_name + " as '" + actor.character_name + "'";
    if (actor.gender == Gender::Unknown) {
      out.diagnostics.push_back(who + ": unknown gender, skipped");
      continue;
    }
    std::string wanted;
    try {
      wanted = normalize_character_name(actor.character_name);
    } catch (const Error&) {
      out.diagnostics.push_back(who + ": empty character name, skipped");
      continue;
    }

    std::string match;
    if (screenplay.character_cues.contains(wanted)) {
      match = wanted;
    } else {
      const auto wanted_tokens = name_tokens(wanted);
      std::vector<std::string> candidates;
      for (const auto& cue : screenplay.character_cues) {
        const auto cue_tokens = name_tokens(cue);
        const bool shares = std::any_of(wanted_tokens.begin(), wanted_tokens.end(),
                                        [&](const std::string& t) { return cue_tokens.contains(t); });
        if (shares) candidates.push_back(cue);
      }
      if (candidates.empty()) {
        out.diagnostics.push_back(who + ": no matching cue, skipped");
        continue;
      }
      if (candidates.size() > 1) {
        std::string list;
        for (const auto& c : candidates) list += (list.empty() ? "" : ", ") + c;
        out.diagnostics.push_back(who + ": ambiguous match {" + list + "}, skipped");
        continue;
      }
      match = candidates.front();
    }
    if (!taken.insert(match).second) {
      out.diagnostics.push_back(who + ": cue " + match + " already assigned, skipped");
      continue;
    }

    CharacterIdentity id;
    id.film_id = metadata.film_id;
    id.character = match;
    id.gender = actor.gender;
    if (actor.birth_year && metadata.release_year >= *actor.birth_year) {
      id.age_at_release = metadata.release_year - *actor.birth_year;
    }
    id.decade = decade;
    id.credited_as = actor.character_name;
    out.identities.push_back(std::move(id));
  }
  return out;
}

SampleResult stratified_sample(const std::vector<FilmMetadata>& films, int per_decade, std::uint64_t seed) {
  if (per_decade < 1) throw Error(ErrorCode::ConfigError, "per_decade must be >= 1");

  // decade -> genre -> film ids (sorted so input order does not matter)
  std::map<std::string, std::map<std::string, std::vector<std::string>>> buckets;
  for (const auto& f : films) {
    if (f.release_year < kStudyFirstYear || f.release_year > kStudyLastYear) continue;
    const std::string genre = f.genres.empty() ? std::string("Unknown") : f.genres.front();
    buckets[decade_of(f.release_year)][genre].push_back(f.film_id);
  }
  if (buckets.empty()) throw Error(ErrorCode::EmptyCorpus, "no films inside the 1990-2019 window");

  auto shuffle = [](std::vector<std::string>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = rng() % i;
      std::swap(v[i - 1], v[j]);
    }
  };

  SampleResult result;
  for (std::string_view decade : kDecades) {
    std::mt19937_64 rng(derive_seed(seed, "sample/" + std::string(decade)));
    std::vector<std::vector<std::string>> queues;
    std::vector<std::string> genres;
    if (auto it = buckets.find(std::string(decade)); it != buckets.end()) {
      for (auto& [genre, ids] : it->second) {
        std::sort(ids.begin(), ids.end());
        genres.push_back(genre);
      }
      shuffle(genres, rng);
      for (const auto& g : genres) {
        auto ids = it->second.at(g);
        shuffle(ids, rng);
        queues.push_back(std::move(ids));
      }
    }

    int taken = 0;
    int available = 0;
    for (const auto& q : queues) available += static_cast<int>(q.size());
    for (std::size_t round = 0; taken < per_decade; ++round) {
      bool any = false;
      for (const auto& q : queues) {
        if (round < q.size() && taken < per_decade) {
          result.film_ids.push_back(q[round]);
          ++taken;
          any = true;
        }
      }
      if (!any) break;
    }
    if (taken < per_decade) result.shortfalls.push_back({std::string(decade), per_decade, available});
  }
  return result;
}

json to_json(const FilmMetadata& m) {
  json actors = json::array();
  for (const auto& a : m.credited_actors) {
    json ja{{"actor", a.actor_name}, {"character", a.character_name}, {"gender", to_string(a.gender)}};
    ja["birth_year"] = a.birth_year ? json(*a.birth_year) : json(nullptr);
    actors.push_back(std::move(ja));
  }
  json j{{"film_id", m.film_id},
         {"title", m.title},
         {"release_year", m.release_year},
         {"genres", m.genres},
         {"credited_actors", std::move(actors)}};
  j["imdb_votes"] = m.imdb_votes ? json(*m.imdb_votes) : json(nullptr);
  return j;
}

FilmMetadata film_metadata_from_json(const json& j) {
  FilmMetadata m;
  m.film_id = j.at("film_id").get<std::string>();
  m.title = j.value("title", m.film_id);
  m.release_year = j.at("release_year").get<int>();
  if (j.contains("genres")) m.genres = j["genres"].get<std::vector<std::string>>();
  if (j.contains("credited_actors")) {
    for (const auto& a : j["credited_actors"]) {
      CreditedActor ca;
      ca.actor_name = a.value("actor", std::string{});
      ca.character_name = a.value("character", std::string{});
      ca.gender = gender_from_string(a.value("gender", std::string{}));
      if (a.contains("birth_year") && a["birth_year"].is_number_integer()) ca.birth_year = a["birth_year"].get<int>();
      m.credited_actors.push_back(std::move(ca));
    }
  }
  if (j.contains("imdb_votes") && j["imdb_votes"].is_number_integer()) {
    m.imdb_votes = j["imdb_votes"].get<std::int64_t>();
  }
  return m;
}

json to_json(const CharacterIdentity& id) {
  json j{{"film_id", id.film_id},
         {"character", id.character},
         {"gender", to_string(id.gender)},
         {"decade", id.decade},
         {"credited_as", id.credited_as}};
  j["age_at_release"] = id.age_at_release ? json(*id.age_at_release) : json(nullptr);
  return j;
}

CharacterIdentity character_identity_from_json(const json& j) {
  CharacterIdentity id;
  id.film_id = j.at("film_id").get<std::string>();
  id.character = j.at("character").get<std::string>();
  id.gender = gender_from_string(j.at("gender").get<std::string>());
  id.decade = j.at("decade").get<std::string>();
  id.credited_as = j.value("credited_as", std::string{});
  if (j.contains("age_at_release") && j["age_at_release"].is_number_integer()) {
    id.age_at_release = j["age_at_release"].get<int>();
  }
  return id;
}

std::vector<FilmMetadata> load_metadata_file(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
  }
  if (!doc.is_array()) throw Error(ErrorCode::IoError, path.string() + ": expected a JSON array");
  std::vector<FilmMetadata> films;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    try {
      films.push_back(film_metadata_from_json(doc[i]));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::IoError, path.string() + " entry " + std::to_string(i) + ": " + e.what());
    }
  }
  return films;
}

FilmMetadata merge_metadata(const FilmMetadata& local, const FilmMetadata& fetched) {
  FilmMetadata m = local;
  if (m.title.empty()) m.title = fetched.title;
  if (m.release_year == 0) m.release_year = fetched.release_year;
  if (m.genres.empty()) m.genres = fetched.genres;
  if (!m.imdb_votes) m.imdb_votes = fetched.imdb_votes;
  if (m.credited_actors.empty()) m.credited_actors = fetched.credited_actors;
  return m;
}

// ---- metadata client ----

MetadataClientConfig metadata_config_from_env() {
  MetadataClientConfig cfg;
  const char* key = std::getenv("CINE_OMDB_KEY");
  if (key == nullptr || *key == '\0') throw Error(ErrorCode::ConfigError, "CINE_OMDB_KEY is not set");
  cfg.api_key = key;
  return cfg;
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const std::string item = trim(s.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (!item.empty() && item != "N/A") out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

FilmMetadata parse_omdb_response(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ProviderError, std::string("malformed metadata response: ") + e.what());
  }
  if (j.value("Response", std::string("False")) != "True") {
    throw Error(ErrorCode::NotFound, j.value("Error", std::string("no result")));
  }
  FilmMetadata m;
  m.title = j.value("Title", std::string{});
  const std::string year = j.value("Year", std::string{});
  m.release_year = std::atoi(year.c_str());
  m.film_id = j.value("imdbID", file_stem(m.title + "_" + std::to_string(m.release_year)));
  m.genres = split_list(j.value("Genre", std::string{}));
  for (const auto& actor : split_list(j.value("Actors", std::string{}))) {
    m.credited_actors.push_back({actor, std::string{}, Gender::Unknown, std::nullopt});
  }
  std::string votes;
  for (char c : j.value("imdbVotes", std::string{})) {
    if (std::isdigit(static_cast<unsigned char>(c))) votes.push_back(c);
  }
  if (!votes.empty()) m.imdb_votes = std::stoll(votes);
  return m;
}

MetadataClient::MetadataClient(MetadataClientConfig config, std::shared_ptr<HttpTransport> transport, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      sleeper_(sleeper),
      limiter_(config_.requests_per_second, 1.0, sleeper) {}

std::filesystem::path MetadataClient::cache_path(const std::string& title, int year) const {
  return config_.cache_dir / (file_stem(title) + "_" + std::to_string(year) + ".json");
}

std::string MetadataClient::fetch_body(const std::string& title, int year) {
  const QueryParams query{{"t", title}, {"y", std::to_string(year)}, {"type", "movie"}, {"apikey", config_.api_key}};
  int retries = 0;
  int rate_waits = 0;
  for (;;) {
    limiter_.acquire();
    ++network_calls_;
    std::string failure;
    try {
      HttpResponse res = transport_->get(config_.endpoint, query);
      if (res.status == 200) return res.body;
      if (res.status == 429) {
        if (++rate_waits > config_.max_rate_limit_waits) {
          throw RateLimitedError("metadata server kept rate limiting", 0);
        }
        double wait = 1.0;
        if (auto hint = res.header("retry-after")) wait = parse_retry_after(*hint).value_or(1.0);
        sleeper_(Seconds(wait));
        continue;
      }
      if (res.status == 404) throw Error(ErrorCode::NotFound, title + " (" + std::to_string(year) + ")");
      if (res.status < 500) {
        throw Error(ErrorCode::ProviderError, "metadata server returned HTTP " + std::to_string(res.status));
      }
      failure = "HTTP " + std::to_string(res.status);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TransportError) throw;
      failure = e.what();
    }
    if (retries >= config_.max_retries) {
      throw Error(ErrorCode::TransportError, "giving up after " + std::to_string(retries + 1) + " attempts: " + failure);
    }
    sleeper_(config_.base_backoff * (1 << retries));
    ++retries;
  }
}

FilmMetadata MetadataClient::fetch(const std::string& title, int year) {
  const auto path = cache_path(title, year);
  if (std::filesystem::exists(path)) return parse_omdb_response(read_file(path));
  const std::string body = fetch_body(title, year);
  FilmMetadata m = parse_omdb_response(body);  // not-found markers are never cached
  atomic_write(path, body);
  return m;
}

FilmMetadata fetch_film_metadata(const std::string& title, int year, MetadataClient& client) {
  return client.fetch(title, year);
}

}  // namespace cine
