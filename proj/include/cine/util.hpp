#pragma once

#include <atomic>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace cine {

// ---- text helpers (ASCII semantics; non-ASCII bytes pass through untouched) ----

std::string trim(std::string_view s);
std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);
/// "DR. REED" -> "Dr. Reed"
std::string title_case(std::string_view s);
/// Collapses runs of whitespace into single spaces and trims.
std::string collapse_whitespace(std::string_view s);
/// Splits on '\n' after converting CRLF / lone CR to LF.
std::vector<std::string> split_lines(std::string_view text);
std::vector<std::string> split_words(std::string_view s);
bool starts_with_icase(std::string_view s, std::string_view prefix);

/// Case-insensitive whole-word search: the match may not be preceded or
/// followed by an ASCII letter or digit.
bool contains_word_icase(std::string_view haystack, std::string_view needle);

/// File-system safe stem for a character or film name ("DR. REED" -> "DR_REED").
std::string file_stem(std::string_view name);

// ---- hashing and seed streams ----

std::string sha256_hex(std::string_view data);
/// First 8 bytes of SHA-256(data) as an integer.
std::uint64_t hash64(std::string_view data);
/// Derives an independent seed for a named stream from the run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

// ---- files ----

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temp file then renames over the target.
void atomic_write(const std::filesystem::path& path, std::string_view content);

// ---- bounded concurrency ----

/// Runs fn(i) for i in [0, count) on at most `concurrency` threads. Exceptions
/// escaping fn are rethrown (first one wins) after all workers stop.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t concurrency, Fn&& fn) {
  if (count == 0) return;
  if (concurrency <= 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t n = std::min(concurrency, count);
    pool.reserve(n);
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace cine
