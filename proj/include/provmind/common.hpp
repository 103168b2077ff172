#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace provmind {

inline constexpr std::string_view kToolVersion = "provmind 1.0.0";

enum class ErrorCode {
  malformed_document,
  empty_record,
  cyclic_precedence,
  invalid_params,
  empty_corpus,
  retention_filter_failed,
  pool_exhausted,
  gold_mismatch,
  distractor_violation_missing,
  missing_year,
  empty_test_partition,
  empty_train_set,
  empty_library,
  embedder_unavailable,
  empty_memory,
  unknown_task,
  arity_mismatch,
  missing_context,
  client_timeout,
  invalid_grid_axis,
  unknown_item_id,
  unknown_command,
  config_conflict,
  io_error,
};

std::string_view to_string(ErrorCode code);

/// Every recoverable failure in the toolkit is reported as an Error carrying
/// one of the named codes so callers (and the CLI) can map it to a policy.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using AttributeMap = std::map<std::string, std::string>;

// Canonicalization -----------------------------------------------------------

/// Lowercase, trim and collapse internal whitespace.
std::string canonical_label(std::string_view text);

/// Trim, collapse whitespace and lowercase unit tokens (tokens that carry or
/// follow a number). Non-unit words keep their case.
std::string canonical_value(std::string_view text);

/// Lowercase, trim, spaces and dashes folded to underscores.
std::string canonical_key(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Hashing ----------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value);
std::uint64_t hash_combine(std::uint64_t seed, std::string_view value);
std::string hex64(std::uint64_t value);

/// Seed mixing for per-item randomness: independent of scheduling order.
template <typename... Parts>
std::uint64_t derive_seed(std::uint64_t base, const Parts&... parts) {
  std::uint64_t h = splitmix64(base);
  ((h = hash_combine(h, parts)), ...);
  return h;
}

// Random numbers -------------------------------------------------------------

/// Thin wrapper over mt19937_64. The standard distributions are
/// implementation-defined, so uniform draws are derived here to keep every
/// generated artifact byte-identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, n). n must be positive.
  std::size_t index(std::size_t n);
  /// Uniform in [0, 1).
  double unit();
  bool bernoulli(double p) { return unit() < p; }
  /// Draw an index with probability proportional to weights[i].
  std::size_t weighted(const std::vector<double>& weights);

  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Set similarity ---------------------------------------------------------------

/// |a ∩ b| / |a ∪ b|; two empty sets are identical (1.0).
double jaccard(const std::set<std::string>& a, const std::set<std::string>& b);

// Parallelism ------------------------------------------------------------------

/// Runs body(i) for i in [0, n) on at most `jobs` threads. Callers write into
/// pre-sized slots so results stay in input order.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body);

}  // namespace provmind
