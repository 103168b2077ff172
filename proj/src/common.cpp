#include "provmind/common.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace provmind {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::malformed_document: return "MalformedDocument";
    case ErrorCode::empty_record: return "EmptyRecord";
    case ErrorCode::cyclic_precedence: return "CyclicPrecedence";
    case ErrorCode::invalid_params: return "InvalidParams";
    case ErrorCode::empty_corpus: return "EmptyCorpus";
    case ErrorCode::retention_filter_failed: return "RetentionFilterFailed";
    case ErrorCode::pool_exhausted: return "PoolExhausted";
    case ErrorCode::gold_mismatch: return "GoldMismatch";
    case ErrorCode::distractor_violation_missing: return "DistractorViolationMissing";
    case ErrorCode::missing_year: return "MissingYear";
    case ErrorCode::empty_test_partition: return "EmptyTestPartition";
    case ErrorCode::empty_train_set: return "EmptyTrainSet";
    case ErrorCode::empty_library: return "EmptyLibrary";
    case ErrorCode::embedder_unavailable: return "EmbedderUnavailable";
    case ErrorCode::empty_memory: return "EmptyMemory";
    case ErrorCode::unknown_task: return "UnknownTask";
    case ErrorCode::arity_mismatch: return "ArityMismatch";
    case ErrorCode::missing_context: return "MissingContext";
    case ErrorCode::client_timeout: return "ClientTimeout";
    case ErrorCode::invalid_grid_axis: return "InvalidGridAxis";
    case ErrorCode::unknown_item_id: return "UnknownItemId";
    case ErrorCode::unknown_command: return "UnknownCommand";
    case ErrorCode::config_conflict: return "ConfigConflict";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

namespace {

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) tokens.push_back(std::move(current)), current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool numeric_leading(const std::string& token) {
  if (token.empty()) return false;
  std::size_t i = 0;
  if (token[0] == '-' || token[0] == '+' || token[0] == '~' || token[0] == '<' || token[0] == '>') i = 1;
  return i < token.size() && std::isdigit(static_cast<unsigned char>(token[i]));
}

}  // namespace

std::string canonical_label(std::string_view text) {
  return lower(join(split_whitespace(text), " "));
}

std::string canonical_value(std::string_view text) {
  auto tokens = split_whitespace(text);
  bool previous_numeric = false;
  for (auto& token : tokens) {
    const bool numeric = numeric_leading(token);
    if (numeric || previous_numeric) token = lower(token);
    previous_numeric = numeric;
  }
  return join(tokens, " ");
}

std::string canonical_key(std::string_view text) {
  std::string out = canonical_label(text);
  for (char& c : out) {
    if (c == ' ' || c == '-') c = '_';
  }
  return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return splitmix64(seed ^ (splitmix64(value) + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

std::uint64_t hash_combine(std::uint64_t seed, std::string_view value) {
  return hash_combine(seed, fnv1a64(value));
}

std::string hex64(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return out;
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::invalid_params, "Rng::index on empty range");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t draw = engine_();
  while (draw >= limit) draw = engine_();
  return static_cast<std::size_t>(draw % n);
}

double Rng::unit() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::size_t Rng::weighted(const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (weights.empty() || !(total > 0.0)) {
    throw Error(ErrorCode::invalid_params, "Rng::weighted needs positive total weight");
  }
  double target = unit() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (target < weights[i]) return i;
    target -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;) {
    if (weights[i] > 0.0) return i;
  }
  return weights.size() - 1;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  const std::size_t uni = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& body) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const std::size_t workers = std::min(jobs, n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  threads.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace provmind
