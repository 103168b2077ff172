#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provmind/embedding.hpp"
#include "provmind/memory.hpp"
#include "provmind/retrieval.hpp"
#include "provmind/taskgen.hpp"

namespace provmind {

/// Blend weights inside the task scorers.
struct SymbolicConfig {
  double route_transition = 0.5;  // A1/D: smoothed transition term
  double route_sequence = 0.5;    // A1/D: LCS agreement with precedents
  double d_bonus = 1.0;           // D: all visible constraints satisfied
  double a2_left = 0.4;           // A2: next_distribution given the left context
  double a2_right = 0.3;          // A2: reverse-neighbour frequency given the right context
  double a2_position = 0.3;       // A2: positional frequency in the step library
  double position_window = 0.1;
  double a3_distribution = 0.5;
  double a3_precedents = 0.5;
  std::size_t top_m = 20;  // B1/B2/C1 matched steps
  /// Replaces the transition table with a uniform one wherever a scorer reads
  /// it (A1/D transition term, A2 right-context term).
  bool uniform_transitions = false;

  static SymbolicConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct OptionScore {
  double raw_sym = 0.0;
  double raw_neu = 0.0;
  double sym = 0.0;  // min-max normalized
  double neu = 0.0;
  double fused = 0.0;
  nlohmann::json terms = nlohmann::json::object();
};

struct OptionScores {
  std::string item_id;
  std::vector<OptionScore> options;
  double lambda = 0.5;
};

nlohmann::json to_json(const OptionScores& s);

/// Min-max over the vector; a constant vector maps to 0.5 everywhere.
std::vector<double> minmax_normalize(const std::vector<double>& raw);

/// Add-one smoothed P(b | a) over the memory vocabulary plus one unseen slot.
double transition_probability(const ProcessMemory& memory, const std::string& a, const std::string& b,
                              bool uniform = false);

/// LCS length over max(|a|, |b|); 1 for two empty sequences.
double normalized_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// raw_sym per option. Throws Error{unknown_task} for tasks it cannot score.
OptionScores score_options_symbolic(const BenchItem& item, const std::vector<RetrievedPrecedent>& precedents,
                                    const ProcessMemory& memory, const SymbolicConfig& config = {});

/// The item's process context with `option` written into the answer slot.
ProcessSummary option_completed_summary(const BenchItem& item, const std::string& option);

/// raw_neu per option: max over precedents of the unit-mapped cosine between
/// the option-completed text and the precedent's stored text embedding.
OptionScores score_options_neural(const BenchItem& item, const std::vector<RetrievedPrecedent>& precedents,
                                  const ProcessMemory& memory, const TextEmbedder& embedder);

/// Normalizes both raw vectors and fills fused = λ·sym + (1−λ)·neu. Throws
/// Error{arity_mismatch} when the inputs disagree on item or option count.
OptionScores fuse_scores(const OptionScores& sym, const OptionScores& neu, double lambda = 0.5);

}  // namespace provmind
