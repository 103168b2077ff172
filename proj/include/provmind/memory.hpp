#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provmind/embedding.hpp"
#include "provmind/provgraph.hpp"
#include "provmind/taskgen.hpp"

namespace provmind {

struct ProcessSummary {
  std::string graph_id;
  std::string doi;
  int year = 0;
  MaterialClass material_class = MaterialClass::other;
  std::vector<std::string> route;
  std::vector<AttributeMap> step_conditions;  // parallel to route; may be empty
  std::vector<std::string> precursors;
  std::vector<std::string> products;
  std::vector<std::string> tools;
  std::size_t route_length = 0;

  bool operator==(const ProcessSummary&) const = default;
};

ProcessSummary summarize(const ProcessGraph& g);

/// "precursors: a, b | route: op(k=v; k=v) -> op | products: c | tools: t".
std::string linearize(const ProcessSummary& s);

struct StepEntry {
  std::string graph_id;
  std::string label;
  std::size_t position = 0;
  double normalized_position = 0.0;
  std::optional<std::string> previous;
  std::optional<std::string> next;
  std::vector<std::string> tools;
  AttributeMap conditions;
  std::vector<std::string> input_labels;
  std::vector<std::string> input_forms;
  std::vector<std::string> output_labels;
  std::vector<std::string> output_forms;

  bool operator==(const StepEntry&) const = default;
};

/// Target-step context for match_steps. Absent fields contribute nothing.
struct StepQuery {
  std::optional<std::string> label;
  std::optional<std::string> previous;
  std::optional<std::string> next;
  std::optional<double> normalized_position;
  std::vector<std::string> input_forms;

  static StepQuery from_entry(const StepEntry& e);
};

struct StepWeights {
  double label = 1.0;
  double neighbours = 0.5;
  double position = 0.25;
  double forms = 0.25;

  bool operator==(const StepWeights&) const = default;
};

struct MemoryConfig {
  std::size_t max_prefix_length = 4;
  StepWeights step_weights;
  std::uint64_t structure_seed = 7;

  static MemoryConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct EmbeddingRecord {
  Vector text;
  Vector structure;
};

using Transition = std::pair<std::string, std::string>;

struct ProcessMemory {
  std::string split_id;
  std::string corpus_hash;
  MemoryConfig config;
  std::string text_embedder;
  std::vector<ProcessSummary> processes;  // sorted by graph_id
  std::map<Transition, std::size_t> transition_table;
  std::map<std::vector<std::string>, CountMap> prefix_index;
  std::vector<StepEntry> step_library;
  std::map<std::string, EmbeddingRecord> embedding_store;

  const ProcessSummary* find(const std::string& graph_id) const;
  /// Every activity label seen in a route.
  std::set<std::string> vocabulary() const;
  std::set<std::string> graph_ids() const;
};

/// Builds memory from training graphs only. If `allowed_ids` is given, every
/// graph must belong to it (Error{invalid_params} otherwise). Throws
/// Error{empty_train_set}.
ProcessMemory build_memory(std::span<const ProcessGraph> train_graphs, const MemoryConfig& config,
                           const TextEmbedder& text_embedder, const FrozenGraphAttention& structure,
                           std::size_t jobs = 1, const std::set<std::string>* allowed_ids = nullptr);

enum class Backoff { exact, suffix, unigram, uniform };
std::string_view to_string(Backoff b);

struct NextDistribution {
  std::map<std::string, double> probabilities;
  Backoff backoff = Backoff::exact;
  std::size_t matched_length = 0;  // length of the prefix key actually used
};

NextDistribution next_distribution(const ProcessMemory& memory, const std::vector<std::string>& prefix);

struct ScoredStep {
  const StepEntry* entry = nullptr;
  double score = 0.0;
};

double step_compatibility(const StepQuery& query, const StepEntry& entry, const StepWeights& w);

/// Top `top_m` library entries by step_compatibility, ties by (graph_id,
/// position). Throws Error{empty_library}, or Error{invalid_params} when the
/// query carries neither a label nor a neighbour.
std::vector<ScoredStep> match_steps(const ProcessMemory& memory, const StepQuery& query, std::size_t top_m,
                                    const StepWeights& weights,
                                    const std::function<bool(const StepEntry&)>& filter = {});

inline constexpr std::string_view kMemoryFormat = "provmind-memory";
inline constexpr int kMemoryVersion = 1;

nlohmann::json to_json(const ProcessMemory& memory);
ProcessMemory memory_from_json(const nlohmann::json& j);
void save_memory(const std::string& path, const ProcessMemory& memory, const nlohmann::json& header_extra);
ProcessMemory load_memory(const std::string& path);

}  // namespace provmind
