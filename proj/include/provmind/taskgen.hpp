#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "provmind/provgraph.hpp"

namespace provmind {

enum class TaskKind {
  A1_route_retrieval,
  A2_missing_step,
  A3_next_activity,
  B1_condition_prediction,
  B2_full_condition_set,
  C1_tool_selection,
  D_process_ordering,
};

inline constexpr std::array<TaskKind, 7> kAllTasks{
    TaskKind::A1_route_retrieval,      TaskKind::A2_missing_step,       TaskKind::A3_next_activity,
    TaskKind::B1_condition_prediction, TaskKind::B2_full_condition_set, TaskKind::C1_tool_selection,
    TaskKind::D_process_ordering};

std::string_view to_string(TaskKind t);
/// "A1" style short code.
std::string_view task_code(TaskKind t);
/// Accepts the full name or the short code; throws Error{unknown_task}.
TaskKind task_from_string(std::string_view text);

inline constexpr std::string_view kRouteSeparator = " -> ";
inline constexpr std::string_view kMaskToken = "[MASK]";

struct BenchItem {
  std::string item_id;
  TaskKind task = TaskKind::A1_route_retrieval;
  nlohmann::json question;
  std::vector<std::string> options;
  int gold_index = 0;
  std::string graph_id;
  std::string doi;
  int year = 0;
  MaterialClass material_class = MaterialClass::other;

  bool operator==(const BenchItem&) const = default;
};

nlohmann::json to_json(const BenchItem& item);
BenchItem item_from_json(const nlohmann::json& j);

using CountMap = std::map<std::string, std::size_t>;

/// Corpus-derived candidate pools with occurrence counts.
struct DistractorPools {
  std::map<std::vector<std::string>, std::size_t> routes;
  CountMap activity_labels;
  CountMap tool_labels;
  CountMap material_forms;
  std::map<std::string, CountMap> condition_values;                     // key -> value
  CountMap condition_tuples;                                            // rendered tuple
  std::map<std::string, std::map<std::string, CountMap>> condition_values_by_activity;  // key -> activity -> value
  std::map<std::string, CountMap> successors;                           // activity -> next activity
  std::map<std::string, CountMap> predecessors;                         // activity -> previous activity
  std::map<std::string, CountMap> activities_by_form_transition;        // "in->out" -> activity

  void merge(const DistractorPools& other);
  bool operator==(const DistractorPools&) const = default;
};

/// Throws Error{empty_corpus}.
DistractorPools build_candidate_pools(std::span<const ProcessGraph> corpus, std::size_t jobs = 1);

/// "temperature=...; duration=...; atmosphere=..." or nullopt when the step
/// lacks any of the three.
std::optional<std::string> condition_tuple(const ActivityNode& a);

/// Form transition key of a step: sorted input forms "->" sorted output forms.
std::string form_transition(const ProcessGraph& g, const ActivityNode& a);

struct TaskgenConfig {
  int k_options = 4;
  std::map<TaskKind, std::size_t> caps{{TaskKind::A1_route_retrieval, 1}, {TaskKind::A2_missing_step, 3},
                                       {TaskKind::A3_next_activity, 3},   {TaskKind::B1_condition_prediction, 4},
                                       {TaskKind::B2_full_condition_set, 1}, {TaskKind::C1_tool_selection, 2},
                                       {TaskKind::D_process_ordering, 1}};
  std::size_t d_max_route_length = 10;
  std::size_t d_max_attempts = 400;

  static TaskgenConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SkipRecord {
  std::string graph_id;
  TaskKind task;
  std::size_t ordinal;
  std::string reason;
};

nlohmann::json to_json(const SkipRecord& s);

struct InstantiateResult {
  std::vector<BenchItem> items;
  std::vector<SkipRecord> skips;
};

/// All instantiable items for one graph, task by task. Throws
/// Error{retention_filter_failed}; unmet distractor quotas become skips.
InstantiateResult instantiate_tasks(const ProcessGraph& g, const DistractorPools& pools, const TaskgenConfig& config,
                                    std::uint64_t seed);

struct Benchmark {
  std::vector<BenchItem> items;
  std::vector<SkipRecord> skips;
  std::vector<std::string> filtered_graphs;  // failed the retention filter
};

/// Pools over the retained graphs, then instantiate_tasks per graph in input order.
Benchmark generate_benchmark(std::span<const ProcessGraph> corpus, const TaskgenConfig& config, std::uint64_t seed,
                             std::size_t jobs = 1);

// Ordering payloads ------------------------------------------------------------

/// One step of a D question: visible label and local material refs.
struct OrderingStep {
  std::string label;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

std::vector<OrderingStep> ordering_steps_from_payload(const nlohmann::json& question);

/// Pairs (i, j) such that step i outputs a ref that step j consumes.
std::vector<std::pair<std::size_t, std::size_t>> ordering_constraints(const std::vector<OrderingStep>& steps);

/// True iff the label sequence can be realised by some assignment of steps that
/// respects every constraint (handles repeated labels).
bool label_sequence_admissible(const std::vector<std::string>& step_labels,
                               const std::vector<std::pair<std::size_t, std::size_t>>& constraints,
                               const std::vector<std::string>& sequence);

std::vector<std::string> split_route(std::string_view option);

// Validation -------------------------------------------------------------------

struct ValidityReport {
  bool valid = true;
  std::optional<ErrorCode> error;
  std::string detail;
};

/// Recomputes the gold answer from `g` and checks D distractors.
ValidityReport validate_item(const BenchItem& item, const ProcessGraph& g);

// Benchmark files --------------------------------------------------------------

inline constexpr std::string_view kBenchFormat = "provmind-bench";
inline constexpr int kBenchVersion = 1;

void write_benchmark(const std::string& path, std::span<const BenchItem> items, const nlohmann::json& header_extra);
std::vector<BenchItem> read_benchmark(const std::string& path);

/// Items from a released benchmark dump: lenient about field names (item_id or
/// id, material_class or material_type or category, ...). Fields that are
/// absent stay at their defaults.
std::vector<BenchItem> import_items(const std::string& path);

}  // namespace provmind
