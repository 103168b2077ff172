#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provmind/chat.hpp"
#include "provmind/embedding.hpp"
#include "provmind/memory.hpp"
#include "provmind/prompts.hpp"
#include "provmind/retrieval.hpp"
#include "provmind/scoring.hpp"
#include "provmind/taskgen.hpp"

namespace provmind {

enum class Policy {
  argmax_symbolic,
  argmax_neural,
  argmax_hybrid,
  provmind_llm,
  zero_shot,
  few_shot,
  rag,
  graphrag,
  external_predictions,
  uniform_random,
  oracle,
};

std::string_view to_string(Policy p);
/// Throws Error{invalid_params}.
Policy policy_from_string(std::string_view text);
bool needs_chat_client(Policy p);

struct TokenBudgets {
  int planning = 96;
  int answer = 48;
  int baseline = 16;
  bool operator==(const TokenBudgets&) const = default;
};

struct PolicyConfig {
  Policy policy = Policy::argmax_hybrid;
  RetrievalWeights weights;
  std::size_t k = 8;
  double lambda = 0.5;
  bool planning = true;
  bool fallback = true;
  bool symbolic_scoring = true;  // off: evidence and fallback use the neural scores only
  TokenBudgets budgets;
  std::size_t few_shot_count = 3;
  std::uint64_t few_shot_seed = 42;
  std::size_t rag_k = 3;
  std::size_t graph_k = 3;
  std::size_t graph_hops = 1;
  double temperature = 0.0;
  int retries = 1;
  std::size_t max_in_flight = 4;
  bool log_prompts = false;  // full prompt text in the item log instead of a hash
  SymbolicConfig symbolic;
  std::uint64_t seed = 42;
  std::string label;

  /// Throws Error{config_conflict}.
  void validate() const;
  /// λ actually used for fusion.
  double effective_lambda() const { return symbolic_scoring ? lambda : 0.0; }

  static PolicyConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Highest value, ties to the lowest index; -1 for an empty vector.
int answer_argmax(const std::vector<double>& scores);
int answer_argmax(const OptionScores& scores);  // over fused

struct LlmOutcome {
  int answer = -1;
  bool fallback = false;
  std::string fallback_reason;
  std::string plan;
  nlohmann::json exchanges = nlohmann::json::array();  // {mode, request, response} verbatim
};

/// Optional plan call then the answer call. A timeout (after retries) or an
/// unparseable reply falls back to the symbolic argmax, or the neural argmax
/// when symbolic scoring is off. With fallback disabled such items get -1.
LlmOutcome llm_answer(const BenchItem& item, const PromptContext& context, const OptionScores& scores,
                      const ChatClient& client, const PolicyConfig& config);

/// Retrieval views computed once per item; reused across policy configurations.
struct PreparedItem {
  RetrievalQuery query;
  std::vector<RetrievedPrecedent> views;
};

struct PreparedSet {
  std::vector<BenchItem> items;
  std::vector<PreparedItem> prepared;
};

PreparedSet prepare_items(std::span<const BenchItem> items, const ProcessMemory& memory, const TextEmbedder& text,
                          const FrozenGraphAttention& structure, std::size_t jobs = 1);

struct EvalResources {
  const TextEmbedder* text = nullptr;
  std::span<const BenchItem> train_items;  // exemplar pool for few_shot
  std::size_t jobs = 1;
  std::string split_id;
};

struct ItemLog {
  std::string item_id;
  TaskKind task = TaskKind::A1_route_retrieval;
  std::string graph_id;
  int gold = 0;
  int answer = -1;
  bool correct = false;
  bool fallback = false;
  std::string flag;  // non-empty when the item failed or was not answered
  std::vector<std::string> precedents;
  std::vector<std::string> exemplars;
  std::optional<OptionScores> scores;
  std::vector<std::string> prompts;  // hash, or full text when log_prompts
  std::vector<std::string> responses;

  nlohmann::json to_json() const;
};

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

struct EvalReport {
  std::string label;
  nlohmann::json policy;
  std::string split_id;
  std::string memory_split;
  std::map<TaskKind, Tally> per_task;
  Tally overall;
  double wall_clock_seconds = 0.0;
  std::size_t flagged = 0;
  std::size_t fallbacks = 0;
  std::size_t self_precedents = 0;  // precedents drawn from the item's own graph
  std::vector<ItemLog> items;

  nlohmann::json to_json(bool include_wall_clock = false) const;
  std::string to_text() const;
};

/// Summary fields only; the item log is not restored.
EvalReport eval_report_from_json(const nlohmann::json& j);

EvalReport evaluate(const PreparedSet& set, const ProcessMemory& memory, const PolicyConfig& config,
                    const ChatClient* client, const EvalResources& resources);

/// Answers by item id, as indices. Accepts {"id": idx|"B", ...}, an array of
/// {"item_id", "answer"} records, or JSONL with or without a header line.
std::map<std::string, int> read_predictions(const std::string& path);

/// Throws Error{unknown_item_id} for predictions that match no item.
EvalReport score_external_predictions(std::span<const BenchItem> items, const std::map<std::string, int>& predictions,
                                      const std::string& split_id = {});

struct AblationRow {
  std::string group;
  std::string label;
  PolicyConfig config;
};

/// Rows grouped as reference, modules, scoring, retrieval, fusion and top-k.
/// `groups` empty means all of them. Throws Error{invalid_grid_axis}.
std::vector<AblationRow> default_ablation_grid(const PolicyConfig& base, const std::vector<std::string>& groups = {});

/// {"axis": [values...], ...} expanded as a cartesian product. Axes: planning,
/// fallback, symbolic_scoring, scoring, lambda, views, fusion, k. Throws
/// Error{invalid_grid_axis} for anything else.
std::vector<AblationRow> ablation_grid_from_json(const nlohmann::json& grid, const PolicyConfig& base);

RetrievalWeights view_subset_weights(const std::string& subset);
RetrievalWeights fusion_preset(const std::string& preset);

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<EvalReport> reports;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

AblationResult ablation_from_json(const nlohmann::json& j);

AblationResult run_ablation(const std::vector<AblationRow>& rows, const PreparedSet& set, const ProcessMemory& memory,
                            const ChatClient* client, const EvalResources& resources);

void write_item_log(const std::string& path, const EvalReport& report, const nlohmann::json& header_extra);

}  // namespace provmind
