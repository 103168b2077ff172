#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "provmind/embedding.hpp"
#include "provmind/memory.hpp"
#include "provmind/taskgen.hpp"

namespace provmind {

struct RetrievalWeights {
  double alpha = 0.4;  // text view
  double beta = 0.3;   // structure view
  double gamma = 0.3;  // heuristic view

  /// Throws Error{config_conflict} for negative weights or a sum other than 1.
  void validate() const;
  bool operator==(const RetrievalWeights&) const = default;

  static RetrievalWeights from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct RetrievedPrecedent {
  std::string graph_id;
  double s_text = 0.0;
  double s_struct = 0.0;
  double s_heur = 0.0;
  double s_ret = 0.0;
};

nlohmann::json to_json(const RetrievedPrecedent& p);

struct RetrievalQuery {
  ProcessSummary summary;
  Vector text;
  Vector structure;
};

/// Mean of activity-set Jaccard, min/max route-length ratio and precursor-set
/// Jaccard. Two empty routes agree on length.
double score_heuristic(const ProcessSummary& q, const ProcessSummary& p);

RetrievalQuery make_query(const ProcessSummary& summary, const ProcessGraph& view, const TextEmbedder& text,
                          const FrozenGraphAttention& structure);

/// The process context visible in an item's question, as a summary and as a
/// small graph (chained activities, precursors in, products out, step inputs,
/// or the full step/ref structure for ordering items). Never reads the gold.
ProcessSummary query_summary(const BenchItem& item);
ProcessGraph query_graph(const BenchItem& item);

RetrievalQuery query_from_item(const BenchItem& item, const TextEmbedder& text, const FrozenGraphAttention& structure);

/// All processes scored, descending s_ret, ties by ascending graph_id; at most
/// k results. Throws Error{empty_memory}, Error{invalid_params} for k = 0.
std::vector<RetrievedPrecedent> retrieve(const RetrievalQuery& query, const ProcessMemory& memory,
                                         const RetrievalWeights& weights, std::size_t k = 8);

/// Per-process view scores (s_ret left at 0) for every process in memory.
std::vector<RetrievedPrecedent> score_views(const RetrievalQuery& query, const ProcessMemory& memory);

/// Fill s_ret under `weights` and keep the top k.
std::vector<RetrievedPrecedent> fuse_and_rank(std::vector<RetrievedPrecedent> views, const RetrievalWeights& weights,
                                              std::size_t k);

}  // namespace provmind
