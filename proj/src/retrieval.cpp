#include "provmind/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace provmind {

using nlohmann::json;

void RetrievalWeights::validate() const {
  if (alpha < 0.0 || beta < 0.0 || gamma < 0.0) {
    throw Error(ErrorCode::config_conflict, "retrieval weights must be non-negative");
  }
  if (std::abs(alpha + beta + gamma - 1.0) > 1e-9) {
    throw Error(ErrorCode::config_conflict, "retrieval weights must sum to 1");
  }
}

RetrievalWeights RetrievalWeights::from_json(const json& j) {
  RetrievalWeights w;
  w.alpha = j.value("alpha", w.alpha);
  w.beta = j.value("beta", w.beta);
  w.gamma = j.value("gamma", w.gamma);
  return w;
}

json RetrievalWeights::to_json() const { return json{{"alpha", alpha}, {"beta", beta}, {"gamma", gamma}}; }

json to_json(const RetrievedPrecedent& p) {
  return json{{"graph_id", p.graph_id},
              {"s_text", p.s_text},
              {"s_struct", p.s_struct},
              {"s_heur", p.s_heur},
              {"s_ret", p.s_ret}};
}

double score_heuristic(const ProcessSummary& q, const ProcessSummary& p) {
  const std::set<std::string> qa(q.route.begin(), q.route.end());
  const std::set<std::string> pa(p.route.begin(), p.route.end());
  const std::size_t lq = q.route.size();
  const std::size_t lp = p.route.size();
  const double length = std::max(lq, lp) == 0 ? 1.0
                                              : static_cast<double>(std::min(lq, lp)) /
                                                    static_cast<double>(std::max(lq, lp));
  std::set<std::string> qp;
  std::set<std::string> pp;
  for (const auto& s : q.precursors) qp.insert(canonical_label(s));
  for (const auto& s : p.precursors) pp.insert(canonical_label(s));
  return (jaccard(qa, pa) + length + jaccard(qp, pp)) / 3.0;
}

RetrievalQuery make_query(const ProcessSummary& summary, const ProcessGraph& view, const TextEmbedder& text,
                          const FrozenGraphAttention& structure) {
  return {summary, text.embed_one(linearize(summary)), structure.embed(view)};
}

namespace {

std::vector<std::string> strings_at(const json& q, const char* key) {
  std::vector<std::string> out;
  if (auto it = q.find(key); it != q.end() && it->is_array()) {
    for (const auto& v : *it) {
      if (v.is_string()) out.push_back(v.get<std::string>());
    }
  }
  return out;
}

std::vector<std::string> visible_route(const BenchItem& item) {
  const json& q = item.question;
  switch (item.task) {
    case TaskKind::A1_route_retrieval:
      return {};
    case TaskKind::A2_missing_step: {
      std::vector<std::string> route;
      for (auto& label : strings_at(q, "route")) {
        if (label != kMaskToken) route.push_back(std::move(label));
      }
      return route;
    }
    case TaskKind::A3_next_activity:
      return strings_at(q, "prefix");
    case TaskKind::D_process_ordering: {
      std::vector<std::string> route;
      for (const auto& s : ordering_steps_from_payload(q)) route.push_back(s.label);
      return route;
    }
    default:
      return strings_at(q, "route");
  }
}

}  // namespace

ProcessSummary query_summary(const BenchItem& item) {
  ProcessSummary s;
  s.graph_id = item.item_id;
  s.route = visible_route(item);
  s.route_length = s.route.size();
  s.precursors = strings_at(item.question, "precursors");
  s.products = strings_at(item.question, "target_products");
  return s;
}

ProcessGraph query_graph(const BenchItem& item) {
  ProcessGraph g;
  g.record_id = item.item_id;
  const json& q = item.question;
  std::size_t counter = 0;
  auto material = [&](const std::string& label) {
    EntityNode e;
    e.id = "q" + std::to_string(++counter);
    e.label = label;
    g.material_entities.push_back(e);
    return e.id;
  };
  if (item.task == TaskKind::D_process_ordering) {
    std::map<std::string, std::string> ids;
    std::size_t pos = 0;
    for (const auto& step : q.value("steps", json::array())) {
      ActivityNode a;
      a.id = "s" + std::to_string(pos);
      a.label = step.value("label", "");
      a.source_position = static_cast<int>(pos++);
      for (const auto& in : step.value("inputs", json::array())) {
        const std::string ref = in.value("ref", "");
        if (!ids.count(ref)) ids[ref] = material(in.value("label", ""));
        g.usage_edges.push_back({ids[ref], a.id});
      }
      for (const auto& out : step.value("outputs", json::array())) {
        const std::string ref = out.value("ref", "");
        if (!ids.count(ref)) ids[ref] = material(out.value("label", ""));
        g.generation_edges.push_back({a.id, ids[ref]});
      }
      g.activities.push_back(std::move(a));
    }
    return g;
  }
  const ProcessSummary s = query_summary(item);
  for (std::size_t i = 0; i < s.route.size(); ++i) {
    ActivityNode a;
    a.id = "s" + std::to_string(i);
    a.label = s.route[i];
    a.source_position = static_cast<int>(i);
    g.activities.push_back(std::move(a));
    if (i > 0) {
      const std::string link = material("intermediate");
      g.generation_edges.push_back({g.activities[i - 1].id, link});
      g.usage_edges.push_back({link, g.activities[i].id});
    }
  }
  if (!g.activities.empty()) {
    for (const auto& p : s.precursors) g.usage_edges.push_back({material(p), g.activities.front().id});
    for (const auto& p : s.products) g.generation_edges.push_back({g.activities.back().id, material(p)});
    const std::size_t step = q.value("step_index", std::size_t{0});
    if (q.contains("step_inputs") && step < g.activities.size()) {
      for (const auto& in : q["step_inputs"]) {
        g.usage_edges.push_back({material(in.value("label", "")), g.activities[step].id});
      }
    }
  } else {
    for (const auto& p : s.precursors) material(p);
    for (const auto& p : s.products) material(p);
  }
  return g;
}

RetrievalQuery query_from_item(const BenchItem& item, const TextEmbedder& text, const FrozenGraphAttention& structure) {
  return make_query(query_summary(item), query_graph(item), text, structure);
}

std::vector<RetrievedPrecedent> score_views(const RetrievalQuery& query, const ProcessMemory& memory) {
  if (memory.processes.empty()) throw Error(ErrorCode::empty_memory, "process memory holds no processes");
  std::vector<RetrievedPrecedent> scored;
  scored.reserve(memory.processes.size());
  for (const auto& p : memory.processes) {
    RetrievedPrecedent r;
    r.graph_id = p.graph_id;
    auto emb = memory.embedding_store.find(p.graph_id);
    if (emb != memory.embedding_store.end()) {
      if (emb->second.text.size() != query.text.size() || emb->second.structure.size() != query.structure.size()) {
        throw Error(ErrorCode::invalid_params, "query embedding dimension differs from the memory's embedder");
      }
      r.s_text = cosine_to_unit(cosine_similarity(query.text, emb->second.text));
      r.s_struct = cosine_to_unit(cosine_similarity(query.structure, emb->second.structure));
    }
    r.s_heur = score_heuristic(query.summary, p);
    scored.push_back(std::move(r));
  }
  return scored;
}

std::vector<RetrievedPrecedent> fuse_and_rank(std::vector<RetrievedPrecedent> views, const RetrievalWeights& weights,
                                              std::size_t k) {
  if (k == 0) throw Error(ErrorCode::invalid_params, "k must be >= 1");
  weights.validate();
  for (auto& r : views) r.s_ret = weights.alpha * r.s_text + weights.beta * r.s_struct + weights.gamma * r.s_heur;
  const std::size_t m = std::min(k, views.size());
  std::partial_sort(views.begin(), views.begin() + static_cast<std::ptrdiff_t>(m), views.end(),
                    [](const RetrievedPrecedent& a, const RetrievedPrecedent& b) {
                      if (a.s_ret != b.s_ret) return a.s_ret > b.s_ret;
                      return a.graph_id < b.graph_id;
                    });
  views.resize(m);
  return views;
}

std::vector<RetrievedPrecedent> retrieve(const RetrievalQuery& query, const ProcessMemory& memory,
                                         const RetrievalWeights& weights, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::invalid_params, "k must be >= 1");
  return fuse_and_rank(score_views(query, memory), weights, k);
}

}  // namespace provmind
