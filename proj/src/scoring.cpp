#include "provmind/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace provmind {

using nlohmann::json;

SymbolicConfig SymbolicConfig::from_json(const json& j) {
  SymbolicConfig c;
  c.route_transition = j.value("route_transition", c.route_transition);
  c.route_sequence = j.value("route_sequence", c.route_sequence);
  c.d_bonus = j.value("d_bonus", c.d_bonus);
  c.a2_left = j.value("a2_left", c.a2_left);
  c.a2_right = j.value("a2_right", c.a2_right);
  c.a2_position = j.value("a2_position", c.a2_position);
  c.position_window = j.value("position_window", c.position_window);
  c.a3_distribution = j.value("a3_distribution", c.a3_distribution);
  c.a3_precedents = j.value("a3_precedents", c.a3_precedents);
  c.top_m = j.value("top_m", c.top_m);
  c.uniform_transitions = j.value("uniform_transitions", c.uniform_transitions);
  return c;
}

json SymbolicConfig::to_json() const {
  return json{{"route_transition", route_transition},
              {"route_sequence", route_sequence},
              {"d_bonus", d_bonus},
              {"a2_left", a2_left},
              {"a2_right", a2_right},
              {"a2_position", a2_position},
              {"position_window", position_window},
              {"a3_distribution", a3_distribution},
              {"a3_precedents", a3_precedents},
              {"top_m", top_m},
              {"uniform_transitions", uniform_transitions}};
}

json to_json(const OptionScores& s) {
  json options = json::array();
  for (const auto& o : s.options) {
    options.push_back({{"raw_sym", o.raw_sym},
                       {"raw_neu", o.raw_neu},
                       {"sym", o.sym},
                       {"neu", o.neu},
                       {"fused", o.fused},
                       {"terms", o.terms}});
  }
  return json{{"item_id", s.item_id}, {"lambda", s.lambda}, {"options", options}};
}

std::vector<double> minmax_normalize(const std::vector<double>& raw) {
  if (raw.empty()) return {};
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double min = *lo;
  const double range = *hi - *lo;
  std::vector<double> out(raw.size(), 0.5);
  if (range > 0.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = std::clamp((raw[i] - min) / range, 0.0, 1.0);
  }
  return out;
}

double normalized_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return static_cast<double>(prev[b.size()]) / static_cast<double>(std::max(a.size(), b.size()));
}

namespace {

/// Per-call view of memory statistics used by the symbolic scorers.
struct Statistics {
  const ProcessMemory& memory;
  bool uniform;
  double vocab;  // |V| + 1 for the unseen slot
  std::map<std::string, std::size_t> out_totals;
  std::map<std::string, std::size_t> in_totals;

  Statistics(const ProcessMemory& m, bool uniform_transitions)
      : memory(m), uniform(uniform_transitions), vocab(static_cast<double>(m.vocabulary().size() + 1)) {
    for (const auto& [pair, count] : m.transition_table) {
      out_totals[pair.first] += count;
      in_totals[pair.second] += count;
    }
  }

  std::size_t count(const std::string& a, const std::string& b) const {
    auto it = memory.transition_table.find({a, b});
    return it == memory.transition_table.end() ? 0 : it->second;
  }

  double transition(const std::string& a, const std::string& b) const {
    if (uniform) return 1.0 / vocab;
    auto it = out_totals.find(a);
    const double total = it == out_totals.end() ? 0.0 : static_cast<double>(it->second);
    return (static_cast<double>(count(a, b)) + 1.0) / (total + vocab);
  }

  /// Geometric mean of adjacent transitions; 1/V for a single step.
  double route_transition(const std::vector<std::string>& route) const {
    if (route.size() < 2) return 1.0 / vocab;
    double log_sum = 0.0;
    for (std::size_t i = 0; i + 1 < route.size(); ++i) log_sum += std::log(transition(route[i], route[i + 1]));
    return std::exp(log_sum / static_cast<double>(route.size() - 1));
  }
};

std::vector<std::string> strings_at(const json& q, const char* key) {
  std::vector<std::string> out;
  if (auto it = q.find(key); it != q.end() && it->is_array()) {
    for (const auto& v : *it) {
      if (v.is_string()) out.push_back(v.get<std::string>());
    }
  }
  return out;
}

struct PrecedentRoutes {
  std::vector<std::pair<std::size_t, const ProcessSummary*>> ranked;  // (rank, summary)
  std::map<std::string, std::size_t> rank_of;
};

PrecedentRoutes precedent_routes(const std::vector<RetrievedPrecedent>& precedents, const ProcessMemory& memory) {
  PrecedentRoutes out;
  for (std::size_t r = 0; r < precedents.size(); ++r) {
    if (const auto* p = memory.find(precedents[r].graph_id)) {
      out.ranked.emplace_back(r, p);
      out.rank_of.emplace(p->graph_id, r);
    }
  }
  return out;
}

void score_route_options(const BenchItem& item, const PrecedentRoutes& prec, const Statistics& stats,
                         const SymbolicConfig& config, OptionScores& out) {
  std::vector<std::string> step_labels;
  std::vector<std::pair<std::size_t, std::size_t>> constraints;
  const bool ordering = item.task == TaskKind::D_process_ordering;
  if (ordering) {
    const auto steps = ordering_steps_from_payload(item.question);
    for (const auto& s : steps) step_labels.push_back(s.label);
    constraints = ordering_constraints(steps);
  }
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    const auto route = split_route(item.options[i]);
    const double transition = stats.route_transition(route);
    double sequence = 0.0;
    for (const auto& [rank, p] : prec.ranked) sequence = std::max(sequence, normalized_lcs(route, p->route));
    auto& o = out.options[i];
    o.raw_sym = config.route_transition * transition + config.route_sequence * sequence;
    o.terms = {{"transition", transition}, {"sequence", sequence}};
    if (ordering) {
      const bool satisfied = label_sequence_admissible(step_labels, constraints, route);
      if (satisfied) o.raw_sym += config.d_bonus;
      o.terms["constraints_satisfied"] = satisfied;
    }
  }
}

void score_a2(const BenchItem& item, const Statistics& stats, const SymbolicConfig& config, OptionScores& out) {
  const auto route = strings_at(item.question, "route");
  const std::size_t mask = item.question.value("mask_index", std::size_t{0});
  const std::vector<std::string> left(route.begin(), route.begin() + static_cast<std::ptrdiff_t>(std::min(mask, route.size())));
  const auto dist = next_distribution(stats.memory, left);
  const bool has_right = mask + 1 < route.size();
  const std::string right = has_right ? route[mask + 1] : std::string();
  const double qpos = route.size() > 1 ? static_cast<double>(mask) / static_cast<double>(route.size() - 1) : 0.0;
  CountMap window;
  std::size_t window_total = 0;
  for (const auto& e : stats.memory.step_library) {
    if (std::abs(e.normalized_position - qpos) <= config.position_window + 1e-12) {
      ++window[e.label];
      ++window_total;
    }
  }
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    const std::string& c = item.options[i];
    auto d = dist.probabilities.find(c);
    const double left_term = d == dist.probabilities.end() ? 0.0 : d->second;
    double right_term = 0.0;
    if (has_right && stats.uniform) {
      right_term = 1.0 / stats.vocab;
    } else if (has_right) {
      auto total = stats.in_totals.find(right);
      if (total != stats.in_totals.end() && total->second > 0) {
        right_term = static_cast<double>(stats.count(c, right)) / static_cast<double>(total->second);
      }
    }
    auto w = window.find(c);
    const double pos_term =
        window_total == 0 || w == window.end() ? 0.0 : static_cast<double>(w->second) / static_cast<double>(window_total);
    auto& o = out.options[i];
    o.raw_sym = config.a2_left * left_term + config.a2_right * right_term + config.a2_position * pos_term;
    o.terms = {{"left", left_term}, {"right", right_term}, {"position", pos_term}, {"backoff", to_string(dist.backoff)}};
  }
}

void score_a3(const BenchItem& item, const PrecedentRoutes& prec, const Statistics& stats, const SymbolicConfig& config,
              OptionScores& out) {
  const auto prefix = strings_at(item.question, "prefix");
  const auto dist = next_distribution(stats.memory, prefix);
  CountMap successors;
  std::size_t total = 0;
  if (!prefix.empty()) {
    for (const auto& [rank, p] : prec.ranked) {
      for (std::size_t j = 0; j + 1 < p->route.size(); ++j) {
        if (p->route[j] == prefix.back()) {
          ++successors[p->route[j + 1]];
          ++total;
        }
      }
    }
  }
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    const std::string& c = item.options[i];
    auto d = dist.probabilities.find(c);
    const double dist_term = d == dist.probabilities.end() ? 0.0 : d->second;
    auto s = successors.find(c);
    const double prec_term =
        total == 0 || s == successors.end() ? 0.0 : static_cast<double>(s->second) / static_cast<double>(total);
    auto& o = out.options[i];
    o.raw_sym = config.a3_distribution * dist_term + config.a3_precedents * prec_term;
    o.terms = {{"distribution", dist_term}, {"precedents", prec_term}, {"backoff", to_string(dist.backoff)}};
  }
}

StepQuery step_query(const BenchItem& item) {
  StepQuery q;
  const auto route = strings_at(item.question, "route");
  const std::size_t pos = item.question.value("step_index", std::size_t{0});
  if (pos < route.size()) {
    q.label = route[pos];
    if (pos > 0) q.previous = route[pos - 1];
    if (pos + 1 < route.size()) q.next = route[pos + 1];
    q.normalized_position = route.size() > 1 ? static_cast<double>(pos) / static_cast<double>(route.size() - 1) : 0.0;
  } else if (item.question.contains("activity")) {
    q.label = item.question["activity"].get<std::string>();
  }
  std::set<std::string> forms;
  for (const auto& in : item.question.value("step_inputs", json::array())) {
    if (in.contains("form")) forms.insert(in["form"].get<std::string>());
  }
  q.input_forms.assign(forms.begin(), forms.end());
  return q;
}

/// Frequency of each option among matched steps, each step weighted
/// 1 + 1/(1 + rank) when its process is a retrieved precedent.
void score_step_options(const BenchItem& item, const PrecedentRoutes& prec, const ProcessMemory& memory,
                        const SymbolicConfig& config,
                        const std::function<bool(const StepEntry&)>& applicable,
                        const std::function<bool(const StepEntry&, const std::string&)>& supports, OptionScores& out) {
  const StepQuery q = step_query(item);
  std::vector<ScoredStep> matched;
  if (q.label || q.previous || q.next) {
    matched = match_steps(memory, q, config.top_m, memory.config.step_weights, applicable);
  }
  double total = 0.0;
  std::vector<double> weights;
  for (const auto& m : matched) {
    auto r = prec.rank_of.find(m.entry->graph_id);
    const double w = 1.0 + (r == prec.rank_of.end() ? 0.0 : 1.0 / (1.0 + static_cast<double>(r->second)));
    weights.push_back(w);
    total += w;
  }
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    double hit = 0.0;
    for (std::size_t m = 0; m < matched.size(); ++m) {
      if (supports(*matched[m].entry, item.options[i])) hit += weights[m];
    }
    auto& o = out.options[i];
    o.raw_sym = total > 0.0 ? hit / total : 0.0;
    o.terms = {{"support", hit}, {"matched_weight", total}, {"matched_steps", matched.size()}};
  }
}

}  // namespace

double transition_probability(const ProcessMemory& memory, const std::string& a, const std::string& b, bool uniform) {
  return Statistics(memory, uniform).transition(a, b);
}

OptionScores score_options_symbolic(const BenchItem& item, const std::vector<RetrievedPrecedent>& precedents,
                                    const ProcessMemory& memory, const SymbolicConfig& config) {
  OptionScores out;
  out.item_id = item.item_id;
  out.options.resize(item.options.size());
  const Statistics stats(memory, config.uniform_transitions);
  const PrecedentRoutes prec = precedent_routes(precedents, memory);
  switch (item.task) {
    case TaskKind::A1_route_retrieval:
    case TaskKind::D_process_ordering:
      score_route_options(item, prec, stats, config, out);
      break;
    case TaskKind::A2_missing_step:
      score_a2(item, stats, config, out);
      break;
    case TaskKind::A3_next_activity:
      score_a3(item, prec, stats, config, out);
      break;
    case TaskKind::B1_condition_prediction: {
      const std::string key = item.question.value("condition_key", "");
      score_step_options(
          item, prec, memory, config, [&](const StepEntry& e) { return e.conditions.count(key) > 0; },
          [&](const StepEntry& e, const std::string& v) {
            auto it = e.conditions.find(key);
            return it != e.conditions.end() && it->second == v;
          },
          out);
      break;
    }
    case TaskKind::B2_full_condition_set: {
      auto tuple_of = [](const StepEntry& e) {
        ActivityNode a;
        a.conditions = e.conditions;
        return condition_tuple(a);
      };
      score_step_options(
          item, prec, memory, config, [&](const StepEntry& e) { return tuple_of(e).has_value(); },
          [&](const StepEntry& e, const std::string& v) { return tuple_of(e) == v; }, out);
      break;
    }
    case TaskKind::C1_tool_selection:
      score_step_options(
          item, prec, memory, config, [](const StepEntry& e) { return !e.tools.empty(); },
          [](const StepEntry& e, const std::string& v) {
            return std::find(e.tools.begin(), e.tools.end(), v) != e.tools.end();
          },
          out);
      break;
    default:
      throw Error(ErrorCode::unknown_task, "no symbolic scorer for " + std::string(to_string(item.task)));
  }
  return out;
}

ProcessSummary option_completed_summary(const BenchItem& item, const std::string& option) {
  ProcessSummary s = query_summary(item);
  const json& q = item.question;
  switch (item.task) {
    case TaskKind::A1_route_retrieval:
    case TaskKind::D_process_ordering:
      s.route = split_route(option);
      break;
    case TaskKind::A2_missing_step: {
      s.route = strings_at(q, "route");
      const std::size_t mask = q.value("mask_index", std::size_t{0});
      if (mask < s.route.size()) s.route[mask] = option;
      break;
    }
    case TaskKind::A3_next_activity:
      s.route.push_back(option);
      break;
    case TaskKind::B1_condition_prediction:
    case TaskKind::B2_full_condition_set: {
      s.step_conditions.assign(s.route.size(), AttributeMap{});
      const std::size_t pos = q.value("step_index", std::size_t{0});
      if (pos < s.route.size()) {
        if (item.task == TaskKind::B1_condition_prediction) {
          s.step_conditions[pos][q.value("condition_key", "")] = option;
        } else {
          std::size_t start = 0;
          while (start <= option.size()) {
            auto end = option.find("; ", start);
            const std::string part = option.substr(start, end == std::string::npos ? std::string::npos : end - start);
            if (auto eq = part.find('='); eq != std::string::npos) {
              s.step_conditions[pos][part.substr(0, eq)] = part.substr(eq + 1);
            }
            if (end == std::string::npos) break;
            start = end + 2;
          }
        }
      }
      break;
    }
    case TaskKind::C1_tool_selection:
      s.tools = {option};
      break;
  }
  s.route_length = s.route.size();
  return s;
}

OptionScores score_options_neural(const BenchItem& item, const std::vector<RetrievedPrecedent>& precedents,
                                  const ProcessMemory& memory, const TextEmbedder& embedder) {
  OptionScores out;
  out.item_id = item.item_id;
  out.options.resize(item.options.size());
  std::vector<std::string> texts;
  for (const auto& o : item.options) texts.push_back(linearize(option_completed_summary(item, o)));
  const auto vectors = embedder.embed(texts);
  for (std::size_t i = 0; i < item.options.size(); ++i) {
    double best = 0.0;
    std::string best_id;
    for (const auto& p : precedents) {
      auto emb = memory.embedding_store.find(p.graph_id);
      if (emb == memory.embedding_store.end() || emb->second.text.size() != vectors[i].size()) continue;
      const double s = cosine_to_unit(cosine_similarity(vectors[i], emb->second.text));
      if (best_id.empty() || s > best) {
        best = s;
        best_id = p.graph_id;
      }
    }
    out.options[i].raw_neu = best;
    out.options[i].terms = {{"nearest", best_id}};
  }
  return out;
}

OptionScores fuse_scores(const OptionScores& sym, const OptionScores& neu, double lambda) {
  if (sym.options.size() != neu.options.size() || sym.item_id != neu.item_id) {
    throw Error(ErrorCode::arity_mismatch, "symbolic and neural scores disagree for item '" + sym.item_id + "'");
  }
  if (lambda < 0.0 || lambda > 1.0) throw Error(ErrorCode::invalid_params, "lambda must lie in [0,1]");
  std::vector<double> rs;
  std::vector<double> rn;
  for (const auto& o : sym.options) rs.push_back(o.raw_sym);
  for (const auto& o : neu.options) rn.push_back(o.raw_neu);
  const auto ns = minmax_normalize(rs);
  const auto nn = minmax_normalize(rn);
  OptionScores out;
  out.item_id = sym.item_id;
  out.lambda = lambda;
  out.options.resize(sym.options.size());
  for (std::size_t i = 0; i < out.options.size(); ++i) {
    auto& o = out.options[i];
    o.raw_sym = rs[i];
    o.raw_neu = rn[i];
    o.sym = ns[i];
    o.neu = nn[i];
    o.fused = lambda * ns[i] + (1.0 - lambda) * nn[i];
    o.terms = {{"symbolic", sym.options[i].terms}, {"neural", neu.options[i].terms}};
  }
  return out;
}

}  // namespace provmind
