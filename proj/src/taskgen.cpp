#include "provmind/taskgen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

#include "provmind/io.hpp"

namespace provmind {

using nlohmann::json;

namespace {

struct TaskNames {
  TaskKind kind;
  std::string_view name;
  std::string_view code;
};

constexpr std::array<TaskNames, 7> kTaskNames{{
    {TaskKind::A1_route_retrieval, "A1_route_retrieval", "A1"},
    {TaskKind::A2_missing_step, "A2_missing_step", "A2"},
    {TaskKind::A3_next_activity, "A3_next_activity", "A3"},
    {TaskKind::B1_condition_prediction, "B1_condition_prediction", "B1"},
    {TaskKind::B2_full_condition_set, "B2_full_condition_set", "B2"},
    {TaskKind::C1_tool_selection, "C1_tool_selection", "C1"},
    {TaskKind::D_process_ordering, "D_process_ordering", "D"},
}};

const char* const kTupleKeys[] = {"temperature", "duration", "atmosphere"};

}  // namespace

std::string_view to_string(TaskKind t) {
  for (const auto& n : kTaskNames) {
    if (n.kind == t) return n.name;
  }
  return "unknown";
}

std::string_view task_code(TaskKind t) {
  for (const auto& n : kTaskNames) {
    if (n.kind == t) return n.code;
  }
  return "?";
}

TaskKind task_from_string(std::string_view text) {
  for (const auto& n : kTaskNames) {
    if (text == n.name || text == n.code) return n.kind;
  }
  throw Error(ErrorCode::unknown_task, "unknown task '" + std::string(text) + "'");
}

json to_json(const BenchItem& item) {
  return json{{"item_id", item.item_id},
              {"task", to_string(item.task)},
              {"question", item.question},
              {"options", item.options},
              {"gold_index", item.gold_index},
              {"graph_id", item.graph_id},
              {"doi", item.doi},
              {"year", item.year},
              {"material_class", to_string(item.material_class)}};
}

BenchItem item_from_json(const json& j) {
  BenchItem item;
  item.item_id = j.at("item_id").get<std::string>();
  item.task = task_from_string(j.at("task").get<std::string>());
  item.question = j.value("question", json::object());
  item.options = j.value("options", std::vector<std::string>{});
  item.gold_index = j.value("gold_index", 0);
  item.graph_id = j.value("graph_id", "");
  item.doi = j.value("doi", "");
  item.year = j.value("year", 0);
  item.material_class = material_class_from_string(j.value("material_class", "other"));
  return item;
}

// Pools ------------------------------------------------------------------------

namespace {

void merge_counts(CountMap& into, const CountMap& from) {
  for (const auto& [k, v] : from) into[k] += v;
}

template <typename Inner>
void merge_nested(std::map<std::string, Inner>& into, const std::map<std::string, Inner>& from);

template <>
void merge_nested(std::map<std::string, CountMap>& into, const std::map<std::string, CountMap>& from) {
  for (const auto& [k, v] : from) merge_counts(into[k], v);
}

template <>
void merge_nested(std::map<std::string, std::map<std::string, CountMap>>& into,
                  const std::map<std::string, std::map<std::string, CountMap>>& from) {
  for (const auto& [k, v] : from) merge_nested(into[k], v);
}

std::vector<std::string> sorted_forms(const std::vector<const EntityNode*>& entities) {
  std::set<std::string> forms;
  for (const auto* e : entities) {
    if (e->kind != EntityKind::material) continue;
    auto it = e->attributes.find("form");
    if (it != e->attributes.end() && !it->second.empty()) forms.insert(it->second);
  }
  return {forms.begin(), forms.end()};
}

void add_graph(DistractorPools& p, const ProcessGraph& g) {
  const auto ordered = g.ordered_activities();
  std::vector<std::string> route;
  for (const auto* a : ordered) route.push_back(a->label);
  if (!route.empty()) ++p.routes[route];
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    ++p.successors[route[i]][route[i + 1]];
    ++p.predecessors[route[i + 1]][route[i]];
  }
  for (const auto& a : g.activities) {
    ++p.activity_labels[a.label];
    for (const auto& [key, value] : a.conditions) {
      ++p.condition_values[key][value];
      ++p.condition_values_by_activity[key][a.label][value];
    }
    if (auto t = condition_tuple(a)) ++p.condition_tuples[*t];
    const std::string ft = form_transition(g, a);
    if (!ft.empty()) ++p.activities_by_form_transition[ft][a.label];
  }
  for (const auto& t : g.tool_entities) ++p.tool_labels[t.label];
  for (const auto& m : g.material_entities) {
    auto it = m.attributes.find("form");
    if (it != m.attributes.end() && !it->second.empty()) ++p.material_forms[it->second];
  }
}

}  // namespace

void DistractorPools::merge(const DistractorPools& other) {
  for (const auto& [r, c] : other.routes) routes[r] += c;
  merge_counts(activity_labels, other.activity_labels);
  merge_counts(tool_labels, other.tool_labels);
  merge_counts(material_forms, other.material_forms);
  merge_nested(condition_values, other.condition_values);
  merge_counts(condition_tuples, other.condition_tuples);
  merge_nested(condition_values_by_activity, other.condition_values_by_activity);
  merge_nested(successors, other.successors);
  merge_nested(predecessors, other.predecessors);
  merge_nested(activities_by_form_transition, other.activities_by_form_transition);
}

std::optional<std::string> condition_tuple(const ActivityNode& a) {
  std::vector<std::string> parts;
  for (const char* key : kTupleKeys) {
    auto it = a.conditions.find(key);
    if (it == a.conditions.end() || it->second.empty()) return std::nullopt;
    parts.push_back(std::string(key) + "=" + it->second);
  }
  return join(parts, "; ");
}

std::string form_transition(const ProcessGraph& g, const ActivityNode& a) {
  const auto in = sorted_forms(g.entities_used_by(a.id));
  const auto out = sorted_forms(g.entities_generated_by(a.id));
  if (in.empty() && out.empty()) return {};
  return join(in, ",") + "->" + join(out, ",");
}

DistractorPools build_candidate_pools(std::span<const ProcessGraph> corpus, std::size_t jobs) {
  if (corpus.empty()) throw Error(ErrorCode::empty_corpus, "cannot build pools from an empty corpus");
  const std::size_t chunks = std::max<std::size_t>(1, std::min(jobs, corpus.size()));
  std::vector<DistractorPools> partial(chunks);
  parallel_for(chunks, jobs, [&](std::size_t c) {
    for (std::size_t i = c; i < corpus.size(); i += chunks) add_graph(partial[c], corpus[i]);
  });
  DistractorPools pools = std::move(partial[0]);
  for (std::size_t c = 1; c < chunks; ++c) pools.merge(partial[c]);
  return pools;
}

// Config -------------------------------------------------------------------------

TaskgenConfig TaskgenConfig::from_json(const json& j) {
  TaskgenConfig c;
  c.k_options = j.value("k_options", c.k_options);
  if (j.contains("caps")) {
    for (auto it = j["caps"].begin(); it != j["caps"].end(); ++it) {
      c.caps[task_from_string(it.key())] = it.value().get<std::size_t>();
    }
  }
  c.d_max_route_length = j.value("d_max_route_length", c.d_max_route_length);
  c.d_max_attempts = j.value("d_max_attempts", c.d_max_attempts);
  return c;
}

json TaskgenConfig::to_json() const {
  json caps_json = json::object();
  for (const auto& [t, cap] : caps) caps_json[std::string(task_code(t))] = cap;
  return json{{"k_options", k_options},
              {"caps", caps_json},
              {"d_max_route_length", d_max_route_length},
              {"d_max_attempts", d_max_attempts}};
}

json to_json(const SkipRecord& s) {
  return json{{"graph_id", s.graph_id}, {"task", to_string(s.task)}, {"ordinal", s.ordinal}, {"reason", s.reason}};
}

// Ordering helpers -------------------------------------------------------------------

std::vector<OrderingStep> ordering_steps_from_payload(const json& question) {
  std::vector<OrderingStep> steps;
  for (const auto& s : question.value("steps", json::array())) {
    OrderingStep step;
    step.label = s.value("label", "");
    for (const auto& in : s.value("inputs", json::array())) step.inputs.push_back(in.value("ref", ""));
    for (const auto& out : s.value("outputs", json::array())) step.outputs.push_back(out.value("ref", ""));
    steps.push_back(std::move(step));
  }
  return steps;
}

std::vector<std::pair<std::size_t, std::size_t>> ordering_constraints(const std::vector<OrderingStep>& steps) {
  std::set<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    for (const auto& out : steps[i].outputs) {
      for (std::size_t j = 0; j < steps.size(); ++j) {
        if (i == j) continue;
        if (std::find(steps[j].inputs.begin(), steps[j].inputs.end(), out) != steps[j].inputs.end()) {
          pairs.emplace(i, j);
        }
      }
    }
  }
  return {pairs.begin(), pairs.end()};
}

bool label_sequence_admissible(const std::vector<std::string>& step_labels,
                               const std::vector<std::pair<std::size_t, std::size_t>>& constraints,
                               const std::vector<std::string>& sequence) {
  const std::size_t n = step_labels.size();
  if (sequence.size() != n) return false;
  if (n == 0) return true;
  if (n > 24) throw Error(ErrorCode::invalid_params, "ordering check limited to 24 steps");
  std::vector<std::uint32_t> required(n, 0);
  for (const auto& [a, b] : constraints) required[b] |= (1u << a);
  // reachable[mask]: the first popcount(mask) positions can be filled by exactly these steps.
  std::vector<char> reachable(std::size_t{1} << n, 0);
  reachable[0] = 1;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (!reachable[mask]) continue;
    const auto pos = static_cast<std::size_t>(__builtin_popcount(mask));
    if (pos == n) return true;
    for (std::size_t s = 0; s < n; ++s) {
      if ((mask >> s) & 1u) continue;
      if (step_labels[s] != sequence[pos]) continue;
      if ((required[s] & mask) != required[s]) continue;
      reachable[mask | (1u << s)] = 1;
    }
  }
  return false;
}

std::vector<std::string> split_route(std::string_view option) {
  std::vector<std::string> out;
  if (option.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const auto pos = option.find(kRouteSeparator, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(option.substr(start));
      break;
    }
    out.emplace_back(option.substr(start, pos - start));
    start = pos + kRouteSeparator.size();
  }
  return out;
}

// Instantiation ------------------------------------------------------------------------

namespace {

using Candidates = std::vector<std::pair<std::string, double>>;

Candidates from_counts(const CountMap& counts) {
  Candidates c;
  for (const auto& [k, v] : counts) c.emplace_back(k, static_cast<double>(v));
  return c;
}

/// Weighted sampling without replacement, tier by tier.
std::vector<std::string> sample_tiers(const std::vector<Candidates>& tiers, std::size_t m,
                                      const std::set<std::string>& excluded, Rng& rng) {
  std::vector<std::string> chosen;
  std::set<std::string> taken = excluded;
  for (const auto& tier : tiers) {
    Candidates pool;
    for (const auto& c : tier) {
      if (!taken.count(c.first) && c.second > 0.0) pool.push_back(c);
    }
    while (chosen.size() < m && !pool.empty()) {
      std::vector<double> w;
      w.reserve(pool.size());
      for (const auto& c : pool) w.push_back(c.second);
      const std::size_t idx = rng.weighted(w);
      chosen.push_back(pool[idx].first);
      taken.insert(pool[idx].first);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(idx));
    }
    if (chosen.size() >= m) break;
  }
  return chosen;
}

std::vector<std::size_t> select_slots(std::size_t n_candidates, std::size_t cap, Rng rng) {
  std::vector<std::size_t> idx(n_candidates);
  for (std::size_t i = 0; i < n_candidates; ++i) idx[i] = i;
  if (n_candidates > cap) {
    rng.shuffle(idx);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
  }
  return idx;
}

json entity_list(const std::vector<const EntityNode*>& entities) {
  json out = json::array();
  for (const auto* e : entities) {
    if (e->kind != EntityKind::material) continue;
    json item{{"label", e->label}};
    auto it = e->attributes.find("form");
    if (it != e->attributes.end()) item["form"] = it->second;
    out.push_back(item);
  }
  return out;
}

std::vector<std::string> sorted_tool_labels(const ProcessGraph& g, const ActivityNode& a) {
  std::set<std::string> tools;
  for (const auto* e : g.entities_used_by(a.id)) {
    if (e->kind == EntityKind::tool) tools.insert(e->label);
  }
  return {tools.begin(), tools.end()};
}

std::vector<std::string> sorted_labels(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  return v;
}

struct Emitter {
  const ProcessGraph& g;
  const TaskgenConfig& config;
  std::uint64_t seed;
  InstantiateResult& out;

  Rng item_rng(TaskKind t, std::size_t ordinal) const {
    return Rng(derive_seed(seed, g.record_id, task_code(t), static_cast<std::uint64_t>(ordinal)));
  }

  Rng selection_rng(TaskKind t) const {
    return Rng(derive_seed(seed, g.record_id, task_code(t), std::string_view("select")));
  }

  std::size_t cap(TaskKind t) const {
    auto it = config.caps.find(t);
    return it == config.caps.end() ? 0 : it->second;
  }

  void skip(TaskKind t, std::size_t ordinal, std::string reason) {
    out.skips.push_back({g.record_id, t, ordinal, std::move(reason)});
  }

  /// Places gold among distractors; false (and a skip) when the quota is short.
  bool emit(TaskKind t, std::size_t ordinal, json question, const std::string& gold,
            std::vector<std::string> distractors, Rng& rng) {
    const auto k = static_cast<std::size_t>(config.k_options);
    if (distractors.size() + 1 < k) {
      skip(t, ordinal,
           std::string(to_string(ErrorCode::pool_exhausted)) + ": " + std::to_string(distractors.size()) +
               " distinct distractors for K=" + std::to_string(k));
      return false;
    }
    distractors.resize(k - 1);
    const std::size_t gold_pos = rng.index(k);
    distractors.insert(distractors.begin() + static_cast<std::ptrdiff_t>(gold_pos), gold);
    BenchItem item;
    item.item_id = g.record_id + ":" + std::string(task_code(t)) + ":" + std::to_string(ordinal);
    item.task = t;
    item.question = std::move(question);
    item.options = std::move(distractors);
    item.gold_index = static_cast<int>(gold_pos);
    item.graph_id = g.record_id;
    item.doi = g.doi;
    item.year = g.year;
    item.material_class = g.material_class;
    out.items.push_back(std::move(item));
    return true;
  }
};

}  // namespace

InstantiateResult instantiate_tasks(const ProcessGraph& g, const DistractorPools& pools, const TaskgenConfig& config,
                                    std::uint64_t seed) {
  if (!is_retainable(g)) {
    throw Error(ErrorCode::retention_filter_failed,
                "record '" + g.record_id + "' needs at least one activity and one precursor");
  }
  if (config.k_options < 2) throw Error(ErrorCode::invalid_params, "k_options must be >= 2");
  InstantiateResult result;
  Emitter em{g, config, seed, result};
  const std::size_t k = static_cast<std::size_t>(config.k_options);
  const auto ordered = g.ordered_activities();
  std::vector<std::string> route;
  for (const auto* a : ordered) route.push_back(a->label);
  const std::size_t n = route.size();
  const json precursors = sorted_labels(g.labels_with_role(Role::precursor));
  const json products = sorted_labels(g.labels_with_role(Role::product));
  const std::string gold_route = join(route, kRouteSeparator);

  // A1: full route from target product and precursors.
  if (em.cap(TaskKind::A1_route_retrieval) > 0) {
    Rng rng = em.item_rng(TaskKind::A1_route_retrieval, 0);
    Candidates tier;
    for (const auto& [r, count] : pools.routes) {
      (void)count;
      const double delta = std::abs(static_cast<double>(r.size()) - static_cast<double>(n));
      tier.emplace_back(join(r, kRouteSeparator), 1.0 / (1.0 + delta));
    }
    auto distractors = sample_tiers({tier}, k - 1, {gold_route}, rng);
    em.emit(TaskKind::A1_route_retrieval, 0, json{{"target_products", products}, {"precursors", precursors}},
            gold_route, std::move(distractors), rng);
  }

  // A2: masked step.
  if (n >= 2) {
    const auto slots = select_slots(n, em.cap(TaskKind::A2_missing_step), em.selection_rng(TaskKind::A2_missing_step));
    for (std::size_t ord = 0; ord < slots.size(); ++ord) {
      const std::size_t pos = slots[ord];
      Rng rng = em.item_rng(TaskKind::A2_missing_step, ord);
      CountMap neighbours;
      if (pos > 0) {
        auto it = pools.successors.find(route[pos - 1]);
        if (it != pools.successors.end()) merge_counts(neighbours, it->second);
      }
      if (pos + 1 < n) {
        auto it = pools.predecessors.find(route[pos + 1]);
        if (it != pools.predecessors.end()) merge_counts(neighbours, it->second);
      }
      std::vector<Candidates> tiers{from_counts(neighbours)};
      auto ft = pools.activities_by_form_transition.find(form_transition(g, *ordered[pos]));
      if (ft != pools.activities_by_form_transition.end()) tiers.push_back(from_counts(ft->second));
      tiers.push_back(from_counts(pools.activity_labels));
      auto distractors = sample_tiers(tiers, k - 1, {route[pos]}, rng);
      std::vector<std::string> masked = route;
      masked[pos] = std::string(kMaskToken);
      em.emit(TaskKind::A2_missing_step, ord,
              json{{"route", masked}, {"mask_index", pos}, {"precursors", precursors}, {"target_products", products}},
              route[pos], std::move(distractors), rng);
    }
  }

  // A3: next activity after a prefix.
  if (n >= 2) {
    const auto slots =
        select_slots(n - 1, em.cap(TaskKind::A3_next_activity), em.selection_rng(TaskKind::A3_next_activity));
    for (std::size_t ord = 0; ord < slots.size(); ++ord) {
      const std::size_t len = slots[ord] + 1;
      Rng rng = em.item_rng(TaskKind::A3_next_activity, ord);
      std::vector<Candidates> tiers;
      auto it = pools.successors.find(route[len - 1]);
      if (it != pools.successors.end()) tiers.push_back(from_counts(it->second));
      tiers.push_back(from_counts(pools.activity_labels));
      auto distractors = sample_tiers(tiers, k - 1, {route[len]}, rng);
      const std::vector<std::string> prefix(route.begin(), route.begin() + static_cast<std::ptrdiff_t>(len));
      em.emit(TaskKind::A3_next_activity, ord, json{{"prefix", prefix}, {"precursors", precursors}}, route[len],
              std::move(distractors), rng);
    }
  }

  auto step_payload = [&](std::size_t pos) {
    return json{{"route", route},
                {"step_index", pos},
                {"activity", route[pos]},
                {"step_inputs", entity_list(g.entities_used_by(ordered[pos]->id))},
                {"precursors", precursors}};
  };

  // B1: one condition value.
  {
    std::vector<std::pair<std::size_t, std::string>> slots_all;
    for (std::size_t pos = 0; pos < n; ++pos) {
      for (const auto& [key, value] : ordered[pos]->conditions) {
        if (!value.empty()) slots_all.emplace_back(pos, key);
      }
    }
    const auto slots = select_slots(slots_all.size(), em.cap(TaskKind::B1_condition_prediction),
                                    em.selection_rng(TaskKind::B1_condition_prediction));
    for (std::size_t ord = 0; ord < slots.size(); ++ord) {
      const auto& [pos, key] = slots_all[slots[ord]];
      const std::string& gold = ordered[pos]->conditions.at(key);
      Rng rng = em.item_rng(TaskKind::B1_condition_prediction, ord);
      Candidates tier;
      auto by_key = pools.condition_values_by_activity.find(key);
      if (by_key != pools.condition_values_by_activity.end()) {
        auto by_act = by_key->second.find(route[pos]);
        if (by_act != by_key->second.end()) {
          std::size_t others = by_act->second.size() - (by_act->second.count(gold) ? 1 : 0);
          if (others >= k - 1) tier = from_counts(by_act->second);
        }
      }
      if (tier.empty()) {
        auto global = pools.condition_values.find(key);
        if (global != pools.condition_values.end()) tier = from_counts(global->second);
      }
      auto distractors = sample_tiers({tier}, k - 1, {gold}, rng);
      json q = step_payload(pos);
      q["condition_key"] = key;
      em.emit(TaskKind::B1_condition_prediction, ord, std::move(q), gold, std::move(distractors), rng);
    }
  }

  // B2: complete temperature/duration/atmosphere tuple.
  {
    std::vector<std::size_t> slots_all;
    for (std::size_t pos = 0; pos < n; ++pos) {
      if (condition_tuple(*ordered[pos])) slots_all.push_back(pos);
    }
    const auto slots = select_slots(slots_all.size(), em.cap(TaskKind::B2_full_condition_set),
                                    em.selection_rng(TaskKind::B2_full_condition_set));
    for (std::size_t ord = 0; ord < slots.size(); ++ord) {
      const std::size_t pos = slots_all[slots[ord]];
      const std::string gold = *condition_tuple(*ordered[pos]);
      Rng rng = em.item_rng(TaskKind::B2_full_condition_set, ord);
      auto distractors = sample_tiers({from_counts(pools.condition_tuples)}, k - 1, {gold}, rng);
      em.emit(TaskKind::B2_full_condition_set, ord, step_payload(pos), gold, std::move(distractors), rng);
    }
  }

  // C1: tool of a step.
  {
    std::vector<std::size_t> slots_all;
    for (std::size_t pos = 0; pos < n; ++pos) {
      if (!sorted_tool_labels(g, *ordered[pos]).empty()) slots_all.push_back(pos);
    }
    const auto slots = select_slots(slots_all.size(), em.cap(TaskKind::C1_tool_selection),
                                    em.selection_rng(TaskKind::C1_tool_selection));
    for (std::size_t ord = 0; ord < slots.size(); ++ord) {
      const std::size_t pos = slots_all[slots[ord]];
      const auto tools = sorted_tool_labels(g, *ordered[pos]);
      Rng rng = em.item_rng(TaskKind::C1_tool_selection, ord);
      const std::set<std::string> exclude(tools.begin(), tools.end());
      auto distractors = sample_tiers({from_counts(pools.tool_labels)}, k - 1, exclude, rng);
      em.emit(TaskKind::C1_tool_selection, ord, step_payload(pos), tools.front(), std::move(distractors), rng);
    }
  }

  // D: causally valid ordering of shuffled steps.
  if (em.cap(TaskKind::D_process_ordering) > 0 && n >= 3 && n <= config.d_max_route_length) {
    Rng rng = em.item_rng(TaskKind::D_process_ordering, 0);
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::map<std::string, std::string> refs;
    auto ref_of = [&](const std::string& entity_id) {
      auto it = refs.find(entity_id);
      if (it != refs.end()) return it->second;
      std::string r = "m" + std::to_string(refs.size() + 1);
      refs.emplace(entity_id, r);
      return r;
    };
    json steps = json::array();
    std::vector<OrderingStep> visible;
    for (std::size_t i : perm) {
      const ActivityNode& a = *ordered[i];
      json step{{"label", a.label}, {"inputs", json::array()}, {"outputs", json::array()}};
      OrderingStep os{a.label, {}, {}};
      for (const auto* e : g.entities_used_by(a.id)) {
        if (e->kind != EntityKind::material) continue;
        const std::string r = ref_of(e->id);
        step["inputs"].push_back({{"ref", r}, {"label", e->label}});
        os.inputs.push_back(r);
      }
      for (const auto* e : g.entities_generated_by(a.id)) {
        if (e->kind != EntityKind::material) continue;
        const std::string r = ref_of(e->id);
        step["outputs"].push_back({{"ref", r}, {"label", e->label}});
        os.outputs.push_back(r);
      }
      steps.push_back(std::move(step));
      visible.push_back(std::move(os));
    }
    std::vector<std::string> labels;
    for (const auto& s : visible) labels.push_back(s.label);
    const auto constraints = ordering_constraints(visible);
    std::vector<std::string> distractors;
    std::set<std::string> seen{gold_route};
    std::vector<std::size_t> candidate(n);
    for (std::size_t attempt = 0; attempt < config.d_max_attempts && distractors.size() + 1 < k; ++attempt) {
      for (std::size_t i = 0; i < n; ++i) candidate[i] = i;
      rng.shuffle(candidate);
      std::vector<std::string> seq;
      for (std::size_t i : candidate) seq.push_back(labels[i]);
      std::string text = join(seq, kRouteSeparator);
      if (seen.count(text)) continue;
      seen.insert(text);
      if (label_sequence_admissible(labels, constraints, seq)) continue;
      distractors.push_back(std::move(text));
    }
    em.emit(TaskKind::D_process_ordering, 0, json{{"steps", steps}, {"precursors", precursors}}, gold_route,
            std::move(distractors), rng);
  }
  return result;
}

Benchmark generate_benchmark(std::span<const ProcessGraph> corpus, const TaskgenConfig& config, std::uint64_t seed,
                             std::size_t jobs) {
  Benchmark bench;
  std::vector<ProcessGraph> retained;
  for (const auto& g : corpus) {
    if (is_retainable(g)) {
      retained.push_back(g);
    } else {
      bench.filtered_graphs.push_back(g.record_id);
    }
  }
  if (retained.empty()) throw Error(ErrorCode::empty_corpus, "no graph passes the retention filter");
  const DistractorPools pools = build_candidate_pools(retained, jobs);
  std::vector<InstantiateResult> slots(retained.size());
  parallel_for(retained.size(), jobs,
               [&](std::size_t i) { slots[i] = instantiate_tasks(retained[i], pools, config, seed); });
  for (auto& s : slots) {
    std::move(s.items.begin(), s.items.end(), std::back_inserter(bench.items));
    std::move(s.skips.begin(), s.skips.end(), std::back_inserter(bench.skips));
  }
  return bench;
}

// Validation --------------------------------------------------------------------------

namespace {

ValidityReport invalid(ErrorCode code, std::string detail) { return {false, code, std::move(detail)}; }

std::optional<std::string> recompute_gold(const BenchItem& item, const ProcessGraph& g, std::string& detail) {
  const auto ordered = g.ordered_activities();
  std::vector<std::string> route;
  for (const auto* a : ordered) route.push_back(a->label);
  const json& q = item.question;
  auto step_at = [&](const char* key) -> const ActivityNode* {
    const std::size_t pos = q.value(key, std::size_t{0});
    if (pos >= ordered.size()) {
      detail = "step index out of range";
      return nullptr;
    }
    return ordered[pos];
  };
  switch (item.task) {
    case TaskKind::A1_route_retrieval:
    case TaskKind::D_process_ordering:
      return join(route, kRouteSeparator);
    case TaskKind::A2_missing_step: {
      const std::size_t pos = q.value("mask_index", route.size());
      if (pos >= route.size()) return std::nullopt;
      return route[pos];
    }
    case TaskKind::A3_next_activity: {
      const auto prefix = q.value("prefix", std::vector<std::string>{});
      if (prefix.empty() || prefix.size() >= route.size() ||
          !std::equal(prefix.begin(), prefix.end(), route.begin())) {
        detail = "prefix does not match the source route";
        return std::nullopt;
      }
      return route[prefix.size()];
    }
    case TaskKind::B1_condition_prediction: {
      const auto* a = step_at("step_index");
      if (!a) return std::nullopt;
      auto it = a->conditions.find(q.value("condition_key", ""));
      if (it == a->conditions.end()) return std::nullopt;
      return it->second;
    }
    case TaskKind::B2_full_condition_set: {
      const auto* a = step_at("step_index");
      if (!a) return std::nullopt;
      return condition_tuple(*a);
    }
    case TaskKind::C1_tool_selection: {
      const auto* a = step_at("step_index");
      if (!a) return std::nullopt;
      const auto tools = sorted_tool_labels(g, *a);
      if (tools.empty()) return std::nullopt;
      return tools.front();
    }
  }
  return std::nullopt;
}

}  // namespace

ValidityReport validate_item(const BenchItem& item, const ProcessGraph& g) {
  if (item.gold_index < 0 || static_cast<std::size_t>(item.gold_index) >= item.options.size()) {
    return invalid(ErrorCode::gold_mismatch, "gold_index out of range");
  }
  const std::set<std::string> distinct(item.options.begin(), item.options.end());
  if (distinct.size() != item.options.size()) return invalid(ErrorCode::gold_mismatch, "options are not distinct");
  std::string detail;
  const auto gold = recompute_gold(item, g, detail);
  if (!gold) return invalid(ErrorCode::gold_mismatch, detail.empty() ? "gold not recoverable from graph" : detail);
  if (item.options[static_cast<std::size_t>(item.gold_index)] != *gold) {
    return invalid(ErrorCode::gold_mismatch, "expected '" + *gold + "', found '" +
                                                 item.options[static_cast<std::size_t>(item.gold_index)] + "'");
  }
  if (item.task == TaskKind::D_process_ordering) {
    const auto ordered = g.ordered_activities();
    std::vector<std::string> labels;
    std::map<std::string, std::size_t> index;
    for (const auto* a : ordered) {
      index[a->id] = labels.size();
      labels.push_back(a->label);
    }
    std::vector<std::pair<std::size_t, std::size_t>> constraints;
    for (const auto& [from, to] : infer_precedence(g)) constraints.emplace_back(index.at(from), index.at(to));
    for (std::size_t i = 0; i < item.options.size(); ++i) {
      if (static_cast<int>(i) == item.gold_index) continue;
      if (label_sequence_admissible(labels, constraints, split_route(item.options[i]))) {
        return invalid(ErrorCode::distractor_violation_missing,
                       "option " + std::to_string(i) + " is a valid ordering: " + item.options[i]);
      }
    }
  }
  return {};
}

// Files ---------------------------------------------------------------------------------

void write_benchmark(const std::string& path, std::span<const BenchItem> items, const json& header_extra) {
  json extra = header_extra;
  extra["count"] = items.size();
  std::vector<json> records;
  records.reserve(items.size());
  for (const auto& item : items) records.push_back(to_json(item));
  write_jsonl(path, artifact_header(kBenchFormat, kBenchVersion, extra), records);
}

std::vector<BenchItem> read_benchmark(const std::string& path) {
  const auto file = read_jsonl(path, kBenchFormat);
  std::vector<BenchItem> items;
  items.reserve(file.records.size());
  for (const auto& r : file.records) items.push_back(item_from_json(r));
  return items;
}

namespace {

std::optional<std::string> first_string(const json& j, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) continue;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number()) return it->dump();
  }
  if (auto meta = j.find("metadata"); meta != j.end() && meta->is_object()) return first_string(*meta, keys);
  return std::nullopt;
}

TaskKind lenient_task(const std::string& text) {
  for (const auto& n : kTaskNames) {
    if (text == n.name || text == n.code) return n.kind;
  }
  for (const auto& n : kTaskNames) {
    if (text.rfind(n.code, 0) == 0 && (text.size() == n.code.size() || !std::isdigit(
                                                                             static_cast<unsigned char>(text[n.code.size()])))) {
      return n.kind;
    }
  }
  throw Error(ErrorCode::unknown_task, "unknown task '" + text + "'");
}

void import_record(const json& j, std::vector<BenchItem>& out) {
  if (!j.is_object() || j.contains("format")) return;
  BenchItem item;
  auto id = first_string(j, {"item_id", "id", "uid", "qid"});
  item.item_id = id ? *id : "item-" + std::to_string(out.size());
  if (auto t = first_string(j, {"task", "task_type", "task_id"})) item.task = lenient_task(*t);
  if (auto d = first_string(j, {"doi", "source_doi", "paper_doi"})) item.doi = *d;
  if (auto y = first_string(j, {"year", "publication_year", "pub_year"})) {
    try {
      item.year = std::stoi(*y);
    } catch (const std::exception&) {
      item.year = 0;
    }
  }
  if (auto c = first_string(j, {"material_class", "material_type", "category", "class"})) {
    item.material_class = material_class_from_string(*c);
  }
  if (auto gid = first_string(j, {"graph_id", "record_id", "source_id"})) item.graph_id = *gid;
  if (auto it = j.find("options"); it != j.end() && it->is_array()) {
    for (const auto& o : *it) item.options.push_back(o.is_string() ? o.get<std::string>() : o.dump());
  }
  if (auto it = j.find("gold_index"); it != j.end() && it->is_number_integer()) item.gold_index = it->get<int>();
  if (auto it = j.find("question"); it != j.end()) item.question = *it;
  out.push_back(std::move(item));
}

void import_file(const std::string& path, std::vector<BenchItem>& out) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return;
  if (text[first] == '[') {
    for (const auto& j : json::parse(text)) import_record(j, out);
    return;
  }
  std::istringstream lines(text);
  std::string line;
  while (std::getline(lines, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    import_record(json::parse(line), out);
  }
}

}  // namespace

std::vector<BenchItem> import_items(const std::string& path) {
  std::vector<BenchItem> items;
  namespace fs = std::filesystem;
  if (fs::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      const auto ext = entry.path().extension().string();
      if (entry.is_regular_file() && (ext == ".json" || ext == ".jsonl" || ext == ".ndjson")) {
        files.push_back(entry.path().string());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) import_file(f, items);
  } else {
    import_file(path, items);
  }
  return items;
}

}  // namespace provmind
