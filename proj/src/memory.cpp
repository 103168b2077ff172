#include "provmind/memory.hpp"

#include <algorithm>
#include <cmath>

#include "provmind/io.hpp"

namespace provmind {

using nlohmann::json;

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

std::set<std::string> neighbour_set(const std::optional<std::string>& prev, const std::optional<std::string>& next) {
  std::set<std::string> s;
  if (prev) s.insert(*prev);
  if (next) s.insert(*next);
  return s;
}

}  // namespace

ProcessSummary summarize(const ProcessGraph& g) {
  ProcessSummary s;
  s.graph_id = g.record_id;
  s.doi = g.doi;
  s.year = g.year;
  s.material_class = g.material_class;
  for (const auto* a : g.ordered_activities()) {
    s.route.push_back(a->label);
    s.step_conditions.push_back(a->conditions);
  }
  s.precursors = sorted_unique(g.labels_with_role(Role::precursor));
  s.products = sorted_unique(g.labels_with_role(Role::product));
  std::vector<std::string> tools;
  for (const auto& t : g.tool_entities) tools.push_back(t.label);
  s.tools = sorted_unique(tools);
  s.route_length = s.route.size();
  return s;
}

std::string linearize(const ProcessSummary& s) {
  std::vector<std::string> steps;
  for (std::size_t i = 0; i < s.route.size(); ++i) {
    std::string step = s.route[i];
    if (i < s.step_conditions.size() && !s.step_conditions[i].empty()) {
      std::vector<std::string> kv;
      for (const auto& [k, v] : s.step_conditions[i]) kv.push_back(k + "=" + v);
      step += "(" + join(kv, "; ") + ")";
    }
    steps.push_back(std::move(step));
  }
  return "precursors: " + join(s.precursors, ", ") + " | route: " + join(steps, " -> ") +
         " | products: " + join(s.products, ", ") + " | tools: " + join(s.tools, ", ");
}

StepQuery StepQuery::from_entry(const StepEntry& e) {
  StepQuery q;
  q.label = e.label;
  q.previous = e.previous;
  q.next = e.next;
  q.normalized_position = e.normalized_position;
  q.input_forms = e.input_forms;
  return q;
}

MemoryConfig MemoryConfig::from_json(const json& j) {
  MemoryConfig c;
  c.max_prefix_length = j.value("max_prefix_length", c.max_prefix_length);
  c.structure_seed = j.value("structure_seed", c.structure_seed);
  if (j.contains("step_weights")) {
    const auto& w = j["step_weights"];
    c.step_weights.label = w.value("label", c.step_weights.label);
    c.step_weights.neighbours = w.value("neighbours", c.step_weights.neighbours);
    c.step_weights.position = w.value("position", c.step_weights.position);
    c.step_weights.forms = w.value("forms", c.step_weights.forms);
  }
  return c;
}

json MemoryConfig::to_json() const {
  return json{{"max_prefix_length", max_prefix_length},
              {"structure_seed", structure_seed},
              {"step_weights",
               {{"label", step_weights.label},
                {"neighbours", step_weights.neighbours},
                {"position", step_weights.position},
                {"forms", step_weights.forms}}}};
}

const ProcessSummary* ProcessMemory::find(const std::string& graph_id) const {
  auto it = std::lower_bound(processes.begin(), processes.end(), graph_id,
                             [](const ProcessSummary& p, const std::string& id) { return p.graph_id < id; });
  return it != processes.end() && it->graph_id == graph_id ? &*it : nullptr;
}

std::set<std::string> ProcessMemory::vocabulary() const {
  std::set<std::string> v;
  for (const auto& p : processes) v.insert(p.route.begin(), p.route.end());
  return v;
}

std::set<std::string> ProcessMemory::graph_ids() const {
  std::set<std::string> ids;
  for (const auto& p : processes) ids.insert(p.graph_id);
  return ids;
}

namespace {

std::vector<StepEntry> steps_of(const ProcessGraph& g) {
  std::vector<StepEntry> out;
  const auto ordered = g.ordered_activities();
  const std::size_t n = ordered.size();
  for (std::size_t i = 0; i < n; ++i) {
    const ActivityNode& a = *ordered[i];
    StepEntry e;
    e.graph_id = g.record_id;
    e.label = a.label;
    e.position = i;
    e.normalized_position = n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
    if (i > 0) e.previous = ordered[i - 1]->label;
    if (i + 1 < n) e.next = ordered[i + 1]->label;
    e.conditions = a.conditions;
    for (const auto* ent : g.entities_used_by(a.id)) {
      if (ent->kind == EntityKind::tool) {
        e.tools.push_back(ent->label);
        continue;
      }
      e.input_labels.push_back(ent->label);
      if (auto f = ent->attributes.find("form"); f != ent->attributes.end()) e.input_forms.push_back(f->second);
    }
    for (const auto* ent : g.entities_generated_by(a.id)) {
      if (ent->kind != EntityKind::material) continue;
      e.output_labels.push_back(ent->label);
      if (auto f = ent->attributes.find("form"); f != ent->attributes.end()) e.output_forms.push_back(f->second);
    }
    e.tools = sorted_unique(e.tools);
    e.input_labels = sorted_unique(e.input_labels);
    e.input_forms = sorted_unique(e.input_forms);
    e.output_labels = sorted_unique(e.output_labels);
    e.output_forms = sorted_unique(e.output_forms);
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

ProcessMemory build_memory(std::span<const ProcessGraph> train_graphs, const MemoryConfig& config,
                           const TextEmbedder& text_embedder, const FrozenGraphAttention& structure, std::size_t jobs,
                           const std::set<std::string>* allowed_ids) {
  if (train_graphs.empty()) throw Error(ErrorCode::empty_train_set, "no training graphs");
  if (config.max_prefix_length < 1) throw Error(ErrorCode::invalid_params, "max_prefix_length must be >= 1");
  std::vector<const ProcessGraph*> graphs;
  for (const auto& g : train_graphs) {
    if (allowed_ids && !allowed_ids->count(g.record_id)) {
      throw Error(ErrorCode::invalid_params, "graph '" + g.record_id + "' is not in the training partition");
    }
    graphs.push_back(&g);
  }
  std::sort(graphs.begin(), graphs.end(),
            [](const ProcessGraph* a, const ProcessGraph* b) { return a->record_id < b->record_id; });
  for (std::size_t i = 1; i < graphs.size(); ++i) {
    if (graphs[i]->record_id == graphs[i - 1]->record_id) {
      throw Error(ErrorCode::invalid_params, "duplicate training graph '" + graphs[i]->record_id + "'");
    }
  }

  ProcessMemory m;
  m.config = config;
  m.text_embedder = text_embedder.name();
  m.corpus_hash = [&] {
    std::vector<ProcessGraph> copy;
    for (const auto* g : graphs) copy.push_back(*g);
    return provmind::corpus_hash(copy);
  }();

  struct Slot {
    ProcessSummary summary;
    std::vector<StepEntry> steps;
    EmbeddingRecord embedding;
  };
  std::vector<Slot> slots(graphs.size());
  for (std::size_t i = 0; i < graphs.size(); ++i) slots[i].summary = summarize(*graphs[i]);
  // Endpoint embedders may batch, so text embedding runs in one call.
  std::vector<std::string> texts;
  for (const auto& s : slots) texts.push_back(linearize(s.summary));
  const auto text_vectors = text_embedder.embed(texts);
  parallel_for(graphs.size(), jobs, [&](std::size_t i) {
    slots[i].steps = steps_of(*graphs[i]);
    slots[i].embedding.text = text_vectors[i];
    slots[i].embedding.structure = structure.embed(*graphs[i]);
  });

  for (auto& s : slots) {
    const auto& route = s.summary.route;
    for (std::size_t i = 0; i + 1 < route.size(); ++i) {
      ++m.transition_table[{route[i], route[i + 1]}];
      const std::size_t longest = std::min(config.max_prefix_length, i + 1);
      for (std::size_t len = 1; len <= longest; ++len) {
        std::vector<std::string> key(route.begin() + static_cast<std::ptrdiff_t>(i + 1 - len),
                                     route.begin() + static_cast<std::ptrdiff_t>(i + 1));
        ++m.prefix_index[key][route[i + 1]];
      }
    }
    std::move(s.steps.begin(), s.steps.end(), std::back_inserter(m.step_library));
    m.embedding_store[s.summary.graph_id] = std::move(s.embedding);
    m.processes.push_back(std::move(s.summary));
  }
  return m;
}

std::string_view to_string(Backoff b) {
  switch (b) {
    case Backoff::exact: return "exact";
    case Backoff::suffix: return "suffix";
    case Backoff::unigram: return "unigram";
    case Backoff::uniform: return "uniform";
  }
  return "uniform";
}

namespace {

std::map<std::string, double> normalize(const CountMap& counts) {
  double total = 0.0;
  for (const auto& [k, v] : counts) total += static_cast<double>(v);
  std::map<std::string, double> out;
  for (const auto& [k, v] : counts) out[k] = static_cast<double>(v) / total;
  return out;
}

}  // namespace

NextDistribution next_distribution(const ProcessMemory& memory, const std::vector<std::string>& prefix) {
  NextDistribution d;
  const std::size_t longest = std::min(prefix.size(), memory.config.max_prefix_length);
  for (std::size_t len = longest; len >= 1; --len) {
    std::vector<std::string> key(prefix.end() - static_cast<std::ptrdiff_t>(len), prefix.end());
    auto it = memory.prefix_index.find(key);
    if (it != memory.prefix_index.end() && !it->second.empty()) {
      d.probabilities = normalize(it->second);
      d.backoff = len == prefix.size() ? Backoff::exact : Backoff::suffix;
      d.matched_length = len;
      return d;
    }
  }
  CountMap unigram;
  for (const auto& [pair, count] : memory.transition_table) unigram[pair.second] += count;
  if (!unigram.empty()) {
    d.probabilities = normalize(unigram);
    d.backoff = Backoff::unigram;
    return d;
  }
  const auto vocab = memory.vocabulary();
  d.backoff = Backoff::uniform;
  for (const auto& label : vocab) d.probabilities[label] = 1.0 / static_cast<double>(vocab.size());
  return d;
}

double step_compatibility(const StepQuery& q, const StepEntry& e, const StepWeights& w) {
  double score = 0.0;
  if (q.label && *q.label == e.label) score += w.label;
  const auto qn = neighbour_set(q.previous, q.next);
  if (!qn.empty()) score += w.neighbours * jaccard(qn, neighbour_set(e.previous, e.next));
  if (q.normalized_position) score += w.position * (1.0 - std::abs(*q.normalized_position - e.normalized_position));
  if (!q.input_forms.empty()) score += w.forms * jaccard(as_set(q.input_forms), as_set(e.input_forms));
  return score;
}

std::vector<ScoredStep> match_steps(const ProcessMemory& memory, const StepQuery& query, std::size_t top_m,
                                    const StepWeights& weights, const std::function<bool(const StepEntry&)>& filter) {
  if (memory.step_library.empty()) throw Error(ErrorCode::empty_library, "step library is empty");
  if (!query.label && !query.previous && !query.next) {
    throw Error(ErrorCode::invalid_params, "step query needs an activity label or a neighbour");
  }
  std::vector<ScoredStep> scored;
  scored.reserve(memory.step_library.size());
  for (const auto& e : memory.step_library) {
    if (!filter || filter(e)) scored.push_back({&e, step_compatibility(query, e, weights)});
  }
  auto better = [](const ScoredStep& a, const ScoredStep& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.entry->graph_id != b.entry->graph_id) return a.entry->graph_id < b.entry->graph_id;
    return a.entry->position < b.entry->position;
  };
  const std::size_t m = std::min(top_m, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(m), scored.end(), better);
  scored.resize(m);
  return scored;
}

// Serialization -----------------------------------------------------------------------

namespace {

json optional_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<std::string>();
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector vector_from(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

json to_json(const ProcessMemory& m) {
  json processes = json::array();
  for (const auto& p : m.processes) {
    processes.push_back({{"graph_id", p.graph_id},
                         {"doi", p.doi},
                         {"year", p.year},
                         {"material_class", to_string(p.material_class)},
                         {"route", p.route},
                         {"step_conditions", p.step_conditions},
                         {"precursors", p.precursors},
                         {"products", p.products},
                         {"tools", p.tools},
                         {"route_length", p.route_length}});
  }
  json transitions = json::array();
  for (const auto& [pair, count] : m.transition_table) transitions.push_back({pair.first, pair.second, count});
  json prefixes = json::array();
  for (const auto& [key, next] : m.prefix_index) prefixes.push_back({{"prefix", key}, {"next", next}});
  json steps = json::array();
  for (const auto& e : m.step_library) {
    steps.push_back({{"graph_id", e.graph_id},
                     {"label", e.label},
                     {"position", e.position},
                     {"normalized_position", e.normalized_position},
                     {"previous", optional_json(e.previous)},
                     {"next", optional_json(e.next)},
                     {"tools", e.tools},
                     {"conditions", e.conditions},
                     {"input_labels", e.input_labels},
                     {"input_forms", e.input_forms},
                     {"output_labels", e.output_labels},
                     {"output_forms", e.output_forms}});
  }
  json embeddings = json::object();
  for (const auto& [id, rec] : m.embedding_store) {
    embeddings[id] = {{"text", vector_json(rec.text)}, {"structure", vector_json(rec.structure)}};
  }
  return json{{"split", m.split_id},
              {"corpus_hash", m.corpus_hash},
              {"config", m.config.to_json()},
              {"text_embedder", m.text_embedder},
              {"processes", processes},
              {"transitions", transitions},
              {"prefix_index", prefixes},
              {"step_library", steps},
              {"embeddings", embeddings}};
}

ProcessMemory memory_from_json(const json& j) {
  ProcessMemory m;
  m.split_id = j.value("split", "");
  m.corpus_hash = j.value("corpus_hash", "");
  m.config = MemoryConfig::from_json(j.value("config", json::object()));
  m.text_embedder = j.value("text_embedder", "");
  for (const auto& p : j.at("processes")) {
    ProcessSummary s;
    s.graph_id = p.at("graph_id").get<std::string>();
    s.doi = p.value("doi", "");
    s.year = p.value("year", 0);
    s.material_class = material_class_from_string(p.value("material_class", "other"));
    s.route = p.at("route").get<std::vector<std::string>>();
    s.step_conditions = p.value("step_conditions", std::vector<AttributeMap>{});
    s.precursors = p.value("precursors", std::vector<std::string>{});
    s.products = p.value("products", std::vector<std::string>{});
    s.tools = p.value("tools", std::vector<std::string>{});
    s.route_length = p.value("route_length", s.route.size());
    m.processes.push_back(std::move(s));
  }
  for (const auto& t : j.at("transitions")) {
    m.transition_table[{t.at(0).get<std::string>(), t.at(1).get<std::string>()}] = t.at(2).get<std::size_t>();
  }
  for (const auto& p : j.at("prefix_index")) {
    m.prefix_index[p.at("prefix").get<std::vector<std::string>>()] = p.at("next").get<CountMap>();
  }
  for (const auto& s : j.at("step_library")) {
    StepEntry e;
    e.graph_id = s.at("graph_id").get<std::string>();
    e.label = s.at("label").get<std::string>();
    e.position = s.at("position").get<std::size_t>();
    e.normalized_position = s.at("normalized_position").get<double>();
    e.previous = optional_from(s.at("previous"));
    e.next = optional_from(s.at("next"));
    e.tools = s.value("tools", std::vector<std::string>{});
    e.conditions = s.value("conditions", AttributeMap{});
    e.input_labels = s.value("input_labels", std::vector<std::string>{});
    e.input_forms = s.value("input_forms", std::vector<std::string>{});
    e.output_labels = s.value("output_labels", std::vector<std::string>{});
    e.output_forms = s.value("output_forms", std::vector<std::string>{});
    m.step_library.push_back(std::move(e));
  }
  for (auto it = j.at("embeddings").begin(); it != j.at("embeddings").end(); ++it) {
    m.embedding_store[it.key()] = {vector_from(it.value().at("text")), vector_from(it.value().at("structure"))};
  }
  return m;
}

void save_memory(const std::string& path, const ProcessMemory& memory, const json& header_extra) {
  json doc = artifact_header(kMemoryFormat, kMemoryVersion, header_extra);
  doc.update(to_json(memory));
  write_file(path, doc.dump() + "\n");
}

ProcessMemory load_memory(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::io_error, path + ": " + e.what());
  }
  if (doc.value("format", "") != kMemoryFormat) throw Error(ErrorCode::io_error, path + ": not a memory file");
  return memory_from_json(doc);
}

}  // namespace provmind
