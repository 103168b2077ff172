#include "provmind/provgraph.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <queue>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "provmind/io.hpp"

namespace provmind {

using nlohmann::json;

std::string_view to_string(MaterialClass c) {
  switch (c) {
    case MaterialClass::battery: return "battery";
    case MaterialClass::thermoelectric: return "thermoelectric";
    case MaterialClass::magnetic: return "magnetic";
    case MaterialClass::other: return "other";
  }
  return "other";
}

std::string_view to_string(EntityKind k) { return k == EntityKind::tool ? "tool" : "material"; }

std::string_view to_string(Role r) {
  switch (r) {
    case Role::unassigned: return "unassigned";
    case Role::precursor: return "precursor";
    case Role::intermediate: return "intermediate";
    case Role::product: return "product";
    case Role::tool: return "tool";
    case Role::unconnected: return "unconnected";
  }
  return "unassigned";
}

std::string_view to_string(WarningKind k) {
  switch (k) {
    case WarningKind::tool_generated: return "tool_generated";
    case WarningKind::dangling_relation: return "dangling_relation";
    case WarningKind::duplicate_node: return "duplicate_node";
    case WarningKind::unparseable_node: return "unparseable_node";
    case WarningKind::excluded_record: return "excluded_record";
  }
  return "unknown";
}

MaterialClass material_class_from_string(std::string_view text) {
  const std::string s = canonical_label(text);
  if (s.find("batter") != std::string::npos) return MaterialClass::battery;
  if (s.find("thermoelectric") != std::string::npos) return MaterialClass::thermoelectric;
  if (s.find("magnet") != std::string::npos) return MaterialClass::magnetic;
  return MaterialClass::other;
}

EntityKind entity_kind_from_string(std::string_view text) {
  return text == "tool" ? EntityKind::tool : EntityKind::material;
}

Role role_from_string(std::string_view text) {
  for (Role r : {Role::precursor, Role::intermediate, Role::product, Role::tool, Role::unconnected}) {
    if (to_string(r) == text) return r;
  }
  return Role::unassigned;
}

// ProcessGraph accessors ----------------------------------------------------------

const ActivityNode* ProcessGraph::find_activity(std::string_view id) const {
  for (const auto& a : activities) {
    if (a.id == id) return &a;
  }
  return nullptr;
}

const EntityNode* ProcessGraph::find_entity(std::string_view id) const {
  for (const auto& e : material_entities) {
    if (e.id == id) return &e;
  }
  for (const auto& e : tool_entities) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::vector<const ActivityNode*> ProcessGraph::ordered_activities() const {
  std::vector<const ActivityNode*> out;
  out.reserve(ordered_activity_ids.size());
  for (const auto& id : ordered_activity_ids) {
    if (const auto* a = find_activity(id)) out.push_back(a);
  }
  return out;
}

std::vector<std::string> ProcessGraph::ordered_activity_labels() const {
  std::vector<std::string> out;
  for (const auto* a : ordered_activities()) out.push_back(a->label);
  return out;
}

std::vector<const EntityNode*> ProcessGraph::entities_used_by(std::string_view activity_id) const {
  std::vector<const EntityNode*> out;
  for (const auto& u : usage_edges) {
    if (u.activity == activity_id) {
      if (const auto* e = find_entity(u.entity)) out.push_back(e);
    }
  }
  return out;
}

std::vector<const EntityNode*> ProcessGraph::entities_generated_by(std::string_view activity_id) const {
  std::vector<const EntityNode*> out;
  for (const auto& g : generation_edges) {
    if (g.activity == activity_id) {
      if (const auto* e = find_entity(g.entity)) out.push_back(e);
    }
  }
  return out;
}

std::vector<std::string> ProcessGraph::labels_with_role(Role role) const {
  std::vector<std::string> out;
  const auto& pool = role == Role::tool ? tool_entities : material_entities;
  for (const auto& e : pool) {
    if (e.role == role) out.push_back(e.label);
  }
  return out;
}

// FieldMap ------------------------------------------------------------------------

namespace {

template <typename T>
void read_list(const json& j, const char* key, std::vector<T>& target) {
  if (j.contains(key)) target = j.at(key).get<std::vector<T>>();
}

}  // namespace

FieldMap FieldMap::from_json(const json& j) {
  FieldMap fm;
  if (!j.is_object()) throw Error(ErrorCode::invalid_params, "field map must be a JSON object");
  read_list(j, "graph_keys", fm.graph_keys);
  read_list(j, "record_id_keys", fm.record_id_keys);
  read_list(j, "id_keys", fm.id_keys);
  read_list(j, "type_keys", fm.type_keys);
  read_list(j, "entity_types", fm.entity_types);
  read_list(j, "activity_types", fm.activity_types);
  read_list(j, "usage_types", fm.usage_types);
  read_list(j, "generation_types", fm.generation_types);
  read_list(j, "relation_activity_keys", fm.relation_activity_keys);
  read_list(j, "relation_entity_keys", fm.relation_entity_keys);
  read_list(j, "inline_used_keys", fm.inline_used_keys);
  read_list(j, "inline_generated_by_keys", fm.inline_generated_by_keys);
  read_list(j, "inline_generated_keys", fm.inline_generated_keys);
  read_list(j, "label_keys", fm.label_keys);
  read_list(j, "condition_container_keys", fm.condition_container_keys);
  read_list(j, "condition_vocabulary", fm.condition_vocabulary);
  read_list(j, "condition_aliases", fm.condition_aliases);
  read_list(j, "attribute_container_keys", fm.attribute_container_keys);
  read_list(j, "attribute_vocabulary", fm.attribute_vocabulary);
  read_list(j, "tool_type_values", fm.tool_type_values);
  read_list(j, "tool_marker_keys", fm.tool_marker_keys);
  read_list(j, "tool_marker_values", fm.tool_marker_values);
  read_list(j, "doi_keys", fm.doi_keys);
  read_list(j, "year_keys", fm.year_keys);
  read_list(j, "class_keys", fm.class_keys);
  return fm;
}

json FieldMap::to_json() const {
  return json{{"graph_keys", graph_keys},
              {"record_id_keys", record_id_keys},
              {"id_keys", id_keys},
              {"type_keys", type_keys},
              {"entity_types", entity_types},
              {"activity_types", activity_types},
              {"usage_types", usage_types},
              {"generation_types", generation_types},
              {"relation_activity_keys", relation_activity_keys},
              {"relation_entity_keys", relation_entity_keys},
              {"inline_used_keys", inline_used_keys},
              {"inline_generated_by_keys", inline_generated_by_keys},
              {"inline_generated_keys", inline_generated_keys},
              {"label_keys", label_keys},
              {"condition_container_keys", condition_container_keys},
              {"condition_vocabulary", condition_vocabulary},
              {"condition_aliases", condition_aliases},
              {"attribute_container_keys", attribute_container_keys},
              {"attribute_vocabulary", attribute_vocabulary},
              {"tool_type_values", tool_type_values},
              {"tool_marker_keys", tool_marker_keys},
              {"tool_marker_values", tool_marker_values},
              {"doi_keys", doi_keys},
              {"year_keys", year_keys},
              {"class_keys", class_keys}};
}

// Parsing ------------------------------------------------------------------------

namespace {

const json* lookup_path(const json& obj, std::string_view dotted) {
  if (!obj.is_object()) return nullptr;
  auto it = obj.find(std::string(dotted));
  if (it != obj.end()) return &*it;
  const auto dot = dotted.find('.');
  if (dot == std::string_view::npos) return nullptr;
  auto head = obj.find(std::string(dotted.substr(0, dot)));
  if (head == obj.end()) return nullptr;
  return lookup_path(*head, dotted.substr(dot + 1));
}

const json* lookup_any(const json& obj, const std::vector<std::string>& keys) {
  for (const auto& k : keys) {
    if (const json* v = lookup_path(obj, k)) return v;
  }
  return nullptr;
}

/// Literal text of a JSON-LD value: plain scalars, {"@value": x} and
/// {"value": v, "unit": u} objects; arrays join with ", ".
std::optional<std::string> literal_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_float()) {
    std::ostringstream os;
    os << v.get<double>();
    return os.str();
  }
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_object()) {
    if (v.contains("@value")) {
      auto inner = literal_text(v["@value"]);
      if (inner && v.contains("unit")) {
        if (auto unit = literal_text(v["unit"])) return *inner + " " + *unit;
      }
      return inner;
    }
    if (v.contains("value")) {
      auto inner = literal_text(v["value"]);
      if (!inner) return std::nullopt;
      if (v.contains("unit")) {
        if (auto unit = literal_text(v["unit"])) return *inner + " " + *unit;
      }
      return inner;
    }
    return std::nullopt;
  }
  if (v.is_array()) {
    std::vector<std::string> parts;
    for (const auto& x : v) {
      if (auto t = literal_text(x)) parts.push_back(*t);
    }
    if (parts.empty()) return std::nullopt;
    return join(parts, ", ");
  }
  return std::nullopt;
}

std::vector<std::string> type_list(const json& node, const FieldMap& fm) {
  std::vector<std::string> types;
  if (const json* t = lookup_any(node, fm.type_keys)) {
    if (t->is_string()) {
      types.push_back(t->get<std::string>());
    } else if (t->is_array()) {
      for (const auto& x : *t) {
        if (x.is_string()) types.push_back(x.get<std::string>());
      }
    }
  }
  return types;
}

bool any_in(const std::vector<std::string>& values, const std::vector<std::string>& accepted) {
  for (const auto& v : values) {
    if (std::find(accepted.begin(), accepted.end(), v) != accepted.end()) return true;
  }
  return false;
}

/// A reference: a bare id string, or an object carrying an id or a nested
/// entity/activity reference.
std::optional<std::string> reference_id(const json& v, const FieldMap& fm,
                                        const std::vector<std::string>& nested_keys) {
  if (v.is_string()) return v.get<std::string>();
  if (!v.is_object()) return std::nullopt;
  if (const json* inner = lookup_any(v, nested_keys)) return reference_id(*inner, fm, nested_keys);
  if (const json* id = lookup_any(v, fm.id_keys); id && id->is_string()) return id->get<std::string>();
  return std::nullopt;
}

std::vector<std::string> reference_list(const json& v, const FieldMap& fm,
                                        const std::vector<std::string>& nested_keys) {
  std::vector<std::string> out;
  if (v.is_array()) {
    for (const auto& x : v) {
      if (auto id = reference_id(x, fm, nested_keys)) out.push_back(*id);
    }
  } else if (auto id = reference_id(v, fm, nested_keys)) {
    out.push_back(*id);
  }
  return out;
}

std::string condition_key_for(std::string_view raw, const FieldMap& fm) {
  std::string key = canonical_key(raw);
  for (const auto& prefix : {"matprov:", "prov:", "schema:"}) {
    if (key.rfind(prefix, 0) == 0) key = key.substr(std::string_view(prefix).size());
  }
  for (const auto& [alias, target] : fm.condition_aliases) {
    if (key == alias) return target;
  }
  return key;
}

bool is_tool_entity(const json& node, const std::vector<std::string>& types, const FieldMap& fm) {
  if (any_in(types, fm.tool_type_values)) return true;
  for (const auto& key : fm.tool_marker_keys) {
    const json* v = lookup_path(node, key);
    if (!v) continue;
    if (auto text = literal_text(*v)) {
      const std::string t = canonical_label(*text);
      if (std::find(fm.tool_marker_values.begin(), fm.tool_marker_values.end(), t) !=
          fm.tool_marker_values.end()) {
        return true;
      }
    }
  }
  return false;
}

void read_attributes(const json& node, const FieldMap& fm, AttributeMap& out) {
  for (const auto& container : fm.attribute_container_keys) {
    const json* c = lookup_path(node, container);
    if (!c || !c->is_object()) continue;
    for (auto it = c->begin(); it != c->end(); ++it) {
      if (auto text = literal_text(it.value())) out[canonical_key(it.key())] = canonical_value(*text);
    }
  }
  for (const auto& key : fm.attribute_vocabulary) {
    if (const json* v = lookup_path(node, key)) {
      if (auto text = literal_text(*v)) out[key] = canonical_value(*text);
    }
  }
}

void read_conditions(const json& node, const FieldMap& fm, AttributeMap& out) {
  for (const auto& container : fm.condition_container_keys) {
    const json* c = lookup_path(node, container);
    if (!c || !c->is_object()) continue;
    for (auto it = c->begin(); it != c->end(); ++it) {
      if (auto text = literal_text(it.value())) {
        const std::string value = canonical_value(*text);
        if (!value.empty()) out[condition_key_for(it.key(), fm)] = value;
      }
    }
  }
  if (!node.is_object()) return;
  for (auto it = node.begin(); it != node.end(); ++it) {
    const std::string key = condition_key_for(it.key(), fm);
    if (std::find(fm.condition_vocabulary.begin(), fm.condition_vocabulary.end(), key) ==
        fm.condition_vocabulary.end()) {
      continue;
    }
    if (auto text = literal_text(it.value())) {
      const std::string value = canonical_value(*text);
      if (!value.empty()) out[key] = value;
    }
  }
}

std::string read_label(const json& node, const FieldMap& fm) {
  if (const json* v = lookup_any(node, fm.label_keys)) {
    if (auto text = literal_text(*v)) return *text;
  }
  return {};
}

std::string collapse_whitespace(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
    } else {
      if (pending_space) out.push_back(' ');
      pending_space = false;
      out.push_back(c);
    }
  }
  return out;
}

int read_year(const json& document, const FieldMap& fm) {
  const json* v = lookup_any(document, fm.year_keys);
  if (!v) return 0;
  int year = 0;
  if (v->is_number_integer()) {
    year = v->get<int>();
  } else if (v->is_number_float()) {
    year = static_cast<int>(v->get<double>());
  } else if (v->is_string()) {
    const std::string s = v->get<std::string>();
    // Accept "2019", "2019-05-01" and similar.
    std::size_t i = 0;
    while (i < s.size() && !std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
    if (j - i == 4) year = std::stoi(s.substr(i, 4));
  }
  return (year >= 1000 && year <= 9999) ? year : 0;
}

}  // namespace

ParsedRecord parse_record(std::string_view raw_document, const FieldMap& field_map) {
  json document;
  try {
    document = json::parse(raw_document);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::malformed_document, std::string("invalid JSON: ") + e.what());
  }
  return parse_document(document, field_map);
}

ParsedRecord parse_document(const json& document, const FieldMap& fm) {
  if (!document.is_object()) throw Error(ErrorCode::malformed_document, "document is not a JSON object");
  const json* graph_nodes = lookup_any(document, fm.graph_keys);
  if (!graph_nodes || !graph_nodes->is_array()) {
    throw Error(ErrorCode::malformed_document, "no PROV graph array");
  }

  ParsedRecord out;
  ProcessGraph& g = out.graph;
  if (const json* rid = lookup_any(document, fm.record_id_keys)) {
    if (auto text = literal_text(*rid)) g.record_id = *text;
  }
  if (const json* doi = lookup_any(document, fm.doi_keys)) {
    if (auto text = literal_text(*doi)) g.doi = canonical_label(*text);
  }
  g.year = read_year(document, fm);
  if (const json* cls = lookup_any(document, fm.class_keys)) {
    if (auto text = literal_text(*cls)) g.material_class = material_class_from_string(*text);
  }

  auto warn = [&](WarningKind kind, std::string detail) {
    out.warnings.push_back({g.record_id, kind, std::move(detail)});
  };

  enum class NodeType { material, tool, activity };
  std::unordered_map<std::string, NodeType> node_types;
  std::vector<std::pair<std::string, std::string>> usage_refs;       // (entity, activity)
  std::vector<std::pair<std::string, std::string>> generation_refs;  // (activity, entity)
  const std::vector<std::string> activity_ref_keys = fm.relation_activity_keys;
  const std::vector<std::string> entity_ref_keys = fm.relation_entity_keys;

  int source_position = 0;
  for (const auto& node : *graph_nodes) {
    if (!node.is_object()) {
      warn(WarningKind::unparseable_node, "graph element is not an object");
      continue;
    }
    const auto types = type_list(node, fm);
    const bool is_activity = any_in(types, fm.activity_types);
    const bool is_usage = any_in(types, fm.usage_types);
    const bool is_generation = any_in(types, fm.generation_types);
    const bool is_tool = !is_activity && is_tool_entity(node, types, fm);
    const bool is_entity = !is_activity && (is_tool || any_in(types, fm.entity_types));

    if (is_usage || is_generation) {
      const json* a = lookup_any(node, fm.relation_activity_keys);
      const json* e = lookup_any(node, fm.relation_entity_keys);
      auto aid = a ? reference_id(*a, fm, activity_ref_keys) : std::nullopt;
      auto eid = e ? reference_id(*e, fm, entity_ref_keys) : std::nullopt;
      if (!aid || !eid) {
        warn(WarningKind::unparseable_node, "relation without activity/entity reference");
        continue;
      }
      if (is_usage) {
        usage_refs.emplace_back(*eid, *aid);
      } else {
        generation_refs.emplace_back(*aid, *eid);
      }
      continue;
    }
    if (!is_activity && !is_entity) continue;  // agents, bundles and other PROV types

    const json* id_value = lookup_any(node, fm.id_keys);
    if (!id_value || !id_value->is_string() || id_value->get<std::string>().empty()) {
      warn(WarningKind::unparseable_node, "node without id");
      continue;
    }
    const std::string id = id_value->get<std::string>();
    if (node_types.count(id)) {
      warn(WarningKind::duplicate_node, id);
      continue;
    }

    if (is_activity) {
      ActivityNode a;
      a.id = id;
      a.label = canonical_label(read_label(node, fm));
      read_conditions(node, fm, a.conditions);
      a.source_position = source_position++;
      node_types[id] = NodeType::activity;
      for (const auto& key : fm.inline_used_keys) {
        if (const json* used = lookup_path(node, key)) {
          for (const auto& eid : reference_list(*used, fm, entity_ref_keys)) usage_refs.emplace_back(eid, id);
        }
      }
      for (const auto& key : fm.inline_generated_keys) {
        if (const json* gen = lookup_path(node, key)) {
          for (const auto& eid : reference_list(*gen, fm, entity_ref_keys)) generation_refs.emplace_back(id, eid);
        }
      }
      g.activities.push_back(std::move(a));
    } else {
      EntityNode e;
      e.id = id;
      e.kind = is_tool ? EntityKind::tool : EntityKind::material;
      const std::string label = collapse_whitespace(read_label(node, fm));
      e.label = is_tool ? canonical_label(label) : label;
      read_attributes(node, fm, e.attributes);
      e.role = is_tool ? Role::tool : Role::unassigned;
      node_types[id] = is_tool ? NodeType::tool : NodeType::material;
      for (const auto& key : fm.inline_generated_by_keys) {
        if (const json* gen = lookup_path(node, key)) {
          for (const auto& aid : reference_list(*gen, fm, activity_ref_keys)) generation_refs.emplace_back(aid, id);
        }
      }
      (is_tool ? g.tool_entities : g.material_entities).push_back(std::move(e));
    }
  }

  auto type_of = [&](const std::string& id) -> std::optional<NodeType> {
    auto it = node_types.find(id);
    if (it == node_types.end()) return std::nullopt;
    return it->second;
  };

  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& [eid, aid] : usage_refs) {
    const auto et = type_of(eid);
    const auto at = type_of(aid);
    if (!et || !at || *et == NodeType::activity || *at != NodeType::activity) {
      warn(WarningKind::dangling_relation, "usage " + eid + " -> " + aid);
      continue;
    }
    if (seen.emplace("u:" + eid, aid).second) g.usage_edges.push_back({eid, aid});
  }
  for (const auto& [aid, eid] : generation_refs) {
    const auto et = type_of(eid);
    const auto at = type_of(aid);
    if (!et || !at || *et == NodeType::activity || *at != NodeType::activity) {
      warn(WarningKind::dangling_relation, "generation " + aid + " -> " + eid);
      continue;
    }
    if (!seen.emplace("g:" + aid, eid).second) continue;
    if (*et == NodeType::tool) warn(WarningKind::tool_generated, aid + " generates tool " + eid);
    g.generation_edges.push_back({aid, eid});
  }

  if (g.activities.empty()) {
    throw Error(ErrorCode::empty_record, "record '" + g.record_id + "' has no parseable activity");
  }
  return out;
}

// Topology -----------------------------------------------------------------------

ProcessGraph assign_roles(ProcessGraph g) {
  std::unordered_map<std::string, int> generated_in;
  std::unordered_map<std::string, int> used_out;
  for (const auto& u : g.usage_edges) ++used_out[u.entity];
  for (const auto& e : g.generation_edges) ++generated_in[e.entity];
  for (auto& m : g.material_entities) {
    const bool gen = generated_in.count(m.id) > 0;
    const bool use = used_out.count(m.id) > 0;
    if (!gen && !use) {
      m.role = Role::unconnected;
    } else if (use && !gen) {
      m.role = Role::precursor;
    } else if (gen && use) {
      m.role = Role::intermediate;
    } else {
      m.role = Role::product;
    }
  }
  for (auto& t : g.tool_entities) t.role = Role::tool;
  return g;
}

namespace {

/// Kahn's algorithm keyed by source_position; returns ids in order, or fewer
/// ids than activities when a cycle blocks progress.
std::vector<std::string> kahn_order(const ProcessGraph& g, const PrecedenceSet& prec) {
  std::unordered_map<std::string, int> indegree;
  std::unordered_map<std::string, std::vector<std::string>> successors;
  std::unordered_map<std::string, int> position;
  for (const auto& a : g.activities) {
    indegree[a.id] = 0;
    position[a.id] = a.source_position;
  }
  for (const auto& [from, to] : prec) {
    ++indegree[to];
    successors[from].push_back(to);
  }
  using Entry = std::pair<int, std::string>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> ready;
  for (const auto& a : g.activities) {
    if (indegree[a.id] == 0) ready.emplace(a.source_position, a.id);
  }
  std::vector<std::string> order;
  order.reserve(g.activities.size());
  while (!ready.empty()) {
    auto [pos, id] = ready.top();
    ready.pop();
    order.push_back(id);
    for (const auto& next : successors[id]) {
      if (--indegree[next] == 0) ready.emplace(position[next], next);
    }
  }
  return order;
}

}  // namespace

PrecedenceSet infer_precedence(const ProcessGraph& g) {
  std::unordered_map<std::string, std::vector<std::string>> generators;
  for (const auto& e : g.generation_edges) generators[e.entity].push_back(e.activity);
  PrecedenceSet prec;
  for (const auto& u : g.usage_edges) {
    auto it = generators.find(u.entity);
    if (it == generators.end()) continue;
    for (const auto& producer : it->second) {
      if (producer == u.activity) {
        throw Error(ErrorCode::cyclic_precedence,
                    "record '" + g.record_id + "': activity " + producer + " consumes its own output " + u.entity);
      }
      prec.emplace(producer, u.activity);
    }
  }
  if (kahn_order(g, prec).size() != g.activities.size()) {
    throw Error(ErrorCode::cyclic_precedence, "record '" + g.record_id + "': material flow contains a cycle");
  }
  return prec;
}

std::vector<std::string> order_activities(const ProcessGraph& g, const PrecedenceSet& prec) {
  auto order = kahn_order(g, prec);
  if (order.size() != g.activities.size()) {
    throw Error(ErrorCode::cyclic_precedence, "record '" + g.record_id + "': cannot order activities");
  }
  return order;
}

bool is_retainable(const ProcessGraph& g) {
  if (g.activities.empty()) return false;
  return std::any_of(g.material_entities.begin(), g.material_entities.end(),
                     [](const EntityNode& e) { return e.role == Role::precursor; });
}

std::vector<std::string> check_invariants(const ProcessGraph& g) {
  std::vector<std::string> problems;
  std::unordered_map<std::string, char> kinds;
  auto add = [&](const std::string& id, char kind) {
    if (!kinds.emplace(id, kind).second) problems.push_back("duplicate node id " + id);
  };
  for (const auto& e : g.material_entities) add(e.id, 'm');
  for (const auto& e : g.tool_entities) add(e.id, 't');
  for (const auto& a : g.activities) add(a.id, 'a');
  auto kind_of = [&](const std::string& id) {
    auto it = kinds.find(id);
    return it == kinds.end() ? '?' : it->second;
  };
  for (const auto& u : g.usage_edges) {
    const char ek = kind_of(u.entity);
    if (ek != 'm' && ek != 't') problems.push_back("usage source not an entity: " + u.entity);
    if (kind_of(u.activity) != 'a') problems.push_back("usage target not an activity: " + u.activity);
  }
  for (const auto& e : g.generation_edges) {
    if (kind_of(e.activity) != 'a') problems.push_back("generation source not an activity: " + e.activity);
    const char ek = kind_of(e.entity);
    if (ek != 'm' && ek != 't') problems.push_back("generation target not an entity: " + e.entity);
  }
  std::set<int> positions;
  for (const auto& a : g.activities) {
    if (!positions.insert(a.source_position).second) problems.push_back("duplicate source_position in " + a.id);
  }
  for (const auto& t : g.tool_entities) {
    if (t.role != Role::tool && t.role != Role::unassigned) problems.push_back("tool with material role: " + t.id);
  }
  return problems;
}

// Compile pipeline ----------------------------------------------------------------

CompileResult compile_documents(const std::vector<std::string>& documents, const FieldMap& field_map,
                                std::size_t jobs) {
  struct Slot {
    std::optional<ProcessGraph> graph;
    std::vector<ParseWarning> warnings;
  };
  std::vector<Slot> slots(documents.size());
  parallel_for(documents.size(), jobs, [&](std::size_t i) {
    Slot& slot = slots[i];
    std::string fallback_id = "record-" + std::to_string(i);
    std::string record_id = fallback_id;
    try {
      ParsedRecord parsed = parse_record(documents[i], field_map);
      if (parsed.graph.record_id.empty()) {
        parsed.graph.record_id = fallback_id;
        for (auto& w : parsed.warnings) w.record_id = fallback_id;
      }
      record_id = parsed.graph.record_id;
      slot.warnings = std::move(parsed.warnings);
      ProcessGraph g = assign_roles(std::move(parsed.graph));
      const auto prec = infer_precedence(g);
      g.ordered_activity_ids = order_activities(g, prec);
      slot.graph = std::move(g);
    } catch (const Error& e) {
      slot.warnings.push_back({record_id, WarningKind::excluded_record, e.what()});
    }
  });
  CompileResult result;
  result.documents = documents.size();
  for (auto& slot : slots) {
    if (slot.graph) result.graphs.push_back(std::move(*slot.graph));
    for (auto& w : slot.warnings) result.warnings.push_back(std::move(w));
  }
  return result;
}

std::vector<std::string> read_documents(const std::string& path) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension().string();
      if (ext == ".json" || ext == ".jsonld" || ext == ".jsonl" || ext == ".ndjson") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(path)) {
    files.emplace_back(path);
  } else {
    throw Error(ErrorCode::io_error, "corpus path not found: " + path);
  }
  std::vector<std::string> documents;
  for (const auto& f : files) {
    std::string content = read_file(f.string());
    const auto ext = f.extension().string();
    if (ext == ".jsonl" || ext == ".ndjson") {
      std::istringstream in(content);
      std::string line;
      while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        documents.push_back(std::move(line));
      }
    } else {
      documents.push_back(std::move(content));
    }
  }
  return documents;
}

// Serialization -------------------------------------------------------------------

namespace {

json entity_json(const EntityNode& e) {
  return json{{"id", e.id}, {"label", e.label}, {"attributes", e.attributes}, {"role", to_string(e.role)}};
}

EntityNode entity_from(const json& j, EntityKind kind) {
  EntityNode e;
  e.id = j.at("id").get<std::string>();
  e.label = j.at("label").get<std::string>();
  e.kind = kind;
  e.attributes = j.value("attributes", AttributeMap{});
  e.role = role_from_string(j.value("role", std::string("unassigned")));
  return e;
}

}  // namespace

json to_json(const ProcessGraph& g) {
  json j;
  j["record_id"] = g.record_id;
  j["doi"] = g.doi;
  j["year"] = g.year;
  j["material_class"] = to_string(g.material_class);
  j["materials"] = json::array();
  for (const auto& e : g.material_entities) j["materials"].push_back(entity_json(e));
  j["tools"] = json::array();
  for (const auto& e : g.tool_entities) j["tools"].push_back(entity_json(e));
  j["activities"] = json::array();
  for (const auto& a : g.activities) {
    j["activities"].push_back(
        json{{"id", a.id}, {"label", a.label}, {"conditions", a.conditions}, {"source_position", a.source_position}});
  }
  j["usage"] = json::array();
  for (const auto& u : g.usage_edges) j["usage"].push_back(json::array({u.entity, u.activity}));
  j["generation"] = json::array();
  for (const auto& e : g.generation_edges) j["generation"].push_back(json::array({e.activity, e.entity}));
  j["order"] = g.ordered_activity_ids;
  return j;
}

ProcessGraph graph_from_json(const json& j) {
  ProcessGraph g;
  g.record_id = j.at("record_id").get<std::string>();
  g.doi = j.value("doi", std::string{});
  g.year = j.value("year", 0);
  g.material_class = material_class_from_string(j.value("material_class", std::string("other")));
  for (const auto& e : j.at("materials")) g.material_entities.push_back(entity_from(e, EntityKind::material));
  for (const auto& e : j.at("tools")) g.tool_entities.push_back(entity_from(e, EntityKind::tool));
  for (const auto& a : j.at("activities")) {
    g.activities.push_back({a.at("id").get<std::string>(), a.at("label").get<std::string>(),
                            a.value("conditions", AttributeMap{}), a.at("source_position").get<int>()});
  }
  for (const auto& u : j.at("usage")) g.usage_edges.push_back({u.at(0).get<std::string>(), u.at(1).get<std::string>()});
  for (const auto& e : j.at("generation")) {
    g.generation_edges.push_back({e.at(0).get<std::string>(), e.at(1).get<std::string>()});
  }
  g.ordered_activity_ids = j.value("order", std::vector<std::string>{});
  return g;
}

json to_json(const ParseWarning& w) {
  return json{{"record_id", w.record_id}, {"kind", to_string(w.kind)}, {"detail", w.detail}};
}

json to_prov_jsonld(const ProcessGraph& g) {
  json doc;
  doc["@context"] = "https://openprovenance.org/prov-jsonld/context.jsonld";
  doc["@id"] = g.record_id;
  json meta = json::object();
  if (!g.doi.empty()) meta["doi"] = g.doi;
  if (g.year) meta["year"] = g.year;
  meta["material_class"] = to_string(g.material_class);
  doc["metadata"] = meta;
  json nodes = json::array();
  // Activities are emitted in source_position order so a re-parse restores it.
  std::vector<const ActivityNode*> acts;
  for (const auto& a : g.activities) acts.push_back(&a);
  std::sort(acts.begin(), acts.end(),
            [](const ActivityNode* x, const ActivityNode* y) { return x->source_position < y->source_position; });
  for (const auto& e : g.material_entities) {
    json n{{"@type", "prov:Entity"}, {"@id", e.id}, {"label", e.label}};
    if (!e.attributes.empty()) n["attributes"] = e.attributes;
    nodes.push_back(n);
  }
  for (const auto& e : g.tool_entities) {
    json n{{"@type", json::array({"prov:Entity", "matprov:Tool"})}, {"@id", e.id}, {"label", e.label}};
    if (!e.attributes.empty()) n["attributes"] = e.attributes;
    nodes.push_back(n);
  }
  for (const auto* a : acts) {
    json n{{"@type", "prov:Activity"}, {"@id", a->id}, {"label", a->label}};
    if (!a->conditions.empty()) n["conditions"] = a->conditions;
    nodes.push_back(n);
  }
  for (const auto& u : g.usage_edges) {
    nodes.push_back(json{{"@type", "prov:Usage"}, {"activity", u.activity}, {"entity", u.entity}});
  }
  for (const auto& e : g.generation_edges) {
    nodes.push_back(json{{"@type", "prov:Generation"}, {"activity", e.activity}, {"entity", e.entity}});
  }
  doc["@graph"] = nodes;
  return doc;
}

void write_graph_store(const std::string& path, std::span<const ProcessGraph> graphs, const json& header_extra) {
  json header = artifact_header(kGraphStoreFormat, kGraphStoreVersion, header_extra);
  header["count"] = graphs.size();
  std::vector<json> records;
  records.reserve(graphs.size());
  for (const auto& g : graphs) records.push_back(to_json(g));
  write_jsonl(path, header, records);
}

std::vector<ProcessGraph> read_graph_store(const std::string& path) {
  auto file = read_jsonl(path, kGraphStoreFormat);
  std::vector<ProcessGraph> graphs;
  graphs.reserve(file.records.size());
  for (const auto& r : file.records) graphs.push_back(graph_from_json(r));
  return graphs;
}

void write_warnings(const std::string& path, std::span<const ParseWarning> warnings, const json& header_extra) {
  json header = artifact_header("provmind-warnings", 1, header_extra);
  header["count"] = warnings.size();
  std::vector<json> records;
  for (const auto& w : warnings) records.push_back(to_json(w));
  write_jsonl(path, header, records);
}

std::string corpus_hash(std::span<const ProcessGraph> graphs) {
  std::uint64_t h = fnv1a64("provmind-corpus");
  for (const auto& g : graphs) h = hash_combine(h, std::string_view(to_json(g).dump()));
  return hex64(h);
}

}  // namespace provmind
