#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "provmind/common.hpp"

namespace provmind {

enum class MaterialClass { battery, thermoelectric, magnetic, other };
enum class EntityKind { material, tool };
enum class Role { unassigned, precursor, intermediate, product, tool, unconnected };

std::string_view to_string(MaterialClass c);
std::string_view to_string(EntityKind k);
std::string_view to_string(Role r);
MaterialClass material_class_from_string(std::string_view text);
EntityKind entity_kind_from_string(std::string_view text);
Role role_from_string(std::string_view text);

struct EntityNode {
  std::string id;
  std::string label;
  EntityKind kind = EntityKind::material;
  AttributeMap attributes;
  Role role = Role::unassigned;

  bool operator==(const EntityNode&) const = default;
};

struct ActivityNode {
  std::string id;
  std::string label;
  AttributeMap conditions;
  int source_position = 0;

  bool operator==(const ActivityNode&) const = default;
};

struct UsageEdge {
  std::string entity;
  std::string activity;
  bool operator==(const UsageEdge&) const = default;
};

struct GenerationEdge {
  std::string activity;
  std::string entity;
  bool operator==(const GenerationEdge&) const = default;
};

/// One synthesis record as a typed heterogeneous directed graph.
///
/// Node ids are unique across materials, tools and activities. Usage edges run
/// entity -> activity, generation edges activity -> entity.
struct ProcessGraph {
  std::string record_id;
  std::string doi;
  int year = 0;  // 0 when the record does not report one
  MaterialClass material_class = MaterialClass::other;
  std::vector<EntityNode> material_entities;
  std::vector<EntityNode> tool_entities;
  std::vector<ActivityNode> activities;
  std::vector<UsageEdge> usage_edges;
  std::vector<GenerationEdge> generation_edges;
  std::vector<std::string> ordered_activity_ids;

  const ActivityNode* find_activity(std::string_view id) const;
  const EntityNode* find_entity(std::string_view id) const;

  /// Activity labels in topological order (requires order_activities).
  std::vector<std::string> ordered_activity_labels() const;
  /// Activities in topological order.
  std::vector<const ActivityNode*> ordered_activities() const;

  std::vector<const EntityNode*> entities_used_by(std::string_view activity_id) const;
  std::vector<const EntityNode*> entities_generated_by(std::string_view activity_id) const;
  std::vector<std::string> labels_with_role(Role role) const;

  bool operator==(const ProcessGraph&) const = default;
};

using PrecedencePair = std::pair<std::string, std::string>;
using PrecedenceSet = std::set<PrecedencePair>;

/// Declarative mapping from PROV-JSONLD keys to graph fields. Every list is a
/// set of alternatives tried in order; a dotted entry ("metadata.doi")
/// descends into nested objects.
struct FieldMap {
  std::vector<std::string> graph_keys{"@graph", "graph", "prov:graph"};
  std::vector<std::string> record_id_keys{"@id", "id", "record_id", "metadata.record_id"};
  std::vector<std::string> id_keys{"@id", "id", "prov:id"};
  std::vector<std::string> type_keys{"@type", "type", "prov:type"};
  std::vector<std::string> entity_types{"prov:Entity", "Entity", "entity"};
  std::vector<std::string> activity_types{"prov:Activity", "Activity", "activity"};
  std::vector<std::string> usage_types{"prov:Usage", "Usage", "usage", "prov:Used", "used"};
  std::vector<std::string> generation_types{"prov:Generation", "Generation", "generation",
                                            "prov:WasGeneratedBy", "wasGeneratedBy"};
  std::vector<std::string> relation_activity_keys{"activity", "prov:activity"};
  std::vector<std::string> relation_entity_keys{"entity", "prov:entity"};
  std::vector<std::string> inline_used_keys{"used", "prov:used", "qualifiedUsage", "prov:qualifiedUsage"};
  std::vector<std::string> inline_generated_by_keys{"wasGeneratedBy", "prov:wasGeneratedBy",
                                                    "qualifiedGeneration", "prov:qualifiedGeneration"};
  std::vector<std::string> inline_generated_keys{"generated", "prov:generated"};
  std::vector<std::string> label_keys{"rdfs:label", "label", "prov:label", "name", "matprov:label"};
  std::vector<std::string> condition_container_keys{"conditions", "matprov:conditions", "parameters"};
  std::vector<std::string> condition_vocabulary{"temperature", "duration", "atmosphere", "pressure",
                                                "heating_rate", "cooling_rate", "rotation", "speed",
                                                "ph", "voltage", "current"};
  std::vector<std::pair<std::string, std::string>> condition_aliases{
      {"temp", "temperature"}, {"time", "duration"}, {"gas", "atmosphere"},
      {"heating_speed", "heating_rate"}, {"rpm", "rotation"}, {"rotation_speed", "rotation"}};
  std::vector<std::string> attribute_container_keys{"attributes", "properties", "matprov:attributes"};
  std::vector<std::string> attribute_vocabulary{"form", "purity", "mass", "concentration", "size",
                                                "particle_size", "thickness", "volume", "amount"};
  /// An entity is a tool if its type list contains one of these values...
  std::vector<std::string> tool_type_values{"matprov:Tool", "Tool", "tool", "prov:Agent", "Agent"};
  /// ...or one of these keys holds one of tool_marker_values.
  std::vector<std::string> tool_marker_keys{"entity_type", "category", "matprov:category", "kind", "role"};
  std::vector<std::string> tool_marker_values{"tool", "equipment", "instrument", "apparatus"};
  std::vector<std::string> doi_keys{"doi", "metadata.doi", "dc:identifier", "source.doi"};
  std::vector<std::string> year_keys{"year", "metadata.year", "publication_year", "metadata.publication_year"};
  std::vector<std::string> class_keys{"material_class", "metadata.material_class", "material_type",
                                      "metadata.material_type", "category", "metadata.category"};

  static FieldMap from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

enum class WarningKind {
  tool_generated,          // generation edge targets a tool entity
  dangling_relation,       // relation endpoint not found / wrong node type
  duplicate_node,          // repeated node id, later copy dropped
  unparseable_node,        // node without id or type
  excluded_record,         // record dropped by the compile pipeline
};

std::string_view to_string(WarningKind k);

struct ParseWarning {
  std::string record_id;
  WarningKind kind;
  std::string detail;
  bool operator==(const ParseWarning&) const = default;
};

struct ParsedRecord {
  ProcessGraph graph;
  std::vector<ParseWarning> warnings;
};

/// Parse one PROV-JSONLD document.
///
/// Throws Error{malformed_document} when the bytes are not a JSON object with a
/// graph array, and Error{empty_record} when no activity survives parsing.
/// Optional fields that cannot be read are dropped, never invented.
ParsedRecord parse_record(std::string_view raw_document, const FieldMap& field_map = {});
ParsedRecord parse_document(const nlohmann::json& document, const FieldMap& field_map = {});

/// Fill roles from topology: precursor (used, never generated), intermediate
/// (generated and used), product (generated, never used), unconnected (no
/// edges); tools always get Role::tool.
ProcessGraph assign_roles(ProcessGraph g);

/// (a_i, a_j) iff some entity generated by a_i is used by a_j. Throws
/// Error{cyclic_precedence} if the induced relation has a cycle (self-loops
/// included).
PrecedenceSet infer_precedence(const ProcessGraph& g);

/// Kahn order over `prec`; among unconstrained peers the smaller
/// source_position goes first. Throws Error{cyclic_precedence}.
std::vector<std::string> order_activities(const ProcessGraph& g, const PrecedenceSet& prec);

/// Retention filter for benchmark generation: >=1 activity and >=1 precursor.
bool is_retainable(const ProcessGraph& g);

/// Edge and id checks for the ProcessGraph invariants; returns violations.
std::vector<std::string> check_invariants(const ProcessGraph& g);

// Compile pipeline -------------------------------------------------------------

struct CompileResult {
  std::vector<ProcessGraph> graphs;      // roles assigned and ordered
  std::vector<ParseWarning> warnings;    // includes excluded-record entries
  std::size_t documents = 0;
};

/// parse -> roles -> precedence -> order for every document, in input order.
/// Malformed, empty and cyclic records are excluded and logged as warnings.
CompileResult compile_documents(const std::vector<std::string>& documents, const FieldMap& field_map,
                                std::size_t jobs = 1);

/// Collect raw documents from a file or directory: *.json/*.jsonld hold one
/// document, *.jsonl/*.ndjson one per line. Directory entries are visited in
/// lexicographic path order.
std::vector<std::string> read_documents(const std::string& path);

// Serialization ----------------------------------------------------------------

nlohmann::json to_json(const ProcessGraph& g);
ProcessGraph graph_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ParseWarning& w);

/// Render a graph back to a PROV-JSONLD document under the default field map.
nlohmann::json to_prov_jsonld(const ProcessGraph& g);

inline constexpr std::string_view kGraphStoreFormat = "provmind-graphs";
inline constexpr int kGraphStoreVersion = 1;

void write_graph_store(const std::string& path, std::span<const ProcessGraph> graphs,
                       const nlohmann::json& header_extra);
std::vector<ProcessGraph> read_graph_store(const std::string& path);
void write_warnings(const std::string& path, std::span<const ParseWarning> warnings,
                    const nlohmann::json& header_extra);

/// Order-sensitive digest over the serialized graphs.
std::string corpus_hash(std::span<const ProcessGraph> graphs);

}  // namespace provmind
