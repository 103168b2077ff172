#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "provmind/provgraph.hpp"

namespace provmind {

/// Parameters for desk-scale synthetic corpora.
///
/// The generator plants learnable regularities: each activity has a small set
/// of preferred successors, preferred condition values, a preferred tool and a
/// preferred output form. Class and year are assigned per DOI so every split
/// protocol has material to work with.
struct SyntheticParams {
  std::size_t n_records = 200;
  std::vector<std::string> activity_vocab{"mix",    "grind",  "ball mill", "dry",   "calcine", "press",
                                          "sinter", "anneal", "quench",    "dissolve", "stir", "filter",
                                          "wash",   "heat",   "melt",      "spin coat"};
  std::vector<std::string> tool_vocab{"agate mortar",    "planetary ball mill", "tube furnace", "muffle furnace",
                                      "hydraulic press", "autoclave",           "alumina crucible", "glovebox",
                                      "magnetic stirrer", "drying oven",        "arc melter",   "spin coater"};
  std::map<std::string, std::vector<std::string>> condition_vocab{
      {"temperature", {"80 °C", "120 °C", "300 °C", "450 °C", "600 °C", "750 °C", "900 °C", "1000 °C", "1200 °C"}},
      {"duration", {"10 min", "30 min", "1 h", "2 h", "4 h", "6 h", "12 h", "24 h"}},
      {"atmosphere", {"air", "argon", "nitrogen", "vacuum", "oxygen", "5% H2/Ar"}},
      {"pressure", {"10 MPa", "50 MPa", "100 MPa", "1 GPa"}},
      {"heating_rate", {"2 °C/min", "5 °C/min", "10 °C/min"}},
      {"rotation", {"200 rpm", "300 rpm", "500 rpm"}}};
  std::pair<int, int> route_length_range{2, 7};
  std::map<MaterialClass, double> class_mix{{MaterialClass::battery, 0.3},
                                            {MaterialClass::thermoelectric, 0.4},
                                            {MaterialClass::magnetic, 0.3}};
  std::pair<int, int> year_range{2005, 2024};
  /// Strength of the planted regularities in [0, 1]; 0 gives uniform noise.
  double regularity = 0.75;
  /// Probability that an interior step runs as a parallel branch.
  double branch_probability = 0.2;
  /// Probability that document order of activities is shuffled.
  double shuffle_source_probability = 0.15;
  /// Probability of an isolated (unconnected) material node.
  double unconnected_probability = 0.05;
  std::size_t max_records_per_doi = 3;

  static SyntheticParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Deterministic in (params, seed). Throws Error{invalid_params} for empty
/// vocabularies, an empty class mix or route_length_range below 1. The
/// returned graphs already carry roles and topological order.
std::vector<ProcessGraph> generate_synthetic_corpus(const SyntheticParams& params, std::uint64_t seed);

}  // namespace provmind
