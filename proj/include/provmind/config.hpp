#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "provmind/memory.hpp"
#include "provmind/runner.hpp"
#include "provmind/splitter.hpp"
#include "provmind/synthetic.hpp"
#include "provmind/taskgen.hpp"

namespace provmind {

/// Every setting that can change an output byte. File paths, --jobs and
/// credentials are deliberately left out so the hash only tracks content.
struct RunConfig {
  std::uint64_t seed = 42;
  SyntheticParams synth;
  TaskgenConfig taskgen;
  Protocol protocol = Protocol::dual;
  SplitConfig split;
  MemoryConfig memory;
  PolicyConfig policy;
  std::string chat_url;
  std::string chat_model;
  std::string embed_url;

  /// Unknown top-level keys and invalid values throw Error{config_conflict}.
  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  std::string hash() const;
};

/// Header fields every artifact carries.
nlohmann::json provenance_fields(const RunConfig& config);

}  // namespace provmind
