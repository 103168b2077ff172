#include "provmind/config.hpp"

#include <set>

#include "provmind/common.hpp"

namespace provmind {

using nlohmann::json;

RunConfig RunConfig::from_json(const json& j) {
  static const std::set<std::string> kKeys{"seed",   "synth",  "taskgen",  "protocol",   "split",
                                           "memory", "policy", "chat_url", "chat_model", "embed_url"};
  if (!j.is_object()) throw Error(ErrorCode::config_conflict, "run config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kKeys.count(key)) throw Error(ErrorCode::config_conflict, "unknown config key '" + key + "'");
  }
  RunConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    if (j.contains("synth")) c.synth = SyntheticParams::from_json(j["synth"]);
    if (j.contains("taskgen")) c.taskgen = TaskgenConfig::from_json(j["taskgen"]);
    if (j.contains("protocol")) c.protocol = protocol_from_string(j["protocol"].get<std::string>());
    if (j.contains("split")) c.split = SplitConfig::from_json(j["split"]);
    if (j.contains("memory")) c.memory = MemoryConfig::from_json(j["memory"]);
    if (j.contains("policy")) c.policy = PolicyConfig::from_json(j["policy"]);
    c.chat_url = j.value("chat_url", c.chat_url);
    c.chat_model = j.value("chat_model", c.chat_model);
    c.embed_url = j.value("embed_url", c.embed_url);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::config_conflict, e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::config_conflict, e.what());
  }
  if (c.taskgen.k_options < 2) throw Error(ErrorCode::config_conflict, "k_options must be at least 2");
  c.policy.validate();
  return c;
}

json RunConfig::to_json() const {
  return json{{"seed", seed},
              {"synth", synth.to_json()},
              {"taskgen", taskgen.to_json()},
              {"protocol", to_string(protocol)},
              {"split", split.to_json()},
              {"memory", memory.to_json()},
              {"policy", policy.to_json()},
              {"chat_url", chat_url},
              {"chat_model", chat_model},
              {"embed_url", embed_url}};
}

std::string RunConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

json provenance_fields(const RunConfig& config) { return json{{"run_config_hash", config.hash()}}; }

}  // namespace provmind
