#pragma once

#include <string>

#include <nlohmann/json.hpp>

namespace provmind {

struct HttpResult {
  bool ok = false;
  bool timed_out = false;
  int status = 0;
  nlohmann::json body;
  std::string error;
};

/// POST a JSON body to `url` ("http[s]://host[:port]/path"). A non-empty token
/// is sent as a bearer credential. Never throws for transport failures.
HttpResult http_post_json(const std::string& url, const std::string& token, const nlohmann::json& body,
                          double timeout_seconds);

}  // namespace provmind
