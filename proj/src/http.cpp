#include "provmind/http.hpp"

#include <httplib.h>

namespace provmind {

HttpResult http_post_json(const std::string& url, const std::string& token, const nlohmann::json& body,
                          double timeout_seconds) {
  HttpResult result;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    result.error = "endpoint URL must start with http:// or https://";
    return result;
  }
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (url.rfind("https://", 0) == 0) {
    result.error = "built without TLS support";
    return result;
  }
#endif
  httplib::Client client(base);
  const auto sec = static_cast<time_t>(timeout_seconds);
  const auto usec = static_cast<time_t>((timeout_seconds - static_cast<double>(sec)) * 1e6);
  client.set_connection_timeout(sec, usec);
  client.set_read_timeout(sec, usec);
  client.set_write_timeout(sec, usec);
  httplib::Headers headers;
  if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
  auto response = client.Post(path, headers, body.dump(), "application/json");
  if (!response) {
    result.timed_out = response.error() == httplib::Error::Read || response.error() == httplib::Error::Write ||
                       response.error() == httplib::Error::ConnectionTimeout;
    result.error = httplib::to_string(response.error());
    return result;
  }
  result.status = response->status;
  if (response->status < 200 || response->status >= 300) {
    result.error = "HTTP " + std::to_string(response->status);
    return result;
  }
  try {
    result.body = nlohmann::json::parse(response->body);
  } catch (const nlohmann::json::parse_error& e) {
    result.error = std::string("invalid JSON response: ") + e.what();
    return result;
  }
  result.ok = true;
  return result;
}

}  // namespace provmind
