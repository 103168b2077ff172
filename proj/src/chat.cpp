#include "provmind/chat.hpp"

#include <cstdlib>
#include <set>

#include "provmind/common.hpp"
#include "provmind/http.hpp"

namespace provmind {

using nlohmann::json;

json to_json(const ChatRequest& r) {
  json messages = json::array();
  for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"content", m.text}});
  return json{{"messages", messages}, {"max_new_tokens", r.max_new_tokens}, {"temperature", r.temperature}};
}

json to_json(const ChatResponse& r) { return json{{"text", r.text}, {"finish_reason", r.finish_reason}}; }

MockChatClient::MockChatClient(std::vector<std::pair<std::string, std::string>> rules) {
  for (auto& [pattern, response] : rules) {
    try {
      rules_.push_back({std::regex(pattern, std::regex::ECMAScript), std::move(response)});
    } catch (const std::regex_error& e) {
      throw Error(ErrorCode::invalid_params, "bad mock pattern '" + pattern + "': " + e.what());
    }
  }
}

std::vector<std::pair<std::string, std::string>> MockChatClient::default_rules() {
  return {
      {"Write a short reasoning plan",
       "Plan: compare each option with the retrieved precedent routes, then favour the option with the strongest "
       "provenance support."},
      {"Highest compatibility option: \\(([A-Z])\\)", "Answer: $1"},
      {"[\\s\\S]", "Answer: $HASH_LETTER"},
  };
}

MockChatClient MockChatClient::from_json(const json& j) {
  std::vector<std::pair<std::string, std::string>> rules;
  for (const auto& r : j) rules.emplace_back(r.at("pattern").get<std::string>(), r.at("response").get<std::string>());
  return MockChatClient(std::move(rules));
}

namespace {

std::string request_text(const ChatRequest& request) {
  std::string text;
  for (const auto& m : request.messages) {
    text += m.role;
    text += ": ";
    text += m.text;
    text += '\n';
  }
  return text;
}

char hash_letter(const std::string& text) {
  static const std::regex option_line("(^|\\n)\\(([A-Z])\\) ");
  std::set<char> letters;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), option_line); it != std::sregex_iterator(); ++it) {
    letters.insert((*it)[2].str()[0]);
  }
  const std::size_t count = letters.empty() ? 4 : letters.size();
  return static_cast<char>('A' + fnv1a64(text) % count);
}

}  // namespace

ChatResponse MockChatClient::complete(const ChatRequest& request) const {
  const std::string text = request_text(request);
  for (const auto& rule : rules_) {
    std::smatch match;
    if (!std::regex_search(text, match, rule.pattern)) continue;
    if (rule.response == "$TIMEOUT") throw Error(ErrorCode::client_timeout, "mock timeout");
    if (rule.response == "$EMPTY") return {"", "stop"};
    std::string out;
    const std::string& r = rule.response;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i] == '$' && i + 1 < r.size() && r[i + 1] >= '1' && r[i + 1] <= '9') {
        const auto group = static_cast<std::size_t>(r[i + 1] - '0');
        if (group < match.size()) out += match[group].str();
        ++i;
      } else if (r.compare(i, 12, "$HASH_LETTER") == 0) {
        out += hash_letter(text);
        i += 11;
      } else {
        out += r[i];
      }
    }
    return {out, "stop"};
  }
  return {"", "stop"};
}

HttpChatClient::HttpChatClient(std::string url, std::string token, std::string model, double timeout_seconds)
    : url_(std::move(url)), token_(std::move(token)), model_(std::move(model)), timeout_(timeout_seconds) {}

ChatResponse HttpChatClient::complete(const ChatRequest& request) const {
  json messages = json::array();
  for (const auto& m : request.messages) messages.push_back({{"role", m.role}, {"content", m.text}});
  json body{{"messages", messages}, {"max_tokens", request.max_new_tokens}, {"temperature", request.temperature}};
  if (!model_.empty()) body["model"] = model_;
  const auto result = http_post_json(url_, token_, body, timeout_);
  if (!result.ok) throw Error(ErrorCode::client_timeout, url_ + ": " + result.error);
  ChatResponse response;
  const json& b = result.body;
  if (b.contains("choices") && !b["choices"].empty()) {
    const json& c = b["choices"][0];
    if (c.contains("message")) response.text = c["message"].value("content", "");
    else response.text = c.value("text", "");
    if (c.contains("finish_reason") && c["finish_reason"].is_string()) response.finish_reason = c["finish_reason"];
  } else {
    response.text = b.value("text", "");
    response.finish_reason = b.value("finish_reason", "");
  }
  return response;
}

std::unique_ptr<ChatClient> make_chat_client_from_env() {
  const char* url = std::getenv("PROVMIND_CHAT_URL");
  if (!url || !*url) return nullptr;
  const char* token = std::getenv("PROVMIND_CHAT_TOKEN");
  const char* model = std::getenv("PROVMIND_CHAT_MODEL");
  return std::make_unique<HttpChatClient>(url, token ? token : "", model ? model : "");
}

}  // namespace provmind
