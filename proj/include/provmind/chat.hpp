#pragma once

#include <memory>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace provmind {

struct ChatMessage {
  std::string role;  // "system" | "user" | "assistant"
  std::string text;
  bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  int max_new_tokens = 48;
  double temperature = 0.0;
};

struct ChatResponse {
  std::string text;
  std::string finish_reason;
};

nlohmann::json to_json(const ChatRequest& r);
nlohmann::json to_json(const ChatResponse& r);

/// Implementations must be safe to call from several threads at once.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  /// Throws Error{client_timeout} when the endpoint does not answer.
  virtual ChatResponse complete(const ChatRequest& request) const = 0;
  virtual std::string name() const = 0;
};

/// Pattern -> response table matched against the concatenated request text.
///
/// The first rule whose ECMAScript pattern is found wins. Responses may use
/// $1..$9 for capture groups, $HASH_LETTER for a letter derived from the
/// prompt hash over the options shown, and the whole-response directives
/// $TIMEOUT (throw Error{client_timeout}) and $EMPTY.
class MockChatClient final : public ChatClient {
 public:
  explicit MockChatClient(std::vector<std::pair<std::string, std::string>> rules = default_rules());

  ChatResponse complete(const ChatRequest& request) const override;
  std::string name() const override { return "mock"; }

  static std::vector<std::pair<std::string, std::string>> default_rules();
  /// [{"pattern": ..., "response": ...}, ...]
  static MockChatClient from_json(const nlohmann::json& j);

 private:
  struct Rule {
    std::regex pattern;
    std::string response;
  };
  std::vector<Rule> rules_;
};

/// Chat-completion style HTTP endpoint.
class HttpChatClient final : public ChatClient {
 public:
  HttpChatClient(std::string url, std::string token, std::string model, double timeout_seconds = 60.0);
  ChatResponse complete(const ChatRequest& request) const override;
  std::string name() const override { return "http:" + url_; }

 private:
  std::string url_;
  std::string token_;
  std::string model_;
  double timeout_;
};

/// PROVMIND_CHAT_URL, PROVMIND_CHAT_TOKEN, PROVMIND_CHAT_MODEL; null when no
/// URL is set.
std::unique_ptr<ChatClient> make_chat_client_from_env();

}  // namespace provmind
