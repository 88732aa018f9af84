/* Copyright 2026 The Dissent Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace dissent {

enum class RoleHint { kAnswerer, kRecruiter, kScorer, kTool, kAggregator };
enum class Transport { kHttp, kMock };

std::string_view role_hint_name(RoleHint role);
RoleHint parse_role_hint(std::string_view name);

struct EndpointProfile {
  std::string endpoint_id;
  std::string base_url;
  std::string model_name;
  double temperature = 0.7;
  int max_retries = 2;
  std::chrono::milliseconds timeout{60000};
  RoleHint role_hint = RoleHint::kAnswerer;
  Transport transport = Transport::kMock;
  std::string api_key;  // sent as a bearer token when non-empty
  int max_in_flight = 4;
  std::chrono::milliseconds backoff_base{250};

  // Throws Error(kInvalidArgument) naming the offending field.
  void validate() const;
};

enum class MessageRole { kSystem, kUser, kAssistant };

struct ImagePayload {
  std::vector<std::uint8_t> bytes;
  std::string media_type = "image/png";
  std::string url;  // alternate to inline bytes

  bool empty() const { return bytes.empty() && url.empty(); }
  std::string wire_url() const;
};

ImagePayload load_image(const std::string& path);

struct ChatMessage {
  MessageRole role = MessageRole::kUser;
  std::string text;
  std::optional<ImagePayload> image;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  std::optional<double> temperature;  // overrides the profile when set

  void validate() const;
  const std::string& last_user_text() const;
};

ChatRequest user_request(std::string text, std::optional<ImagePayload> image = std::nullopt);

struct ChatResponse {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool approximate_usage = false;
  std::chrono::milliseconds latency{0};
  int attempts = 1;
};

// Chat-completions wire format.
nlohmann::json build_wire_request(const EndpointProfile& profile, const ChatRequest& request);
ChatResponse parse_wire_response(std::string_view body, const ChatRequest& request);

// One attempt against one endpoint. Throws TransientError for retryable
// failures and Error for everything else.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse complete(const EndpointProfile& profile, const ChatRequest& request) = 0;
};

std::unique_ptr<ChatBackend> make_http_backend();

struct MockEntry {
  enum class Kind { kReply, kFail, kTimeout, kMalformed };
  Kind kind = Kind::kReply;
  std::string text;
  std::optional<std::int64_t> prompt_tokens;
  std::optional<std::int64_t> completion_tokens;

  static MockEntry reply(std::string text) { return {Kind::kReply, std::move(text), {}, {}}; }
  static MockEntry fail() { return {Kind::kFail, {}, {}, {}}; }
  static MockEntry timeout() { return {Kind::kTimeout, {}, {}, {}}; }
  static MockEntry malformed() { return {Kind::kMalformed, {}, {}, {}}; }
};

// Fallback for mocks once their script is spent: the first rule whose
// `match` occurs in the last user message answers. An empty match always
// applies.
struct MockRule {
  std::string match;
  std::string reply;
};

class MockBackend : public ChatBackend {
 public:
  ChatResponse complete(const EndpointProfile& profile, const ChatRequest& request) override;

  void set_script(std::vector<MockEntry> script);
  void set_rules(std::vector<MockRule> rules);
  std::size_t remaining() const;
  std::size_t calls() const;

 private:
  mutable std::mutex mu_;
  std::deque<MockEntry> script_;
  std::vector<MockRule> rules_;
  std::size_t calls_ = 0;
};

struct UsageRecord {
  std::string endpoint_id;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool approximate = false;
  int attempts = 1;
};

class TokenLedger {
 public:
  void record(UsageRecord rec);
  std::vector<UsageRecord> records() const;
  std::int64_t total_tokens() const;
  std::int64_t total_prompt_tokens() const;
  std::int64_t total_completion_tokens() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<UsageRecord> records_;
};

class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit Gateway(std::uint64_t jitter_seed = 0);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  // Mock profiles get a MockBackend, http profiles the HTTP backend.
  void add_endpoint(EndpointProfile profile);
  void add_endpoint(EndpointProfile profile, std::unique_ptr<ChatBackend> backend);

  void register_mock_script(const std::string& endpoint_id, std::vector<MockEntry> script);
  void register_mock_rules(const std::string& endpoint_id, std::vector<MockRule> rules);
  MockBackend& mock(const std::string& endpoint_id);

  bool has_endpoint(const std::string& endpoint_id) const;
  const EndpointProfile& profile(const std::string& endpoint_id) const;
  std::vector<std::string> endpoint_ids() const;

  // Retries transient failures up to max_retries with exponential backoff
  // (base from the profile, factor 2, jitter +-20%).
  ChatResponse send_chat(const std::string& endpoint_id, const ChatRequest& request);

  void set_sleeper(Sleeper sleeper);
  TokenLedger& ledger() { return ledger_; }

  // Delay before retry number `retry` (0-based), jitter included.
  std::chrono::milliseconds backoff_delay(const EndpointProfile& profile, int retry);

 private:
  struct Slot;
  Slot& slot(const std::string& endpoint_id) const;

  std::map<std::string, std::unique_ptr<Slot>> slots_;
  Sleeper sleeper_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
  TokenLedger ledger_;
};

}  // namespace dissent
