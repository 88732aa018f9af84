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

#include "dissent/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <thread>

#include <httplib.h>

#include "dissent/error.hpp"
#include "dissent/text.hpp"

namespace dissent {

std::string_view role_hint_name(RoleHint role) {
  switch (role) {
    case RoleHint::kAnswerer: return "answerer";
    case RoleHint::kRecruiter: return "recruiter";
    case RoleHint::kScorer: return "scorer";
    case RoleHint::kTool: return "tool";
    case RoleHint::kAggregator: return "aggregator";
  }
  return "answerer";
}

RoleHint parse_role_hint(std::string_view name) {
  if (name == "answerer") return RoleHint::kAnswerer;
  if (name == "recruiter") return RoleHint::kRecruiter;
  if (name == "scorer") return RoleHint::kScorer;
  if (name == "tool") return RoleHint::kTool;
  if (name == "aggregator") return RoleHint::kAggregator;
  throw Error(ErrorCode::kInvalidArgument, "unknown role hint '" + std::string(name) + "'");
}

void EndpointProfile::validate() const {
  auto bad = [&](const std::string& what) {
    throw Error(ErrorCode::kInvalidArgument, "endpoint '" + endpoint_id + "': " + what);
  };
  if (endpoint_id.empty()) bad("endpoint_id must be non-empty");
  if (!(temperature >= 0.0 && temperature <= 2.0)) bad("temperature must lie in [0,2]");
  if (max_retries < 0) bad("max_retries must be >= 0");
  if (timeout.count() <= 0) bad("timeout must be > 0");
  if (max_in_flight < 1) bad("max_in_flight must be >= 1");
  if (backoff_base.count() < 0) bad("backoff_base must be >= 0");
  if (transport == Transport::kHttp && base_url.empty()) bad("http endpoints need base_url");
}

std::string ImagePayload::wire_url() const {
  if (!url.empty()) return url;
  return "data:" + media_type + ";base64," + base64_encode(bytes);
}

ImagePayload load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read image '" + path + "'");
  ImagePayload img;
  img.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  std::string ext = to_lower(std::filesystem::path(path).extension().string());
  if (ext == ".jpg" || ext == ".jpeg") {
    img.media_type = "image/jpeg";
  } else if (ext == ".gif") {
    img.media_type = "image/gif";
  } else if (ext == ".webp") {
    img.media_type = "image/webp";
  } else {
    img.media_type = "image/png";
  }
  return img;
}

void ChatRequest::validate() const {
  bool has_user = false;
  for (const auto& m : messages) {
    if (m.role == MessageRole::kUser) has_user = true;
    if (m.image && m.role != MessageRole::kUser) {
      throw Error(ErrorCode::kInvalidArgument, "image payloads are only allowed on user messages");
    }
  }
  if (!has_user) throw Error(ErrorCode::kInvalidArgument, "chat request needs a user message");
  if (temperature && !(*temperature >= 0.0 && *temperature <= 2.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature override must lie in [0,2]");
  }
}

const std::string& ChatRequest::last_user_text() const {
  static const std::string kEmpty;
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == MessageRole::kUser) return it->text;
  }
  return kEmpty;
}

ChatRequest user_request(std::string text, std::optional<ImagePayload> image) {
  ChatRequest req;
  req.messages.push_back({MessageRole::kUser, std::move(text), std::move(image)});
  return req;
}

namespace {

const char* wire_role(MessageRole r) {
  switch (r) {
    case MessageRole::kSystem: return "system";
    case MessageRole::kUser: return "user";
    case MessageRole::kAssistant: return "assistant";
  }
  return "user";
}

std::int64_t approx_prompt_tokens(const ChatRequest& request) {
  std::int64_t n = 0;
  for (const auto& m : request.messages) n += static_cast<std::int64_t>(whitespace_token_count(m.text));
  return n;
}

}  // namespace

nlohmann::json build_wire_request(const EndpointProfile& profile, const ChatRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    nlohmann::json msg;
    msg["role"] = wire_role(m.role);
    if (m.image && !m.image->empty()) {
      msg["content"] = nlohmann::json::array(
          {{{"type", "text"}, {"text", m.text}},
           {{"type", "image_url"}, {"image_url", {{"url", m.image->wire_url()}}}}});
    } else {
      msg["content"] = m.text;
    }
    messages.push_back(std::move(msg));
  }
  return {{"model", profile.model_name},
          {"messages", std::move(messages)},
          {"temperature", request.temperature.value_or(profile.temperature)}};
}

ChatResponse parse_wire_response(std::string_view body, const ChatRequest& request) {
  nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
  auto malformed = [](const std::string& why) {
    return Error(ErrorCode::kMalformedWireResponse, "malformed chat response: " + why);
  };
  if (doc.is_discarded() || !doc.is_object()) throw malformed("body is not a JSON object");
  auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw malformed("missing choices[0]");
  }
  const auto& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") || !first["message"].is_object()) {
    throw malformed("missing choices[0].message");
  }
  const auto& content = first["message"].value("content", nlohmann::json());
  ChatResponse resp;
  if (content.is_string()) {
    resp.text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content) {
      if (part.is_object() && part.value("type", "") == "text" && part.contains("text") &&
          part["text"].is_string()) {
        resp.text += part["text"].get<std::string>();
      }
    }
  } else if (!content.is_null()) {
    throw malformed("choices[0].message.content has unexpected type");
  }
  auto usage = doc.find("usage");
  bool have_usage = usage != doc.end() && usage->is_object() &&
                    usage->contains("prompt_tokens") && usage->contains("completion_tokens") &&
                    (*usage)["prompt_tokens"].is_number_integer() &&
                    (*usage)["completion_tokens"].is_number_integer();
  if (have_usage) {
    resp.prompt_tokens = std::max<std::int64_t>(0, (*usage)["prompt_tokens"].get<std::int64_t>());
    resp.completion_tokens =
        std::max<std::int64_t>(0, (*usage)["completion_tokens"].get<std::int64_t>());
  } else {
    resp.prompt_tokens = approx_prompt_tokens(request);
    resp.completion_tokens = static_cast<std::int64_t>(whitespace_token_count(resp.text));
    resp.approximate_usage = true;
  }
  return resp;
}

namespace {

class HttpBackend : public ChatBackend {
 public:
  ChatResponse complete(const EndpointProfile& profile, const ChatRequest& request) override {
    auto [origin, path] = split_url(profile.base_url);
    httplib::Client client(origin);
    auto secs = std::chrono::duration_cast<std::chrono::seconds>(profile.timeout);
    auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(profile.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers;
    if (!profile.api_key.empty()) headers.emplace("Authorization", "Bearer " + profile.api_key);

    std::string body = build_wire_request(profile, request).dump();
    auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path, headers, body, "application/json");
    auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
    if (!res) {
      auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::Write ||
          err == httplib::Error::ConnectionTimeout) {
        throw TransientError(ErrorCode::kTimeout,
                             profile.endpoint_id + ": " + httplib::to_string(err));
      }
      throw TransientError(ErrorCode::kTransport,
                           profile.endpoint_id + ": " + httplib::to_string(err));
    }
    if (res->status == 429 || res->status >= 500) {
      throw TransientError(ErrorCode::kTransport,
                           profile.endpoint_id + ": HTTP " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
      throw Error(ErrorCode::kTransport,
                  profile.endpoint_id + ": HTTP " + std::to_string(res->status));
    }
    ChatResponse out = parse_wire_response(res->body, request);
    out.latency = latency;
    return out;
  }

 private:
  static std::pair<std::string, std::string> split_url(const std::string& url) {
    std::size_t scheme = url.find("://");
    std::size_t path_at = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    std::string origin = path_at == std::string::npos ? url : url.substr(0, path_at);
    std::string path = path_at == std::string::npos ? "" : url.substr(path_at);
    while (!path.empty() && path.back() == '/') path.pop_back();
    const std::string suffix = "/chat/completions";
    if (path.size() < suffix.size() ||
        path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
      path += suffix;
    }
    return {origin, path};
  }
};

class CountingGate {
 public:
  explicit CountingGate(int limit) : free_(limit) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return free_ > 0; });
    --free_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++free_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int free_;
};

}  // namespace

std::unique_ptr<ChatBackend> make_http_backend() { return std::make_unique<HttpBackend>(); }

ChatResponse MockBackend::complete(const EndpointProfile& profile, const ChatRequest& request) {
  MockEntry entry;
  {
    std::lock_guard lock(mu_);
    ++calls_;
    if (!script_.empty()) {
      entry = std::move(script_.front());
      script_.pop_front();
    } else {
      const std::string& prompt = request.last_user_text();
      auto rule = std::find_if(rules_.begin(), rules_.end(), [&](const MockRule& r) {
        return r.match.empty() || prompt.find(r.match) != std::string::npos;
      });
      if (rule == rules_.end()) {
        throw Error(ErrorCode::kScriptExhausted,
                    "mock endpoint '" + profile.endpoint_id + "' has no scripted reply left");
      }
      entry = MockEntry::reply(rule->reply);
    }
  }
  switch (entry.kind) {
    case MockEntry::Kind::kFail:
      throw TransientError(ErrorCode::kTransport,
                           "mock endpoint '" + profile.endpoint_id + "': injected failure");
    case MockEntry::Kind::kTimeout:
      throw TransientError(ErrorCode::kTimeout,
                           "mock endpoint '" + profile.endpoint_id + "': injected timeout");
    case MockEntry::Kind::kMalformed:
      throw Error(ErrorCode::kMalformedWireResponse,
                  "mock endpoint '" + profile.endpoint_id + "': injected malformed body");
    case MockEntry::Kind::kReply:
      break;
  }
  ChatResponse resp;
  resp.text = std::move(entry.text);
  if (entry.prompt_tokens && entry.completion_tokens) {
    resp.prompt_tokens = *entry.prompt_tokens;
    resp.completion_tokens = *entry.completion_tokens;
  } else {
    resp.prompt_tokens = approx_prompt_tokens(request);
    resp.completion_tokens = static_cast<std::int64_t>(whitespace_token_count(resp.text));
    resp.approximate_usage = true;
  }
  return resp;
}

void MockBackend::set_script(std::vector<MockEntry> script) {
  std::lock_guard lock(mu_);
  script_.assign(std::make_move_iterator(script.begin()), std::make_move_iterator(script.end()));
}

void MockBackend::set_rules(std::vector<MockRule> rules) {
  std::lock_guard lock(mu_);
  rules_ = std::move(rules);
}

std::size_t MockBackend::remaining() const {
  std::lock_guard lock(mu_);
  return script_.size();
}

std::size_t MockBackend::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

void TokenLedger::record(UsageRecord rec) {
  std::lock_guard lock(mu_);
  records_.push_back(std::move(rec));
}

std::vector<UsageRecord> TokenLedger::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

std::int64_t TokenLedger::total_prompt_tokens() const {
  std::lock_guard lock(mu_);
  std::int64_t n = 0;
  for (const auto& r : records_) n += r.prompt_tokens;
  return n;
}

std::int64_t TokenLedger::total_completion_tokens() const {
  std::lock_guard lock(mu_);
  std::int64_t n = 0;
  for (const auto& r : records_) n += r.completion_tokens;
  return n;
}

std::int64_t TokenLedger::total_tokens() const {
  return total_prompt_tokens() + total_completion_tokens();
}

void TokenLedger::clear() {
  std::lock_guard lock(mu_);
  records_.clear();
}

struct Gateway::Slot {
  EndpointProfile profile;
  std::unique_ptr<ChatBackend> backend;
  MockBackend* mock = nullptr;
  CountingGate gate;

  Slot(EndpointProfile p, std::unique_ptr<ChatBackend> b)
      : profile(std::move(p)), backend(std::move(b)), gate(profile.max_in_flight) {}
};

Gateway::Gateway(std::uint64_t jitter_seed)
    : sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }),
      rng_(jitter_seed) {}

Gateway::~Gateway() = default;

void Gateway::add_endpoint(EndpointProfile profile) {
  std::unique_ptr<ChatBackend> backend;
  if (profile.transport == Transport::kMock) {
    backend = std::make_unique<MockBackend>();
  } else {
    backend = make_http_backend();
  }
  add_endpoint(std::move(profile), std::move(backend));
}

void Gateway::add_endpoint(EndpointProfile profile, std::unique_ptr<ChatBackend> backend) {
  profile.validate();
  if (slots_.count(profile.endpoint_id) != 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "duplicate endpoint id '" + profile.endpoint_id + "'");
  }
  std::string id = profile.endpoint_id;
  auto s = std::make_unique<Slot>(std::move(profile), std::move(backend));
  s->mock = dynamic_cast<MockBackend*>(s->backend.get());
  slots_.emplace(std::move(id), std::move(s));
}

Gateway::Slot& Gateway::slot(const std::string& endpoint_id) const {
  auto it = slots_.find(endpoint_id);
  if (it == slots_.end()) {
    throw Error(ErrorCode::kUnknownEndpoint, "unknown endpoint '" + endpoint_id + "'");
  }
  return *it->second;
}

MockBackend& Gateway::mock(const std::string& endpoint_id) {
  Slot& s = slot(endpoint_id);
  if (s.mock == nullptr) {
    throw Error(ErrorCode::kNotAMockEndpoint, "endpoint '" + endpoint_id + "' is not a mock");
  }
  return *s.mock;
}

void Gateway::register_mock_script(const std::string& endpoint_id, std::vector<MockEntry> script) {
  mock(endpoint_id).set_script(std::move(script));
}

void Gateway::register_mock_rules(const std::string& endpoint_id, std::vector<MockRule> rules) {
  mock(endpoint_id).set_rules(std::move(rules));
}

bool Gateway::has_endpoint(const std::string& endpoint_id) const {
  return slots_.count(endpoint_id) != 0;
}

const EndpointProfile& Gateway::profile(const std::string& endpoint_id) const {
  return slot(endpoint_id).profile;
}

std::vector<std::string> Gateway::endpoint_ids() const {
  std::vector<std::string> ids;
  for (const auto& kv : slots_) ids.push_back(kv.first);
  return ids;
}

void Gateway::set_sleeper(Sleeper sleeper) { sleeper_ = std::move(sleeper); }

std::chrono::milliseconds Gateway::backoff_delay(const EndpointProfile& profile, int retry) {
  double jitter;
  {
    std::lock_guard lock(rng_mu_);
    jitter = std::uniform_real_distribution<double>(-0.2, 0.2)(rng_);
  }
  double base = static_cast<double>(profile.backoff_base.count()) * std::ldexp(1.0, retry);
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(base * (1.0 + jitter))));
}

ChatResponse Gateway::send_chat(const std::string& endpoint_id, const ChatRequest& request) {
  Slot& s = slot(endpoint_id);
  request.validate();
  const EndpointProfile& profile = s.profile;

  s.gate.acquire();
  struct Release {
    Slot& s;
    ~Release() { s.gate.release(); }
  } release{s};

  ErrorCode last_code = ErrorCode::kExhaustedRetries;
  std::string last_message;
  const int attempts_allowed = profile.max_retries + 1;
  for (int attempt = 1; attempt <= attempts_allowed; ++attempt) {
    auto started = std::chrono::steady_clock::now();
    try {
      ChatResponse resp = s.backend->complete(profile, request);
      if (resp.latency.count() == 0) {
        resp.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now() - started);
      }
      resp.attempts = attempt;
      ledger_.record({endpoint_id, resp.prompt_tokens, resp.completion_tokens,
                      resp.approximate_usage, attempt});
      return resp;
    } catch (const TransientError& e) {
      last_code = e.code();
      last_message = e.what();
    }
    if (attempt < attempts_allowed) sleeper_(backoff_delay(profile, attempt - 1));
  }
  std::string msg = "endpoint '" + endpoint_id + "' failed after " +
                    std::to_string(attempts_allowed) + " attempts: " + last_message;
  if (last_code == ErrorCode::kTimeout) throw Error(ErrorCode::kTimeout, msg);
  throw Error(ErrorCode::kExhaustedRetries, msg);
}

}  // namespace dissent
