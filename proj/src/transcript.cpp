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

#include "dissent/transcript.hpp"

#include <fstream>
#include <sstream>

#include "dissent/error.hpp"
#include "dissent/text.hpp"

namespace dissent {

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kInitial: return "initial";
    case Stage::kRecruit: return "recruit";
    case Stage::kTool: return "tool";
    case Stage::kScore: return "score";
    case Stage::kDiscuss: return "discuss";
    case Stage::kAggregate: return "aggregate";
  }
  return "initial";
}

void Transcript::append(nlohmann::json event) { events_.push_back(std::move(event)); }

void Transcript::append_all(const Transcript& other) {
  events_.insert(events_.end(), other.events_.begin(), other.events_.end());
}

std::string Transcript::to_jsonl() const {
  std::string out;
  for (std::size_t i = 0; i < events_.size(); ++i) {
    nlohmann::json e = events_[i];
    e["seq"] = i;
    out += e.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
    out.push_back('\n');
  }
  return out;
}

Transcript Transcript::from_jsonl(std::string_view text) {
  Transcript t;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto e = nlohmann::json::parse(line, nullptr, false);
    if (e.is_discarded() || !e.is_object()) {
      throw Error(ErrorCode::kIo, "transcript line " + std::to_string(line_no) + " is not a JSON object");
    }
    e.erase("seq");
    t.events_.push_back(std::move(e));
  }
  return t;
}

Transcript Transcript::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read transcript '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_jsonl(ss.str());
}

void Transcript::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write transcript '" + path + "'");
  out << to_jsonl();
}

namespace {

nlohmann::json message_log(const ChatRequest& request) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : request.messages) {
    const char* role = m.role == MessageRole::kUser        ? "user"
                       : m.role == MessageRole::kAssistant ? "assistant"
                                                           : "system";
    msgs.push_back({{"role", role}, {"text", m.text}, {"image", m.image.has_value() && !m.image->empty()}});
  }
  return msgs;
}

}  // namespace

ChatResponse CallContext::chat(Stage stage, const std::string& actor,
                               const std::string& endpoint_id, const ChatRequest& request) {
  nlohmann::json event = {{"type", "call"},
                          {"question_id", question_id},
                          {"round", round},
                          {"stage", stage_name(stage)},
                          {"actor", actor},
                          {"endpoint", endpoint_id},
                          {"messages", message_log(request)}};
  try {
    ChatResponse resp = gateway.send_chat(endpoint_id, request);
    event["response"] = resp.text;
    event["prompt_tokens"] = resp.prompt_tokens;
    event["completion_tokens"] = resp.completion_tokens;
    event["approximate_usage"] = resp.approximate_usage;
    event["attempts"] = resp.attempts;
    transcript.append(std::move(event));
    return resp;
  } catch (const Error& e) {
    event["type"] = "call_error";
    event["error"] = error_code_name(e.code());
    event["message"] = e.what();
    int attempts = 1;
    if (e.code() == ErrorCode::kExhaustedRetries || e.code() == ErrorCode::kTimeout) {
      attempts = gateway.profile(endpoint_id).max_retries + 1;
    }
    event["attempts"] = attempts;
    transcript.append(std::move(event));
    throw;
  }
}

void CallContext::warn(Stage stage, const std::string& message) {
  transcript.append({{"type", "warning"},
                     {"question_id", question_id},
                     {"round", round},
                     {"stage", stage_name(stage)},
                     {"message", message}});
}

void CallContext::note(nlohmann::json event) {
  event["question_id"] = question_id;
  if (!event.contains("round")) event["round"] = round;
  transcript.append(std::move(event));
}

std::map<std::string, std::vector<MockEntry>> replay_scripts(const Transcript& transcript) {
  std::map<std::string, std::vector<MockEntry>> scripts;
  for (const auto& e : transcript.events()) {
    const std::string type = e.value("type", "");
    if (type != "call" && type != "call_error") continue;
    auto& script = scripts[e.at("endpoint").get<std::string>()];
    int attempts = e.value("attempts", 1);
    if (type == "call") {
      for (int i = 1; i < attempts; ++i) script.push_back(MockEntry::fail());
      MockEntry entry = MockEntry::reply(e.at("response").get<std::string>());
      if (!e.value("approximate_usage", true)) {
        entry.prompt_tokens = e.at("prompt_tokens").get<std::int64_t>();
        entry.completion_tokens = e.at("completion_tokens").get<std::int64_t>();
      }
      script.push_back(std::move(entry));
      continue;
    }
    const std::string err = e.value("error", "");
    if (err == "MalformedWireResponse") {
      script.push_back(MockEntry::malformed());
    } else if (err == "Timeout") {
      for (int i = 0; i < attempts; ++i) script.push_back(MockEntry::timeout());
    } else if (err == "ScriptExhausted") {
      // Reproduced by leaving the script empty at this point.
    } else {
      for (int i = 0; i < attempts; ++i) script.push_back(MockEntry::fail());
    }
  }
  return scripts;
}

}  // namespace dissent
