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

#include <exception>
#include <map>
#include <string>
#include <thread>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissent/gateway.hpp"

namespace dissent {

// Stage tags carried by every transcript event.
enum class Stage { kInitial, kRecruit, kTool, kScore, kDiscuss, kAggregate };

std::string_view stage_name(Stage stage);

// Ordered event log for one question. Events are JSON objects; serialization
// is one compact object per line with sorted keys, so identical runs give
// identical bytes.
class Transcript {
 public:
  void append(nlohmann::json event);
  void append_all(const Transcript& other);

  const std::vector<nlohmann::json>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

  std::string to_jsonl() const;
  static Transcript from_jsonl(std::string_view text);
  static Transcript load(const std::string& path);
  void save(const std::string& path) const;

 private:
  std::vector<nlohmann::json> events_;
};

// Everything a pipeline stage needs to talk to models and log what it did.
struct CallContext {
  Gateway& gateway;
  Transcript& transcript;
  std::string question_id;
  int round = 0;

  // Sends the request and appends a "call" event. Gateway errors are logged
  // as a "call_error" event and rethrown.
  ChatResponse chat(Stage stage, const std::string& actor, const std::string& endpoint_id,
                    const ChatRequest& request);

  void warn(Stage stage, const std::string& message);
  void note(nlohmann::json event);
};

// Runs fn(i, sub_context) for i in [0, n), concurrently when `parallel`.
// Each index logs into its own transcript; logs are merged in index order
// afterwards, so the result does not depend on scheduling. The first
// exception by index is rethrown after the merge.
template <class Fn>
void fan_out(CallContext& ctx, std::size_t n, bool parallel, Fn&& fn) {
  std::vector<Transcript> logs(n);
  std::vector<std::exception_ptr> errors(n);
  auto run_one = [&](std::size_t i) {
    CallContext sub{ctx.gateway, logs[i], ctx.question_id, ctx.round};
    try {
      fn(i, sub);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (parallel && n > 1) {
    std::vector<std::jthread> workers;
    workers.reserve(n);
    for (std::size_t i = 0; i < n; ++i) workers.emplace_back(run_one, i);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      run_one(i);
      if (errors[i]) break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) ctx.transcript.append_all(logs[i]);
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// Per-endpoint mock scripts that reproduce every gateway call recorded in
// the transcript, including failed attempts.
std::map<std::string, std::vector<MockEntry>> replay_scripts(const Transcript& transcript);

}  // namespace dissent
