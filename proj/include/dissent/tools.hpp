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

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissent/gateway.hpp"
#include "dissent/transcript.hpp"

namespace dissent {

enum class InputKind { kNone, kQueryList };
enum class ToolBackendKind { kModel, kStructured };
// How structured payloads become text: grounding reports per queried label,
// detection reports every label present.
enum class StructuredStyle { kGrounding, kDetection };

struct ToolDescriptor {
  std::string tool_name;
  InputKind input_kind = InputKind::kQueryList;
  std::string input_hint;           // e.g. "objects you are trying to find"
  std::string capability_sentence;  // what the recruiter reads about the tool
  std::string recruiter_line_text;  // full prompt line; built from the fields when empty
  ToolBackendKind backend = ToolBackendKind::kModel;
  StructuredStyle style = StructuredStyle::kDetection;
  std::string endpoint_id;
  std::string prompt_template;

  std::string recruiter_line() const;
  void validate() const;
};

// The seven built-in experts in recruiter-prompt order.
const std::vector<std::string>& builtin_tool_names();
bool is_builtin_tool(std::string_view name);
// Descriptor with the built-in capability text and default template; the
// caller binds endpoint_id.
ToolDescriptor builtin_tool(std::string_view name);

class ToolRegistry {
 public:
  // Throws Error(kDuplicateToolName) unless `allow_override`.
  void register_tool(ToolDescriptor descriptor, bool allow_override = false);

  bool contains(std::string_view name) const;
  const ToolDescriptor& get(std::string_view name) const;
  const std::vector<ToolDescriptor>& tools() const { return tools_; }
  std::size_t size() const { return tools_.size(); }

  // One recruiter line per tool, registration order.
  std::string recruiter_block() const;
  ToolRegistry without(std::span<const std::string> withheld) const;

 private:
  std::vector<ToolDescriptor> tools_;
};

struct ToolInvocation {
  std::string tool_name;
  std::string disagreement;
  std::string justification;
  std::vector<std::string> arguments;
};

struct ToolPlan {
  std::vector<ToolInvocation> invocations;

  bool empty() const { return invocations.empty(); }
  std::size_t size() const { return invocations.size(); }
};

nlohmann::json plan_to_json(const ToolPlan& plan);

struct Detection {
  std::string label;
  double score = 0.0;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

// Structured-executor payload: [{"label", "score", "box": [x0,y0,x1,y1]}]
// with normalized coordinates. Throws Error(kPayloadSchemaMismatch).
std::vector<Detection> parse_detection_payload(const nlohmann::json& payload);

// Coarse position of the box center by image thirds, e.g. "top right".
std::string location_words(const Detection& d);

std::string postprocess_structured(StructuredStyle style, std::span<const std::string> queries,
                                   const nlohmann::json& payload);

struct ExpertOutput {
  std::string tool_name;
  std::vector<std::string> arguments;
  std::string disagreement_addressed;
  std::string evidence_text;
  std::optional<nlohmann::json> structured_payload;
  bool succeeded = false;
  std::string error;
};

// One output per invocation in plan order. Tool failures are recorded as
// succeeded=false rather than thrown.
std::vector<ExpertOutput> execute_plan(CallContext& ctx, const ToolRegistry& registry,
                                       const ToolPlan& plan, const ImagePayload& image,
                                       std::string_view question, bool parallel = false);

// Evidence block for discussion and aggregation prompts; failed outputs
// are left out.
std::string render_evidence(std::span<const ExpertOutput> outputs);

}  // namespace dissent
