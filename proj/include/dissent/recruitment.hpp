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
#include <string>
#include <string_view>
#include <vector>

#include "dissent/answering.hpp"
#include "dissent/tools.hpp"
#include "dissent/transcript.hpp"

namespace dissent {

struct ValidatedPlan {
  ToolPlan plan;
  std::vector<std::string> warnings;
};

// Structural validation of a recruiter reply against the registry:
//  - the first balanced {...} in the text is the document
//  - "experts" must be a list; unknown tool names are dropped
//  - "inputs.<tool>" supplies disagreement/justification/arguments
//  - arguments to input-less tools are discarded
//  - repeated experts merge into one invocation
// Throws Error(kNotAStructuredDocument) or Error(kMissingExpertsKey).
ValidatedPlan validate_tool_plan(std::string_view raw_document, const ToolRegistry& registry);

struct DisagreementReport {
  bool unanimous = false;
  std::size_t group_count = 0;
  std::optional<ToolPlan> plan;  // absent on the unanimous fast path
};

std::string render_recruit_prompt(std::string_view recruit_template,
                                  std::string_view initial_template,
                                  const GroupedSolutions& grouped, const ToolRegistry& registry,
                                  std::string_view question);

struct RecruitSettings {
  std::string recruit_template;
  std::string initial_template;
  int reprompt_budget = 1;
};

// Unanimous groupings return immediately without contacting the recruiter.
// A reply that never validates yields an empty plan and a warning event.
DisagreementReport recruit_tools(CallContext& ctx, const GroupedSolutions& grouped,
                                 std::string_view question, const std::string& recruiter_endpoint,
                                 const ToolRegistry& registry, const RecruitSettings& settings);

}  // namespace dissent
