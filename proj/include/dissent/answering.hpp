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

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dissent/gateway.hpp"
#include "dissent/transcript.hpp"

namespace dissent {

struct AgentAnswer {
  std::string agent_id;
  std::string answer;
  std::string reasoning;
  double confidence = 0.5;
  std::string raw_text;
  bool parse_fallback_used = false;
};

struct ParsedOutput {
  std::string answer;
  std::string reasoning;
  double confidence = 0.5;
  bool confidence_found = false;
};

// Extracts the Answer/Reasoning/Confidence blocks in any order, labels
// matched case-insensitively at line starts. Confidence is clamped to
// [0,1]; a trailing '%' divides by 100. Throws Error(kParseFailure) when
// there is no non-empty "Answer:" block.
ParsedOutput parse_agent_output(std::string_view text);

// Inverse of parse_agent_output for well-formed fields.
std::string render_agent_output(const AgentAnswer& answer);

// Fallback for output that never parsed: first non-empty line as answer,
// whole text as reasoning, confidence 0.5.
AgentAnswer fallback_answer(std::string agent_id, std::string raw_text);

enum class GroupingStage { kInitial, kFinal };

struct SolutionGroup {
  std::string canonical_answer;
  std::vector<std::string> supporters;
  std::vector<std::string> reasonings;
  std::vector<double> confidences;

  std::size_t supporter_count() const { return supporters.size(); }
};

struct GroupedSolutions {
  std::vector<SolutionGroup> groups;
  GroupingStage stage = GroupingStage::kInitial;

  std::size_t agent_count() const;
  bool unanimous() const { return groups.size() == 1; }
  // Index of the group whose canonical answer equals normalize_answer(a).
  std::optional<std::size_t> find(std::string_view answer) const;
};

// Buckets answers by normalize_answer, groups in first-appearance order.
GroupedSolutions group_solutions(std::span<const AgentAnswer> answers, GroupingStage stage);

// One block per group:
//   Answer: X (N agents) — Reasoning: [Agent 1] ...; Confidence: [Agent 1] self-confidence 0.9
// `agreement` maps agent ids to expert-agreement scores; agents missing from
// it are rendered without one.
std::string render_grouped(const GroupedSolutions& grouped,
                           const std::map<std::string, double>& agreement = {});

// An answering agent: a named seat backed by an endpoint. The same endpoint
// may back several seats.
struct AgentSeat {
  std::string agent_id;
  std::string endpoint_id;
  std::optional<double> temperature;
};

// Sends `request`, reprompting up to `reprompt_budget` times while the reply
// does not parse, then falls back. On success `history` gains the accepted
// assistant turn.
AgentAnswer ask_formatted(CallContext& ctx, Stage stage, const AgentSeat& seat,
                          std::vector<ChatMessage>& history, int reprompt_budget);

std::string render_initial_prompt(std::string_view tmpl, std::string_view question);

struct InitialRound {
  std::vector<AgentAnswer> answers;
  // Per-agent conversation so far (initial prompt + accepted reply).
  std::vector<std::vector<ChatMessage>> histories;
};

InitialRound generate_initial_answers(CallContext& ctx, std::string_view question,
                                      const ImagePayload& image, std::span<const AgentSeat> agents,
                                      std::string_view initial_template, int reprompt_budget = 2,
                                      bool parallel = false, bool substitute_failed = false);

// ask_formatted, but a gateway failure becomes a "no answer" fallback entry
// (and a warning) when `substitute_failed` is set.
AgentAnswer ask_seat(CallContext& ctx, Stage stage, const AgentSeat& seat,
                     std::vector<ChatMessage>& history, int reprompt_budget,
                     bool substitute_failed);

}  // namespace dissent
