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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dissent/aggregation.hpp"
#include "dissent/agreement.hpp"
#include "dissent/answering.hpp"
#include "dissent/gateway.hpp"
#include "dissent/prompts.hpp"
#include "dissent/recruitment.hpp"
#include "dissent/tools.hpp"
#include "dissent/transcript.hpp"

namespace dissent {

struct AblationFlags {
  bool no_tools = false;       // skip recruitment, tools and scoring
  bool no_scores = false;      // run tools, skip agreement scoring
  bool majority_vote = false;  // replace the aggregator
  bool single_model = false;   // every seat uses the first answerer endpoint
  bool show_initial_answers_to_aggregator = false;
  bool unanimity_short_circuit = true;
  std::vector<std::string> withheld_tools;
  double single_model_temperature = 0.9;
  int single_model_agents = 0;  // 0 keeps the number of answerers
};

struct RepromptBudgets {
  int answer = 2;
  int recruit = 1;
  int score = 1;
  int aggregate = 1;
};

struct PipelineConfig {
  std::vector<std::string> answerer_ids;
  std::string recruiter_id;
  std::string scorer_id;
  std::string aggregator_id;
  int rounds = 1;
  AblationFlags ablations;
  std::uint64_t run_seed = 0;
  PromptSet prompts = PromptSet::defaults();
  RepromptBudgets budgets;
  double scorer_temperature = 0.1;
  bool parallel_calls = false;
  // Replace a seat whose endpoint fails with a "no answer" entry instead of
  // aborting the question.
  bool substitute_failed_agents = false;
};

struct Question {
  std::string id;
  std::string text;
  ImagePayload image;
};

struct RoundState {
  int round_index = 0;
  GroupedSolutions grouped;
  std::vector<ExpertOutput> expert_outputs;  // accumulated evidence
  AgreementScores scores;                    // sentinel when undefined
  std::vector<AgentAnswer> per_agent;
  std::optional<ToolPlan> plan;
  bool skipped = false;  // carried over after the unanimity short-circuit
};

struct PipelineResult {
  std::string question_id;
  std::vector<RoundState> rounds;  // rounds[0] is the initial state
  FinalAnswer final_answer;
  std::vector<ToolPlan> tool_calls;
  Transcript transcript;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  const RoundState& final_round() const { return rounds.back(); }
  int discussion_rounds() const { return static_cast<int>(rounds.size()) - 1; }
};

std::vector<AgentSeat> make_seats(const PipelineConfig& config);

std::string render_discussion_prompt(std::string_view discuss_template,
                                     const GroupedSolutions& grouped,
                                     std::span<const ExpertOutput> outputs,
                                     const AgreementScores& scores);

// Each seat continues its own conversation with the discussion prompt.
// `histories` grows by the prompt and the accepted reply.
std::vector<AgentAnswer> run_discussion_round(CallContext& ctx, const RoundState& state,
                                              std::span<const AgentSeat> seats,
                                              std::vector<std::vector<ChatMessage>>& histories,
                                              std::string_view discuss_template,
                                              int reprompt_budget, bool parallel = false,
                                              bool substitute_failed = false);

// Throws Error(kAbortedRun) when a model the pipeline depends on cannot be
// reached. Tool failures never abort.
PipelineResult run_pipeline(Gateway& gateway, const ToolRegistry& registry,
                            const PipelineConfig& config, const Question& question);

// Static checks on a pipeline against a gateway and registry. Throws
// Error(kConfig) naming the field.
void validate_pipeline(const PipelineConfig& config, const Gateway& gateway,
                       const ToolRegistry& registry);

}  // namespace dissent
