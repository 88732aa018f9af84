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
#include <string_view>

#include "dissent/agreement.hpp"
#include "dissent/answering.hpp"
#include "dissent/tools.hpp"

namespace dissent {

enum class AggregationMethod { kAggregator, kMajorityVote };

std::string_view aggregation_method_name(AggregationMethod m);

struct FinalAnswer {
  std::string answer;
  std::string reasoning;
  double confidence = 0.0;
  AggregationMethod method = AggregationMethod::kAggregator;
  // The aggregator's answer matched no group under normalization.
  bool off_menu = false;
};

std::uint64_t tie_break_seed(std::uint64_t run_seed, std::string_view question_id);

// Largest group wins; ties go to a uniform pick driven by `seed`.
// Confidence is supporter_count / total agents.
FinalAnswer majority_vote(const GroupedSolutions& grouped, std::uint64_t seed);

struct AggregateSettings {
  std::string aggregate_template;
  int reprompt_budget = 1;
  std::uint64_t tie_seed = 0;
  // Rendered G_I appended for the show-initial-answers ablation.
  std::optional<std::string> initial_grouping;
};

FinalAnswer aggregate(CallContext& ctx, std::string_view question, const ImagePayload& image,
                      const GroupedSolutions& grouped_final, std::span<const ExpertOutput> outputs,
                      const AgreementScores& scores, const std::string& aggregator_endpoint,
                      const AggregateSettings& settings);

}  // namespace dissent
