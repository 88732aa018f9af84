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
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissent/answering.hpp"
#include "dissent/tools.hpp"
#include "dissent/transcript.hpp"

namespace dissent {

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  // Cross-multiplied, so 1/2 == 2/4.
  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num * b.den == b.num * a.den;
  }
};

// s_ij bits for agents (rows) against successful expert outputs (columns),
// with per-agent means S_i = row_sum / denominator kept exact.
// A zero denominator is the no-score sentinel: no evidence, no S_i.
struct AgreementScores {
  std::vector<std::string> agent_ids;
  std::vector<std::vector<int>> matrix;
  std::vector<std::int64_t> row_sums;
  std::int64_t denominator = 0;

  bool defined() const { return denominator > 0; }
  Rational score(std::size_t agent) const;
  double mean(std::size_t agent) const { return score(agent).value(); }
  // Empty for the sentinel, so prompts simply omit the scores.
  std::map<std::string, double> by_agent() const;
  nlohmann::json to_json() const;
};

// Requires a rectangular 0/1 matrix; throws Error(kInvalidArgument)
// otherwise. Zero columns produce the sentinel.
AgreementScores aggregate_scores(const std::vector<std::vector<int>>& matrix,
                                 std::vector<std::string> agent_ids = {});

// Reads {"reasoning": ..., "alignment": "0"|"1"} from a scorer reply.
// Throws Error(kParseFailure).
int parse_alignment(std::string_view reply);

std::string render_scoring_agent_output(const AgentAnswer& answer);

struct ScoreSettings {
  std::string score_template;
  int reprompt_budget = 1;
  double temperature = 0.1;
  bool parallel = false;
};

// One binary judgment. Unparseable replies after the reprompt budget count
// as 0 and are logged.
int score_pair(CallContext& ctx, const AgentAnswer& agent, const ExpertOutput& expert,
               const std::string& scorer_endpoint, const ScoreSettings& settings);

// Scores every agent against every successful output, row-major.
AgreementScores score_agents(CallContext& ctx, std::span<const AgentAnswer> agents,
                             std::span<const ExpertOutput> outputs,
                             const std::string& scorer_endpoint, const ScoreSettings& settings);

}  // namespace dissent
