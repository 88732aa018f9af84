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

#include "dissent/agreement.hpp"

#include "dissent/error.hpp"
#include "dissent/text.hpp"

namespace dissent {

Rational AgreementScores::score(std::size_t agent) const {
  if (!defined()) throw Error(ErrorCode::kInvalidArgument, "agreement scores are undefined");
  return {row_sums.at(agent), denominator};
}

std::map<std::string, double> AgreementScores::by_agent() const {
  std::map<std::string, double> out;
  if (!defined()) return out;
  for (std::size_t i = 0; i < agent_ids.size() && i < row_sums.size(); ++i) {
    out[agent_ids[i]] = mean(i);
  }
  return out;
}

nlohmann::json AgreementScores::to_json() const {
  return {{"agents", agent_ids},
          {"matrix", matrix},
          {"row_sums", row_sums},
          {"denominator", denominator}};
}

AgreementScores aggregate_scores(const std::vector<std::vector<int>>& matrix,
                                 std::vector<std::string> agent_ids) {
  AgreementScores out;
  const std::size_t cols = matrix.empty() ? 0 : matrix.front().size();
  for (const auto& row : matrix) {
    if (row.size() != cols) throw Error(ErrorCode::kInvalidArgument, "agreement matrix is ragged");
    std::int64_t sum = 0;
    for (int bit : row) {
      if (bit != 0 && bit != 1) {
        throw Error(ErrorCode::kInvalidArgument, "agreement entries must be 0 or 1");
      }
      sum += bit;
    }
    out.row_sums.push_back(sum);
  }
  if (agent_ids.empty()) {
    for (std::size_t i = 0; i < matrix.size(); ++i) agent_ids.push_back("Agent " + std::to_string(i + 1));
  }
  out.agent_ids = std::move(agent_ids);
  out.matrix = matrix;
  out.denominator = static_cast<std::int64_t>(cols);
  return out;
}

int parse_alignment(std::string_view reply) {
  auto text = extract_json_object(reply);
  if (!text) throw Error(ErrorCode::kParseFailure, "scorer reply has no JSON object");
  auto doc = nlohmann::json::parse(*text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || !doc.contains("alignment")) {
    throw Error(ErrorCode::kParseFailure, "scorer reply lacks an \"alignment\" field");
  }
  const auto& a = doc["alignment"];
  if (a.is_string()) {
    std::string s = trim(a.get<std::string>());
    if (s == "0") return 0;
    if (s == "1") return 1;
  } else if (a.is_number_integer()) {
    auto v = a.get<std::int64_t>();
    if (v == 0 || v == 1) return static_cast<int>(v);
  } else if (a.is_boolean()) {
    return a.get<bool>() ? 1 : 0;
  }
  throw Error(ErrorCode::kParseFailure, "alignment must be \"0\" or \"1\"");
}

std::string render_scoring_agent_output(const AgentAnswer& answer) {
  return "Answer: " + answer.answer + "\nReasoning: " + answer.reasoning;
}

int score_pair(CallContext& ctx, const AgentAnswer& agent, const ExpertOutput& expert,
               const std::string& scorer_endpoint, const ScoreSettings& settings) {
  if (!expert.succeeded) {
    throw Error(ErrorCode::kInvalidArgument, "cannot score against a failed tool output");
  }
  ChatRequest req = user_request(render_template(
      settings.score_template, {{"<disagreement>", expert.disagreement_addressed},
                                {"<expert_output>", expert.evidence_text},
                                {"<agent_output>", render_scoring_agent_output(agent)}}));
  req.temperature = settings.temperature;
  const std::string actor = agent.agent_id + " x " + expert.tool_name;
  for (int attempt = 0; attempt <= settings.reprompt_budget; ++attempt) {
    ChatResponse resp = ctx.chat(Stage::kScore, actor, scorer_endpoint, req);
    try {
      return parse_alignment(resp.text);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kParseFailure) throw;
      req.messages.push_back({MessageRole::kAssistant, resp.text, std::nullopt});
      req.messages.push_back({MessageRole::kUser,
                              "Respond only with the JSON object containing \"reasoning\" and "
                              "\"alignment\" (\"0\" or \"1\").",
                              std::nullopt});
    }
  }
  ctx.warn(Stage::kScore, "ScorerParseFailure for " + actor + "; scoring as 0");
  return 0;
}

AgreementScores score_agents(CallContext& ctx, std::span<const AgentAnswer> agents,
                             std::span<const ExpertOutput> outputs,
                             const std::string& scorer_endpoint, const ScoreSettings& settings) {
  std::vector<const ExpertOutput*> usable;
  for (const auto& o : outputs) {
    if (o.succeeded) usable.push_back(&o);
  }
  std::vector<std::string> ids;
  for (const auto& a : agents) ids.push_back(a.agent_id);
  const std::size_t cols = usable.size();
  std::vector<std::vector<int>> matrix(agents.size(), std::vector<int>(cols, 0));
  fan_out(ctx, agents.size() * cols, settings.parallel, [&](std::size_t k, CallContext& sub) {
    std::size_t i = k / cols;
    std::size_t j = k % cols;
    matrix[i][j] = score_pair(sub, agents[i], *usable[j], scorer_endpoint, settings);
  });
  return aggregate_scores(matrix, std::move(ids));
}

}  // namespace dissent
