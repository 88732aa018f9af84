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

#include "dissent/aggregation.hpp"

#include <algorithm>
#include <random>
#include <vector>

#include "dissent/error.hpp"
#include "dissent/text.hpp"

namespace dissent {

std::string_view aggregation_method_name(AggregationMethod m) {
  return m == AggregationMethod::kAggregator ? "aggregator" : "majority_vote";
}

std::uint64_t tie_break_seed(std::uint64_t run_seed, std::string_view question_id) {
  return fnv1a64(question_id, run_seed * 0x9E3779B97F4A7C15ULL);
}

FinalAnswer majority_vote(const GroupedSolutions& grouped, std::uint64_t seed) {
  if (grouped.groups.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "majority vote needs at least one group");
  }
  std::size_t best = 0;
  for (const auto& g : grouped.groups) best = std::max(best, g.supporter_count());
  std::vector<std::size_t> tied;
  for (std::size_t i = 0; i < grouped.groups.size(); ++i) {
    if (grouped.groups[i].supporter_count() == best) tied.push_back(i);
  }
  std::size_t pick = tied.front();
  if (tied.size() > 1) {
    // mt19937_64 output is fully specified, unlike std distributions.
    std::mt19937_64 rng(seed);
    pick = tied[rng() % tied.size()];
  }
  const SolutionGroup& g = grouped.groups[pick];
  FinalAnswer out;
  out.answer = g.canonical_answer;
  out.confidence = static_cast<double>(g.supporter_count()) /
                   static_cast<double>(grouped.agent_count());
  out.reasoning = "Majority vote: " + std::to_string(g.supporter_count()) + " of " +
                  std::to_string(grouped.agent_count()) + " agents" +
                  (tied.size() > 1 ? " (tie broken at random)" : "");
  out.method = AggregationMethod::kMajorityVote;
  return out;
}

FinalAnswer aggregate(CallContext& ctx, std::string_view question, const ImagePayload& image,
                      const GroupedSolutions& grouped_final, std::span<const ExpertOutput> outputs,
                      const AgreementScores& scores, const std::string& aggregator_endpoint,
                      const AggregateSettings& settings) {
  if (grouped_final.groups.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "aggregation needs at least one group");
  }
  std::string grouped_text = render_grouped(grouped_final, scores.by_agent());
  if (settings.initial_grouping) {
    grouped_text += "\n\nInitial agent answers before discussion:\n" + *settings.initial_grouping;
  }
  ChatRequest req = user_request(
      render_template(settings.aggregate_template,
                      {{"<question>", std::string(question)},
                       {"<grouped_output>", grouped_text},
                       {"<tool_outputs>", render_evidence(outputs)}}),
      image.empty() ? std::nullopt : std::optional<ImagePayload>(image));

  for (int attempt = 0; attempt <= settings.reprompt_budget; ++attempt) {
    ChatResponse resp = ctx.chat(Stage::kAggregate, "aggregator", aggregator_endpoint, req);
    try {
      ParsedOutput parsed = parse_agent_output(resp.text);
      FinalAnswer out;
      out.answer = parsed.answer;
      out.reasoning = parsed.reasoning;
      out.confidence = parsed.confidence;
      out.method = AggregationMethod::kAggregator;
      out.off_menu = !grouped_final.find(parsed.answer).has_value();
      return out;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kParseFailure) throw;
      req.messages.push_back({MessageRole::kAssistant, resp.text, std::nullopt});
      req.messages.push_back({MessageRole::kUser,
                              "Your previous response did not follow the required format. "
                              "Respond again using exactly these labeled lines:\nReasoning: "
                              "[reasoning]\nAnswer: [answer]\nConfidence: [confidence]",
                              std::nullopt});
    }
  }
  ctx.warn(Stage::kAggregate, "aggregator output never parsed; falling back to majority vote");
  return majority_vote(grouped_final, settings.tie_seed);
}

}  // namespace dissent
