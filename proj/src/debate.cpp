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

#include "dissent/debate.hpp"

#include <algorithm>

#include "dissent/error.hpp"
#include "dissent/text.hpp"

namespace dissent {

namespace {

nlohmann::json grouping_json(const GroupedSolutions& g) {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& grp : g.groups) {
    groups.push_back({{"answer", grp.canonical_answer},
                      {"count", grp.supporter_count()},
                      {"supporters", grp.supporters},
                      {"confidences", grp.confidences}});
  }
  return groups;
}

nlohmann::json answers_json(std::span<const AgentAnswer> answers) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& a : answers) {
    out.push_back({{"agent", a.agent_id},
                   {"answer", a.answer},
                   {"confidence", a.confidence},
                   {"fallback", a.parse_fallback_used}});
  }
  return out;
}

std::string evidence_key(const ExpertOutput& o) {
  std::string key = o.tool_name;
  for (const auto& a : o.arguments) key += '\x1f' + normalize_answer(a);
  return key;
}

// Union by (tool, arguments). Earlier evidence stays; a success replaces an
// earlier failure of the same call.
void merge_evidence(std::vector<ExpertOutput>& into, std::vector<ExpertOutput> fresh) {
  for (auto& o : fresh) {
    auto it = std::find_if(into.begin(), into.end(), [&](const ExpertOutput& e) {
      return evidence_key(e) == evidence_key(o);
    });
    if (it == into.end()) {
      into.push_back(std::move(o));
    } else if (!it->succeeded && o.succeeded) {
      *it = std::move(o);
    }
  }
}

bool has_evidence(std::span<const ExpertOutput> outputs) {
  return std::any_of(outputs.begin(), outputs.end(),
                     [](const ExpertOutput& o) { return o.succeeded; });
}

}  // namespace

std::vector<AgentSeat> make_seats(const PipelineConfig& config) {
  std::vector<AgentSeat> seats;
  if (config.ablations.single_model) {
    int n = config.ablations.single_model_agents > 0
                ? config.ablations.single_model_agents
                : static_cast<int>(config.answerer_ids.size());
    for (int i = 0; i < n; ++i) {
      seats.push_back({"Agent " + std::to_string(i + 1), config.answerer_ids.at(0),
                       config.ablations.single_model_temperature});
    }
    return seats;
  }
  for (std::size_t i = 0; i < config.answerer_ids.size(); ++i) {
    seats.push_back({"Agent " + std::to_string(i + 1), config.answerer_ids[i], std::nullopt});
  }
  return seats;
}

std::string render_discussion_prompt(std::string_view discuss_template,
                                     const GroupedSolutions& grouped,
                                     std::span<const ExpertOutput> outputs,
                                     const AgreementScores& scores) {
  return render_template(discuss_template,
                         {{"<grouped_solutions>", render_grouped(grouped, scores.by_agent())},
                          {"<tool_outputs>", render_evidence(outputs)}});
}

std::vector<AgentAnswer> run_discussion_round(CallContext& ctx, const RoundState& state,
                                              std::span<const AgentSeat> seats,
                                              std::vector<std::vector<ChatMessage>>& histories,
                                              std::string_view discuss_template,
                                              int reprompt_budget, bool parallel,
                                              bool substitute_failed) {
  if (state.grouped.groups.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "discussion needs a grouping");
  }
  if (histories.size() != seats.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one conversation history per seat is required");
  }
  std::string prompt = render_discussion_prompt(discuss_template, state.grouped,
                                                state.expert_outputs, state.scores);
  std::vector<AgentAnswer> out(seats.size());
  fan_out(ctx, seats.size(), parallel, [&](std::size_t i, CallContext& sub) {
    histories[i].push_back({MessageRole::kUser, prompt, std::nullopt});
    out[i] = ask_seat(sub, Stage::kDiscuss, seats[i], histories[i], reprompt_budget,
                      substitute_failed);
  });
  return out;
}

void validate_pipeline(const PipelineConfig& config, const Gateway& gateway,
                       const ToolRegistry& registry) {
  auto bad = [](const std::string& field, const std::string& why) {
    throw Error(ErrorCode::kConfig, field + ": " + why);
  };
  if (config.answerer_ids.empty()) bad("answerers", "at least one answerer is required");
  for (std::size_t i = 0; i < config.answerer_ids.size(); ++i) {
    if (!gateway.has_endpoint(config.answerer_ids[i])) {
      bad("answerers[" + std::to_string(i) + "]",
          "unknown endpoint id '" + config.answerer_ids[i] + "'");
    }
  }
  auto need = [&](const std::string& field, const std::string& id) {
    if (id.empty()) bad(field, "endpoint id is required");
    if (!gateway.has_endpoint(id)) bad(field, "unknown endpoint id '" + id + "'");
  };
  need("recruiter", config.recruiter_id);
  need("scorer", config.scorer_id);
  need("aggregator", config.aggregator_id);
  if (config.rounds < 1) bad("rounds", "must be >= 1");
  if (config.ablations.single_model_agents < 0) bad("ablations.single_model_agents", "must be >= 0");
  if (!(config.ablations.single_model_temperature >= 0.0 &&
        config.ablations.single_model_temperature <= 2.0)) {
    bad("ablations.single_model_temperature", "must lie in [0,2]");
  }
  for (const auto& w : config.ablations.withheld_tools) {
    if (!registry.contains(w)) bad("ablations.withheld_tools", "'" + w + "' is not a registered tool");
  }
  for (const auto& t : registry.tools()) {
    if (!gateway.has_endpoint(t.endpoint_id)) {
      bad("tools." + t.tool_name + ".endpoint", "unknown endpoint id '" + t.endpoint_id + "'");
    }
  }
  const auto& b = config.budgets;
  if (b.answer < 0 || b.recruit < 0 || b.score < 0 || b.aggregate < 0) {
    bad("reprompt_budgets", "budgets must be >= 0");
  }
}

PipelineResult run_pipeline(Gateway& gateway, const ToolRegistry& registry,
                            const PipelineConfig& config, const Question& question) {
  validate_pipeline(config, gateway, registry);
  const ToolRegistry tools = registry.without(config.ablations.withheld_tools);
  const AblationFlags& ab = config.ablations;
  const bool parallel = config.parallel_calls;

  PipelineResult result;
  result.question_id = question.id;
  CallContext ctx{gateway, result.transcript, question.id, 0};

  const std::vector<AgentSeat> seats = make_seats(config);
  const RecruitSettings recruit_settings{config.prompts.recruit, config.prompts.initial,
                                         config.budgets.recruit};
  const ScoreSettings score_settings{config.prompts.score, config.budgets.score,
                                     config.scorer_temperature, parallel};

  try {
    // Step 1: initial answers, grouped into G_I.
    InitialRound initial = generate_initial_answers(
        ctx, question.text, question.image, seats, config.prompts.initial, config.budgets.answer,
        parallel, config.substitute_failed_agents);
    RoundState state;
    state.round_index = 0;
    state.per_agent = initial.answers;
    state.grouped = group_solutions(state.per_agent, GroupingStage::kInitial);
    ctx.note({{"type", "grouping"}, {"stage", "initial"}, {"groups", grouping_json(state.grouped)},
              {"answers", answers_json(state.per_agent)}});
    result.rounds.push_back(state);
    const GroupedSolutions initial_grouping = state.grouped;
    auto histories = std::move(initial.histories);

    bool converged = false;
    for (int r = 1; r <= config.rounds; ++r) {
      ctx.round = r;
      RoundState next = state;
      next.round_index = r;
      next.plan.reset();

      if (converged || (ab.unanimity_short_circuit && state.grouped.unanimous())) {
        if (!converged) {
          ctx.note({{"type", "short_circuit"}, {"reason", "unanimous"}});
        }
        converged = true;
        next.skipped = true;
        result.rounds.push_back(next);
        continue;
      }

      // Steps 2 and 3: recruit tools on the current disagreement, run them,
      // score the current answers against all evidence so far.
      if (!ab.no_tools) {
        DisagreementReport report = recruit_tools(ctx, state.grouped, question.text,
                                                  config.recruiter_id, tools, recruit_settings);
        if (report.plan) {
          next.plan = report.plan;
          result.tool_calls.push_back(*report.plan);
          merge_evidence(next.expert_outputs,
                         execute_plan(ctx, tools, *report.plan, question.image, question.text,
                                      parallel));
        }
        if (!ab.no_scores && has_evidence(next.expert_outputs)) {
          next.scores = score_agents(ctx, state.per_agent, next.expert_outputs,
                                     config.scorer_id, score_settings);
          ctx.note({{"type", "scores"}, {"stage", "score"}, {"phase", "before_discussion"},
                    {"scores", next.scores.to_json()}});
        } else {
          next.scores = AgreementScores{};
        }
      }

      // Step 4: discussion, regroup into G_F and rescore to S_F.
      RoundState shown = next;
      shown.grouped = state.grouped;
      next.per_agent = run_discussion_round(ctx, shown, seats, histories, config.prompts.discuss,
                                            config.budgets.answer, parallel,
                                            config.substitute_failed_agents);
      next.grouped = group_solutions(next.per_agent, GroupingStage::kFinal);
      ctx.note({{"type", "grouping"}, {"stage", "discuss"}, {"groups", grouping_json(next.grouped)},
                {"answers", answers_json(next.per_agent)}});
      if (!ab.no_tools && !ab.no_scores && has_evidence(next.expert_outputs)) {
        next.scores = score_agents(ctx, next.per_agent, next.expert_outputs, config.scorer_id,
                                   score_settings);
        ctx.note({{"type", "scores"}, {"stage", "score"}, {"phase", "after_discussion"},
                  {"scores", next.scores.to_json()}});
      } else {
        next.scores = AgreementScores{};
      }
      result.rounds.push_back(next);
      state = std::move(next);
    }

    // Step 5: aggregation over G_F, accumulated evidence and S_F.
    ctx.round = config.rounds;
    const RoundState& last = result.rounds.back();
    if (ab.majority_vote) {
      result.final_answer =
          majority_vote(last.grouped, tie_break_seed(config.run_seed, question.id));
    } else {
      AggregateSettings agg{config.prompts.aggregate, config.budgets.aggregate,
                            tie_break_seed(config.run_seed, question.id), std::nullopt};
      if (ab.show_initial_answers_to_aggregator) agg.initial_grouping = render_grouped(initial_grouping);
      result.final_answer = aggregate(ctx, question.text, question.image, last.grouped,
                                      last.expert_outputs, last.scores, config.aggregator_id, agg);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig || e.code() == ErrorCode::kInvalidArgument) throw;
    throw Error(ErrorCode::kAbortedRun, "question '" + question.id + "' aborted: " + e.what());
  }

  const FinalAnswer& fin = result.final_answer;
  ctx.note({{"type", "final"},
            {"stage", "aggregate"},
            {"answer", fin.answer},
            {"reasoning", fin.reasoning},
            {"confidence", fin.confidence},
            {"method", aggregation_method_name(fin.method)},
            {"off_menu", fin.off_menu}});
  for (const auto& e : result.transcript.events()) {
    if (e.value("type", "") != "call") continue;
    result.prompt_tokens += e.value("prompt_tokens", std::int64_t{0});
    result.completion_tokens += e.value("completion_tokens", std::int64_t{0});
  }
  return result;
}

}  // namespace dissent
