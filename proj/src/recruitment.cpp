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

#include "dissent/recruitment.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "dissent/error.hpp"
#include "dissent/text.hpp"

namespace dissent {

namespace {

std::string as_text(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return {};
  return v.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

const nlohmann::json* find_inputs(const nlohmann::json& inputs, const std::string& name,
                                  const std::string& raw_name) {
  if (!inputs.is_object()) return nullptr;
  auto it = inputs.find(raw_name);
  if (it != inputs.end()) return &*it;
  it = inputs.find(name);
  if (it != inputs.end()) return &*it;
  for (auto kv = inputs.begin(); kv != inputs.end(); ++kv) {
    if (to_lower(trim(kv.key())) == name) return &kv.value();
  }
  return nullptr;
}

}  // namespace

ValidatedPlan validate_tool_plan(std::string_view raw_document, const ToolRegistry& registry) {
  auto object_text = extract_json_object(raw_document);
  if (!object_text) {
    throw Error(ErrorCode::kNotAStructuredDocument, "recruiter reply contains no JSON object");
  }
  nlohmann::json doc = nlohmann::json::parse(*object_text, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw Error(ErrorCode::kNotAStructuredDocument, "recruiter reply is not valid JSON");
  }
  auto experts = doc.find("experts");
  if (experts == doc.end() || !experts->is_array()) {
    throw Error(ErrorCode::kMissingExpertsKey, "recruiter document has no \"experts\" list");
  }

  ValidatedPlan out;
  nlohmann::json inputs = doc.value("inputs", nlohmann::json::object());
  if (!inputs.is_object()) {
    out.warnings.push_back("\"inputs\" is not an object; ignoring it");
    inputs = nlohmann::json::object();
  }

  for (const auto& entry : *experts) {
    if (!entry.is_string()) {
      out.warnings.push_back("ignoring non-string expert entry " + as_text(entry));
      continue;
    }
    const std::string raw_name = entry.get<std::string>();
    const std::string name = to_lower(trim(raw_name));
    if (!registry.contains(name)) {
      out.warnings.push_back("dropping unknown tool '" + raw_name + "'");
      continue;
    }
    const ToolDescriptor& tool = registry.get(name);

    ToolInvocation inv;
    inv.tool_name = name;
    const nlohmann::json* spec = find_inputs(inputs, name, raw_name);
    if (spec == nullptr || !spec->is_object()) {
      out.warnings.push_back("tool '" + name + "' has no inputs object");
    } else {
      inv.disagreement = trim(as_text(spec->value("disagreement", nlohmann::json())));
      inv.justification = trim(as_text(spec->value("justification", nlohmann::json())));
      nlohmann::json args = spec->value("arguments", nlohmann::json::array());
      if (args.is_string()) {
        args = nlohmann::json::array({args});
      } else if (!args.is_array()) {
        if (!args.is_null()) out.warnings.push_back("tool '" + name + "': arguments is not a list");
        args = nlohmann::json::array();
      }
      for (const auto& a : args) {
        if (a.is_string()) {
          std::string s = trim(a.get<std::string>());
          if (!s.empty()) inv.arguments.push_back(std::move(s));
        } else if (a.is_number() || a.is_boolean()) {
          inv.arguments.push_back(a.dump());
        } else {
          out.warnings.push_back("tool '" + name + "': dropping non-text argument");
        }
      }
    }
    if (tool.input_kind == InputKind::kNone && !inv.arguments.empty()) {
      out.warnings.push_back("tool '" + name + "' takes no input; discarding " +
                             std::to_string(inv.arguments.size()) + " argument(s)");
      inv.arguments.clear();
    }

    auto existing = std::find_if(
        out.plan.invocations.begin(), out.plan.invocations.end(),
        [&](const ToolInvocation& other) { return other.tool_name == inv.tool_name; });
    if (existing == out.plan.invocations.end()) {
      out.plan.invocations.push_back(std::move(inv));
      continue;
    }
    out.warnings.push_back("merging repeated tool '" + name + "'");
    for (auto& a : inv.arguments) {
      if (std::find(existing->arguments.begin(), existing->arguments.end(), a) ==
          existing->arguments.end()) {
        existing->arguments.push_back(std::move(a));
      }
    }
    auto merge_text = [](std::string& into, const std::string& more) {
      if (more.empty() || into == more) return;
      into = into.empty() ? more : into + " " + more;
    };
    merge_text(existing->disagreement, inv.disagreement);
    merge_text(existing->justification, inv.justification);
  }
  return out;
}

std::string render_recruit_prompt(std::string_view recruit_template,
                                  std::string_view initial_template,
                                  const GroupedSolutions& grouped, const ToolRegistry& registry,
                                  std::string_view question) {
  std::string q(question);
  return render_template(recruit_template,
                         {{"<full initial answer generation prompt>",
                           render_initial_prompt(initial_template, question)},
                          {"<grouped solution>", render_grouped(grouped)},
                          {"<tool_descriptions>", registry.recruiter_block()},
                          {"{}", q},
                          {"<question>", q}});
}

DisagreementReport recruit_tools(CallContext& ctx, const GroupedSolutions& grouped,
                                 std::string_view question, const std::string& recruiter_endpoint,
                                 const ToolRegistry& registry, const RecruitSettings& settings) {
  DisagreementReport report;
  report.group_count = grouped.groups.size();
  report.unanimous = grouped.groups.size() == 1;
  if (report.unanimous) {
    ctx.note({{"type", "plan"}, {"stage", "recruit"}, {"unanimous", true},
              {"group_count", report.group_count}, {"invocations", nlohmann::json::array()}});
    return report;
  }

  ChatRequest req = user_request(render_recruit_prompt(settings.recruit_template,
                                                       settings.initial_template, grouped,
                                                       registry, question));
  std::optional<ValidatedPlan> validated;
  for (int attempt = 0; attempt <= settings.reprompt_budget; ++attempt) {
    ChatResponse resp = ctx.chat(Stage::kRecruit, "recruiter", recruiter_endpoint, req);
    try {
      validated = validate_tool_plan(resp.text, registry);
      break;
    } catch (const Error& e) {
      ctx.warn(Stage::kRecruit, std::string("recruiter reply rejected: ") + e.what());
      req.messages.push_back({MessageRole::kAssistant, resp.text, std::nullopt});
      req.messages.push_back({MessageRole::kUser,
                              "Your previous response was not a JSON document in the required "
                              "format. Output only the JSON with \"experts\" and \"inputs\".",
                              std::nullopt});
    }
  }
  if (!validated) {
    ctx.warn(Stage::kRecruit, "RecruiterParseFailure: continuing without tools");
    validated = ValidatedPlan{};
  }
  for (const auto& w : validated->warnings) ctx.warn(Stage::kRecruit, w);
  report.plan = std::move(validated->plan);
  ctx.note({{"type", "plan"}, {"stage", "recruit"}, {"unanimous", false},
            {"group_count", report.group_count}, {"invocations", plan_to_json(*report.plan)}});
  return report;
}

}  // namespace dissent
