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

#include "dissent/tools.hpp"

#include <algorithm>

#include "dissent/error.hpp"
#include "dissent/prompts.hpp"
#include "dissent/text.hpp"

namespace dissent {

namespace {

struct BuiltinSpec {
  std::string_view name;
  InputKind input;
  ToolBackendKind backend;
  StructuredStyle style;
  std::string_view hint;
  std::string_view capability;
  std::string_view line;
};

// Lines reproduce the recruiter prompt's expert list character for character.
constexpr BuiltinSpec kBuiltins[] = {
    {"spatial", InputKind::kQueryList, ToolBackendKind::kModel, StructuredStyle::kDetection,
     "objects that have confused spatial relations",
     "Has perfect understanding of spatial relations between objects. Use this when agents are "
     "unsure about the placement of items in a scene.",
     "\"spatial\" (input: list. objects that have confused spatial relations) - Has perfect "
     "understanding of spatial relations between objects. Use this when agents are unsure about "
     "the placement of items in a scene."},
    {"ocr", InputKind::kNone, ToolBackendKind::kModel, StructuredStyle::kDetection, "",
     "Can correctly read all text in an image. Use this when agents have differing views on what "
     "the text is in an image.",
     "\"ocr\" (input: none)- Can correctly read all text in an image. Use this when agents have "
     "differing views on what the text is in an image."},
    {"grounder", InputKind::kQueryList, ToolBackendKind::kStructured, StructuredStyle::kGrounding,
     "objects you are trying to find",
     "Will find any object if it is an image, otherwise it will return nothing. Use this when "
     "agents are not agreeing on what's present in an image.",
     "\"grounder\" (input: list. objects you are trying to find) - Will find any object if it is "
     "an image, otherwise it will return nothing. Use this when agents are not agreeing on what's "
     "present in an image."},
    {"detector", InputKind::kNone, ToolBackendKind::kStructured, StructuredStyle::kDetection, "",
     "Will provide a list of objects in the image, their counts, and their bounding boxes. Only "
     "use this when agents are differing in their counts of objects in an image.",
     "\"detector\" (input: none) - Will provide a list of objects in the image, their counts, and "
     "their bounding boxes. Only use this when agents are differing in their counts of objects in "
     "an image."},
    {"captioning", InputKind::kQueryList, ToolBackendKind::kModel, StructuredStyle::kDetection,
     "objects you want captions for",
     "Can give a detailed description of what's going in the image relevant to the question. Use "
     "this when agents might need a better idea of the general scene or descriptions of specific "
     "objects.",
     "\"captioning\" (input: list. objects you want captions for) - Can give a detailed "
     "description of what's going in the image relevant to the question. Use this when agents "
     "might need a better idea of the general scene or descriptions of specific objects."},
    {"attribute", InputKind::kQueryList, ToolBackendKind::kModel, StructuredStyle::kDetection,
     "objects you want attributes for",
     "Will give information on different features of objects in the image, including color, "
     "properties, catgories, and more. Use this when agents are confused about the features of "
     "relevant objects and need many surface level features.",
     "\"attribute\" (input: list. objects you want attributes for) - Will give information on "
     "different features of objects in the image, including color, properties, catgories, and "
     "more. Use this when agents are confused about the features of relevant objects and need "
     "many surface level features."},
    {"reasoning", InputKind::kQueryList, ToolBackendKind::kModel, StructuredStyle::kDetection,
     "objects you want reasoning for",
     "Has better world knowledge and advanced reasoning capabilities about what might be going on "
     "in an image. Use this when agents are confused or conflicting in their inferences about the "
     "scene. This is essentially a meta-reasoning agent that intervenes when models have "
     "different conclusions based on the same assumptions.",
     "\"reasoning\" (input: list. objects you want reasoning for) - Has better world knowledge "
     "and advanced reasoning capabilities about what might be going on in an image. Use this "
     "when agents are confused or conflicting in their inferences about the scene. This is "
     "essentially a meta-reasoning agent that intervenes when models have different conclusions "
     "based on the same assumptions."},
};

std::string plural(const std::string& word, std::size_t n) {
  if (n == 1) return word;
  auto ends = [&](std::string_view s) {
    return word.size() >= s.size() && word.compare(word.size() - s.size(), s.size(), s) == 0;
  };
  if (ends("s") || ends("x") || ends("ch") || ends("sh")) return word + "es";
  return word + "s";
}

std::string confidence_list(const std::vector<const Detection*>& hits) {
  std::string out = hits.size() == 1 ? "confidence " : "confidences ";
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_fixed(hits[i]->score, 2);
  }
  return out;
}

std::string region_list(const std::vector<const Detection*>& hits) {
  std::string out = hits.size() == 1 ? "region " : "regions ";
  for (std::size_t i = 0; i < hits.size(); ++i) {
    if (i > 0) out += ", ";
    out += "(" + location_words(*hits[i]) + ")";
  }
  return out;
}

std::string render_detection(const std::vector<Detection>& dets) {
  if (dets.empty()) return "No objects detected.";
  std::vector<std::pair<std::string, std::vector<const Detection*>>> by_label;
  for (const auto& d : dets) {
    std::string key = normalize_answer(d.label);
    auto it = std::find_if(by_label.begin(), by_label.end(),
                           [&](const auto& kv) { return kv.first == key; });
    if (it == by_label.end()) {
      by_label.push_back({key, {}});
      it = std::prev(by_label.end());
    }
    it->second.push_back(&d);
  }
  std::string out;
  for (const auto& [label, hits] : by_label) {
    if (!out.empty()) out += "; ";
    out += std::to_string(hits.size()) + " " + plural(label, hits.size()) + " (" +
           confidence_list(hits) + ") at " + region_list(hits);
  }
  return out + ".";
}

std::string render_grounding(const std::vector<Detection>& dets,
                             std::span<const std::string> queries) {
  std::vector<std::string> found;
  std::vector<std::string> missing;
  std::vector<std::string> seen;
  for (const auto& q : queries) {
    std::string key = normalize_answer(q);
    if (key.empty() || std::find(seen.begin(), seen.end(), key) != seen.end()) continue;
    seen.push_back(key);
    std::vector<const Detection*> hits;
    for (const auto& d : dets) {
      if (normalize_answer(d.label) == key) hits.push_back(&d);
    }
    if (hits.empty()) {
      missing.push_back("no '" + key + "' found");
    } else {
      found.push_back("Found " + std::to_string(hits.size()) + " '" + key + "' (" +
                      confidence_list(hits) + ") at " + region_list(hits));
    }
  }
  std::string out;
  for (const auto& part : found) out += (out.empty() ? "" : "; ") + part;
  for (const auto& part : missing) out += (out.empty() ? "" : "; ") + part;
  return out + ".";
}

std::string join(std::span<const std::string> items, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += sep;
    out += items[i];
  }
  return out;
}

}  // namespace

std::string ToolDescriptor::recruiter_line() const {
  if (!recruiter_line_text.empty()) return recruiter_line_text;
  std::string input = input_kind == InputKind::kNone ? "none" : "list. " + input_hint;
  if (input_kind == InputKind::kQueryList && input_hint.empty()) input = "list";
  return "\"" + tool_name + "\" (input: " + input + ") - " + capability_sentence;
}

void ToolDescriptor::validate() const {
  if (tool_name.empty()) throw Error(ErrorCode::kInvalidArgument, "tool_name must be non-empty");
  if (trim(capability_sentence).empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "tool '" + tool_name + "': capability sentence must be non-empty");
  }
}

const std::vector<std::string>& builtin_tool_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& b : kBuiltins) v.emplace_back(b.name);
    return v;
  }();
  return names;
}

bool is_builtin_tool(std::string_view name) {
  return std::any_of(std::begin(kBuiltins), std::end(kBuiltins),
                     [&](const BuiltinSpec& b) { return b.name == name; });
}

ToolDescriptor builtin_tool(std::string_view name) {
  for (const auto& b : kBuiltins) {
    if (b.name != name) continue;
    ToolDescriptor d;
    d.tool_name = std::string(b.name);
    d.input_kind = b.input;
    d.input_hint = std::string(b.hint);
    d.capability_sentence = std::string(b.capability);
    d.recruiter_line_text = std::string(b.line);
    d.backend = b.backend;
    d.style = b.style;
    d.prompt_template = b.backend == ToolBackendKind::kStructured
                            ? std::string(builtin_prompt("tool_structured"))
                            : std::string(builtin_prompt("tool_" + std::string(b.name)));
    return d;
  }
  throw Error(ErrorCode::kUnknownTool, "no built-in tool named '" + std::string(name) + "'");
}

void ToolRegistry::register_tool(ToolDescriptor descriptor, bool allow_override) {
  descriptor.validate();
  auto it = std::find_if(tools_.begin(), tools_.end(), [&](const ToolDescriptor& t) {
    return t.tool_name == descriptor.tool_name;
  });
  if (it != tools_.end()) {
    if (!allow_override) {
      throw Error(ErrorCode::kDuplicateToolName,
                  "tool '" + descriptor.tool_name + "' is already registered");
    }
    *it = std::move(descriptor);
    return;
  }
  tools_.push_back(std::move(descriptor));
}

bool ToolRegistry::contains(std::string_view name) const {
  return std::any_of(tools_.begin(), tools_.end(),
                     [&](const ToolDescriptor& t) { return t.tool_name == name; });
}

const ToolDescriptor& ToolRegistry::get(std::string_view name) const {
  for (const auto& t : tools_) {
    if (t.tool_name == name) return t;
  }
  throw Error(ErrorCode::kUnknownTool, "tool '" + std::string(name) + "' is not registered");
}

std::string ToolRegistry::recruiter_block() const {
  std::string out;
  for (const auto& t : tools_) {
    if (!out.empty()) out.push_back('\n');
    out += t.recruiter_line();
  }
  return out;
}

ToolRegistry ToolRegistry::without(std::span<const std::string> withheld) const {
  ToolRegistry out;
  for (const auto& t : tools_) {
    if (std::find(withheld.begin(), withheld.end(), t.tool_name) == withheld.end()) {
      out.tools_.push_back(t);
    }
  }
  return out;
}

nlohmann::json plan_to_json(const ToolPlan& plan) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& inv : plan.invocations) {
    out.push_back({{"tool", inv.tool_name},
                   {"disagreement", inv.disagreement},
                   {"justification", inv.justification},
                   {"arguments", inv.arguments}});
  }
  return out;
}

std::vector<Detection> parse_detection_payload(const nlohmann::json& payload) {
  auto mismatch = [](const std::string& why) {
    return Error(ErrorCode::kPayloadSchemaMismatch, "structured payload: " + why);
  };
  if (!payload.is_array()) throw mismatch("expected a list of detections");
  std::vector<Detection> out;
  for (std::size_t i = 0; i < payload.size(); ++i) {
    const auto& item = payload[i];
    std::string at = "item " + std::to_string(i) + ": ";
    if (!item.is_object()) throw mismatch(at + "not an object");
    if (!item.contains("label") || !item["label"].is_string() ||
        trim(item["label"].get<std::string>()).empty()) {
      throw mismatch(at + "missing label");
    }
    if (!item.contains("score") || !item["score"].is_number()) throw mismatch(at + "missing score");
    if (!item.contains("box") || !item["box"].is_array() || item["box"].size() != 4) {
      throw mismatch(at + "box must hold 4 numbers");
    }
    Detection d;
    d.label = trim(item["label"].get<std::string>());
    d.score = item["score"].get<double>();
    if (!(d.score >= 0.0 && d.score <= 1.0)) throw mismatch(at + "score outside [0,1]");
    double c[4];
    for (int k = 0; k < 4; ++k) {
      const auto& v = item["box"][static_cast<std::size_t>(k)];
      if (!v.is_number()) throw mismatch(at + "box must hold 4 numbers");
      c[k] = v.get<double>();
      if (!(c[k] >= 0.0 && c[k] <= 1.0)) throw mismatch(at + "box coordinates must be normalized");
    }
    if (c[0] > c[2] || c[1] > c[3]) throw mismatch(at + "box corners out of order");
    d.x0 = c[0];
    d.y0 = c[1];
    d.x1 = c[2];
    d.y1 = c[3];
    out.push_back(std::move(d));
  }
  return out;
}

std::string location_words(const Detection& d) {
  double cx = (d.x0 + d.x1) / 2.0;
  double cy = (d.y0 + d.y1) / 2.0;
  const char* h = cx < 1.0 / 3.0 ? "left" : (cx < 2.0 / 3.0 ? "center" : "right");
  const char* v = cy < 1.0 / 3.0 ? "top" : (cy < 2.0 / 3.0 ? "middle" : "bottom");
  if (std::string_view(v) == "middle" && std::string_view(h) == "center") return "center";
  return std::string(v) + " " + h;
}

std::string postprocess_structured(StructuredStyle style, std::span<const std::string> queries,
                                   const nlohmann::json& payload) {
  std::vector<Detection> dets = parse_detection_payload(payload);
  if (style == StructuredStyle::kGrounding && !queries.empty()) {
    return render_grounding(dets, queries);
  }
  return render_detection(dets);
}

std::vector<ExpertOutput> execute_plan(CallContext& ctx, const ToolRegistry& registry,
                                       const ToolPlan& plan, const ImagePayload& image,
                                       std::string_view question, bool parallel) {
  std::vector<ExpertOutput> outputs(plan.size());
  fan_out(ctx, plan.size(), parallel, [&](std::size_t i, CallContext& sub) {
    const ToolInvocation& inv = plan.invocations[i];
    ExpertOutput& out = outputs[i];
    out.tool_name = inv.tool_name;
    out.arguments = inv.arguments;
    out.disagreement_addressed = inv.disagreement;
    try {
      const ToolDescriptor& tool = registry.get(inv.tool_name);
      std::string prompt = render_template(
          tool.prompt_template, {{"<question>", std::string(question)},
                                 {"<arguments>", join(inv.arguments, ", ")},
                                 {"<arguments_json>", nlohmann::json(inv.arguments).dump()},
                                 {"<disagreement>", inv.disagreement}});
      ChatRequest req = user_request(
          std::move(prompt), image.empty() ? std::nullopt : std::optional<ImagePayload>(image));
      ChatResponse resp = sub.chat(Stage::kTool, inv.tool_name, tool.endpoint_id, req);
      if (tool.backend == ToolBackendKind::kStructured) {
        auto payload = nlohmann::json::parse(resp.text, nullptr, false);
        if (payload.is_discarded()) {
          throw Error(ErrorCode::kPayloadSchemaMismatch, "structured payload is not JSON");
        }
        out.evidence_text = postprocess_structured(tool.style, inv.arguments, payload);
        out.structured_payload = std::move(payload);
      } else {
        out.evidence_text = trim(resp.text);
        if (out.evidence_text.empty()) {
          throw Error(ErrorCode::kPayloadSchemaMismatch, "tool returned no text");
        }
      }
      out.succeeded = true;
    } catch (const Error& e) {
      out.succeeded = false;
      out.evidence_text.clear();
      out.structured_payload.reset();
      out.error = std::string(error_code_name(e.code())) + ": " + e.what();
      sub.warn(Stage::kTool, "tool '" + inv.tool_name + "' failed: " + out.error);
    }
    nlohmann::json event = {{"type", "tool"},
                            {"stage", "tool"},
                            {"tool", out.tool_name},
                            {"arguments", out.arguments},
                            {"disagreement", out.disagreement_addressed},
                            {"evidence", out.evidence_text},
                            {"succeeded", out.succeeded},
                            {"payload", out.structured_payload.value_or(nullptr)}};
    if (!out.succeeded) event["error"] = out.error;
    sub.note(std::move(event));
  });
  return outputs;
}

std::string render_evidence(std::span<const ExpertOutput> outputs) {
  std::string out;
  for (const auto& o : outputs) {
    if (!o.succeeded) continue;
    if (!out.empty()) out += "\n";
    out += "[" + o.tool_name;
    if (!o.arguments.empty()) out += ": " + join(o.arguments, ", ");
    out += "] " + o.evidence_text;
  }
  if (out.empty()) return "No expert outputs are available.";
  return out;
}

}  // namespace dissent
