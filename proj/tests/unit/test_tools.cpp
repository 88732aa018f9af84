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

#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dissent/error.hpp"
#include "dissent/recruitment.hpp"
#include "dissent/text.hpp"
#include "dissent/tools.hpp"
#include "test_support.hpp"

namespace dissent {
namespace {

using testing::builtin_registry;

ToolDescriptor medical_tool() {
  ToolDescriptor d;
  d.tool_name = "medical";
  d.input_kind = InputKind::kQueryList;
  d.input_hint = "findings you want checked";
  d.capability_sentence = "Reads radiology images. Use this when agents disagree about findings.";
  d.endpoint_id = "tools";
  d.prompt_template = "<question> <arguments>";
  return d;
}

TEST(BuiltinTools, RecruiterLinesMatchThePromptText) {
  const std::vector<std::string> expected = {
      "\"spatial\" (input: list. objects that have confused spatial relations) - Has perfect "
      "understanding of spatial relations between objects. Use this when agents are unsure about "
      "the placement of items in a scene.",
      "\"ocr\" (input: none)- Can correctly read all text in an image. Use this when agents have "
      "differing views on what the text is in an image.",
      "\"grounder\" (input: list. objects you are trying to find) - Will find any object if it is "
      "an image, otherwise it will return nothing. Use this when agents are not agreeing on "
      "what's present in an image.",
      "\"detector\" (input: none) - Will provide a list of objects in the image, their counts, and "
      "their bounding boxes. Only use this when agents are differing in their counts of objects "
      "in an image.",
      "\"captioning\" (input: list. objects you want captions for) - Can give a detailed "
      "description of what's going in the image relevant to the question. Use this when agents "
      "might need a better idea of the general scene or descriptions of specific objects.",
      "\"attribute\" (input: list. objects you want attributes for) - Will give information on "
      "different features of objects in the image, including color, properties, catgories, and "
      "more. Use this when agents are confused about the features of relevant objects and need "
      "many surface level features.",
      "\"reasoning\" (input: list. objects you want reasoning for) - Has better world knowledge "
      "and advanced reasoning capabilities about what might be going on in an image. Use this "
      "when agents are confused or conflicting in their inferences about the scene. This is "
      "essentially a meta-reasoning agent that intervenes when models have different conclusions "
      "based on the same assumptions.",
  };
  ToolRegistry reg = builtin_registry();
  ASSERT_EQ(reg.size(), 7u);
  EXPECT_EQ(split_lines(reg.recruiter_block()), expected);
  EXPECT_EQ(reg.get("ocr").input_kind, InputKind::kNone);
  EXPECT_EQ(reg.get("detector").input_kind, InputKind::kNone);
  EXPECT_EQ(reg.get("grounder").input_kind, InputKind::kQueryList);
}

TEST(ToolRegistry, RegisteringACustomToolAddsARecruiterLine) {
  ToolRegistry reg = builtin_registry();
  reg.register_tool(medical_tool());
  EXPECT_EQ(reg.size(), 8u);
  EXPECT_EQ(split_lines(reg.recruiter_block()).size(), 8u);
  EXPECT_EQ(split_lines(reg.recruiter_block()).back(),
            "\"medical\" (input: list. findings you want checked) - Reads radiology images. Use "
            "this when agents disagree about findings.");
}

TEST(ToolRegistry, DuplicateNamesNeedOverride) {
  ToolRegistry reg = builtin_registry();
  try {
    reg.register_tool(builtin_tool("grounder"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDuplicateToolName);
  }
  ToolDescriptor again = builtin_tool("grounder");
  again.endpoint_id = "other";
  reg.register_tool(again, true);
  EXPECT_EQ(reg.get("grounder").endpoint_id, "other");
  EXPECT_EQ(reg.size(), 7u);
}

TEST(ToolRegistry, CustomToolIsAcceptedByThePlanValidator) {
  ToolRegistry reg = builtin_registry();
  reg.register_tool(medical_tool());
  ValidatedPlan v = validate_tool_plan(
      R"({"experts":["medical"],"inputs":{"medical":{"disagreement":"d","justification":"j","arguments":["nodule"]}}})",
      reg);
  ASSERT_EQ(v.plan.size(), 1u);
  EXPECT_EQ(v.plan.invocations[0].tool_name, "medical");
  EXPECT_EQ(v.plan.invocations[0].arguments, std::vector<std::string>{"nodule"});
}

TEST(ToolRegistry, WithheldToolsDisappear) {
  ToolRegistry reg = builtin_registry();
  std::vector<std::string> withheld = {"ocr", "spatial"};
  ToolRegistry smaller = reg.without(withheld);
  EXPECT_EQ(smaller.size(), 5u);
  EXPECT_FALSE(smaller.contains("ocr"));
  EXPECT_THROW(smaller.get("ocr"), Error);
}

TEST(ToolDescriptor, NeedsCapability) {
  ToolDescriptor d = medical_tool();
  d.capability_sentence = "  ";
  ToolRegistry reg;
  EXPECT_THROW(reg.register_tool(d), Error);
}

nlohmann::json box(const std::string& label, double score, double x0, double y0, double x1,
                   double y1) {
  return {{"label", label}, {"score", score}, {"box", {x0, y0, x1, y1}}};
}

TEST(PostprocessStructured, GrounderReportsFoundAndMissing) {
  std::vector<std::string> q = {"cat", "dog"};
  nlohmann::json payload = nlohmann::json::array({box("dog", 0.82, 0.0, 0.4, 0.3, 0.6)});
  EXPECT_EQ(postprocess_structured(StructuredStyle::kGrounding, q, payload),
            "Found 1 'dog' (confidence 0.82) at region (middle left); no 'cat' found.");
}

TEST(PostprocessStructured, GrounderEmptyPayload) {
  std::vector<std::string> q = {"cat"};
  std::string text =
      postprocess_structured(StructuredStyle::kGrounding, q, nlohmann::json::array());
  EXPECT_NE(text.find("no 'cat' found"), std::string::npos);
}

TEST(PostprocessStructured, DetectorCountsPerLabel) {
  nlohmann::json payload = nlohmann::json::array({box("person", 0.9, 0.0, 0.0, 0.2, 0.2),
                                                  box("dog", 0.7, 0.4, 0.4, 0.6, 0.6),
                                                  box("person", 0.8, 0.8, 0.8, 1.0, 1.0)});
  std::string text = postprocess_structured(StructuredStyle::kDetection, {}, payload);
  EXPECT_EQ(text,
            "2 persons (confidences 0.90, 0.80) at regions (top left), (bottom right); "
            "1 dog (confidence 0.70) at region (center).");
  EXPECT_EQ(postprocess_structured(StructuredStyle::kDetection, {}, nlohmann::json::array()),
            "No objects detected.");
}

TEST(PostprocessStructured, ThirdsRule) {
  Detection d;
  d.x0 = 0.85;
  d.x1 = 0.95;
  d.y0 = 0.05;
  d.y1 = 0.15;
  EXPECT_EQ(location_words(d), "top right");
  d.x0 = d.y0 = 0.4;
  d.x1 = d.y1 = 0.6;
  EXPECT_EQ(location_words(d), "center");
  d.x0 = 0.0;
  d.x1 = 0.1;
  d.y0 = 0.9;
  d.y1 = 1.0;
  EXPECT_EQ(location_words(d), "bottom left");
}

TEST(PostprocessStructured, SchemaMismatch) {
  for (const char* bad : {R"({"label":"x"})", R"([{"label":"x","score":0.5}])",
                          R"([{"label":"x","score":1.5,"box":[0,0,1,1]}])",
                          R"([{"label":"x","score":0.5,"box":[0.5,0,0.1,1]}])",
                          R"([{"label":"","score":0.5,"box":[0,0,1,1]}])"}) {
    try {
      parse_detection_payload(nlohmann::json::parse(bad));
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kPayloadSchemaMismatch) << bad;
    }
  }
}

class ExecuteTest : public ::testing::Test {
 protected:
  void SetUp() override {
    gateway.set_sleeper([](std::chrono::milliseconds) {});
    EndpointProfile p;
    p.endpoint_id = "tools";
    p.model_name = "mock";
    p.max_retries = 0;
    gateway.add_endpoint(p);
  }
  Gateway gateway;
  Transcript transcript;
  CallContext ctx{gateway, transcript, "q", 1};
  ToolRegistry registry = builtin_registry();
};

TEST_F(ExecuteTest, OcrEvidenceCarriesTheText) {
  gateway.register_mock_script("tools", {MockEntry::reply("M-F 9am-6pm")});
  ToolPlan plan;
  plan.invocations.push_back({"ocr", "agents read different days", "read it", {}});
  auto out = execute_plan(ctx, registry, plan, ImagePayload{}, "When are the days off?");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_TRUE(out[0].succeeded);
  EXPECT_NE(out[0].evidence_text.find("M-F 9am-6pm"), std::string::npos);
  EXPECT_NE(render_evidence(out).find("[ocr] M-F 9am-6pm"), std::string::npos);
}

TEST_F(ExecuteTest, EmptyPlanIsVacuous) {
  EXPECT_TRUE(execute_plan(ctx, registry, ToolPlan{}, ImagePayload{}, "q").empty());
  EXPECT_TRUE(transcript.events().empty());
}

TEST_F(ExecuteTest, GrounderPayloadBecomesEvidence) {
  gateway.register_mock_script(
      "tools", {MockEntry::reply(R"([{"label":"dog","score":0.82,"box":[0.7,0.0,0.9,0.2]}])")});
  ToolPlan plan;
  plan.invocations.push_back({"grounder", "cat or dog", "find them", {"cat", "dog"}});
  auto out = execute_plan(ctx, registry, plan, ImagePayload{}, "q");
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].evidence_text,
            "Found 1 'dog' (confidence 0.82) at region (top right); no 'cat' found.");
  ASSERT_TRUE(out[0].structured_payload.has_value());
}

TEST_F(ExecuteTest, FailuresAreRecordedInPlaceAndOrderIsKept) {
  gateway.register_mock_script("tools", {MockEntry::reply("not json"), MockEntry::fail(),
                                         MockEntry::reply("a cat on a mat")});
  ToolPlan plan;
  plan.invocations.push_back({"grounder", "", "", {"cat"}});
  plan.invocations.push_back({"ocr", "", "", {}});
  plan.invocations.push_back({"captioning", "", "", {"cat"}});
  auto out = execute_plan(ctx, registry, plan, ImagePayload{}, "q");
  ASSERT_EQ(out.size(), 3u);
  EXPECT_EQ(out[0].tool_name, "grounder");
  EXPECT_FALSE(out[0].succeeded);
  EXPECT_FALSE(out[1].succeeded);
  EXPECT_TRUE(out[2].succeeded);
  EXPECT_EQ(render_evidence(out), "[captioning: cat] a cat on a mat");
  std::vector<ExpertOutput> none = {out[0]};
  EXPECT_EQ(render_evidence(none), "No expert outputs are available.");
}

}  // namespace
}  // namespace dissent
