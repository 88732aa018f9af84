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

#include <map>
#include <string>

#include <gtest/gtest.h>

#include "dissent/config.hpp"
#include "dissent/error.hpp"
#include "test_support.hpp"

namespace dissent {
namespace {

EnvLookup fake_env(std::map<std::string, std::string> vars) {
  return [vars](const std::string& name) -> std::optional<std::string> {
    auto it = vars.find(name);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

nlohmann::json minimal() {
  return nlohmann::json::parse(R"({
    "endpoints": [{"id": "m"}],
    "answerers": ["m"], "recruiter": "m", "scorer": "m", "aggregator": "m"
  })");
}

std::string config_error(const nlohmann::json& doc) {
  try {
    RunConfig c = parse_run_config(doc, {}, fake_env({}));
    validate_run_config(c);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig) << e.what();
    return e.what();
  }
  return "ok";
}

TEST(InterpolateEnv, ReplacesAndRejects) {
  auto env = fake_env({{"KEY", "s3cret"}, {"EMPTY", ""}});
  EXPECT_EQ(interpolate_env("Bearer ${KEY}!", "f", env), "Bearer s3cret!");
  EXPECT_EQ(interpolate_env("no refs", "f", env), "no refs");
  EXPECT_THROW(interpolate_env("${MISSING}", "f", env), Error);
  EXPECT_THROW(interpolate_env("${EMPTY}", "f", env), Error);
  EXPECT_THROW(interpolate_env("${KEY", "f", env), Error);
  try {
    interpolate_env("${MISSING}", "endpoints[0].api_key", env);
  } catch (const Error& e) {
    EXPECT_EQ(std::string(e.what()).rfind("endpoints[0].api_key:", 0), 0u);
  }
}

TEST(ParseRunConfig, DefaultsAndSecrets) {
  nlohmann::json doc = minimal();
  doc["endpoints"].push_back({{"id", "remote"},
                              {"base_url", "http://localhost:8000/v1"},
                              {"model", "vlm"},
                              {"api_key", "${API_TOKEN}"}});
  doc["endpoints"].push_back({{"id", "t"}, {"role", "tool"}});
  RunConfig c = parse_run_config(doc, {}, fake_env({{"API_TOKEN", "abc"}}));
  ASSERT_EQ(c.endpoints.size(), 3u);
  EXPECT_EQ(c.endpoints[0].profile.transport, Transport::kMock);
  EXPECT_EQ(c.endpoints[1].profile.transport, Transport::kHttp);
  EXPECT_EQ(c.endpoints[1].profile.api_key, "abc");
  EXPECT_EQ(c.endpoints[0].profile.timeout.count(), 60000);
  EXPECT_EQ(c.endpoints[2].profile.timeout.count(), 30000);
  EXPECT_EQ(c.pipeline.rounds, 1);
  // The snapshot keeps the reference, never the secret.
  EXPECT_EQ(c.document["endpoints"][1]["api_key"], "${API_TOKEN}");
}

TEST(ParseRunConfig, ErrorsNameTheField) {
  nlohmann::json unknown_scorer = minimal();
  unknown_scorer["scorer"] = "ghost";
  EXPECT_EQ(config_error(unknown_scorer).rfind("scorer:", 0), 0u);

  nlohmann::json typo = minimal();
  typo["round"] = 2;
  EXPECT_NE(config_error(typo).find("round"), std::string::npos);

  nlohmann::json bad_temp = minimal();
  bad_temp["endpoints"][0]["temperature"] = 3.0;
  EXPECT_EQ(config_error(bad_temp).rfind("endpoints[0].temperature", 0), 0u);

  nlohmann::json missing = minimal();
  missing.erase("aggregator");
  EXPECT_NE(config_error(missing).find("aggregator"), std::string::npos);

  nlohmann::json bad_tool = minimal();
  bad_tool["tools"] = {{{"name", "ocr"}, {"endpoint", "nowhere"}}};
  EXPECT_NE(config_error(bad_tool).find("tools"), std::string::npos);

  nlohmann::json custom_without_capability = minimal();
  custom_without_capability["tools"] = {{{"name", "medical"}, {"endpoint", "m"}}};
  EXPECT_NE(config_error(custom_without_capability).find("tools[0]"), std::string::npos);

  nlohmann::json dup = minimal();
  dup["endpoints"].push_back({{"id", "m"}});
  EXPECT_NE(config_error(dup).find("endpoints[1]"), std::string::npos);

  nlohmann::json withheld = minimal();
  withheld["ablations"] = {{"withheld_tools", {"ocr"}}};
  EXPECT_NE(config_error(withheld).find("withheld_tools"), std::string::npos);

  EXPECT_EQ(config_error(minimal()), "ok");
}

TEST(ParseRunConfig, GoldenConfigBuilds) {
  RunConfig c = load_run_config(testing::data_path("golden_config.json"));
  EXPECT_EQ(c.pipeline.run_seed, 7u);
  EXPECT_EQ(c.pipeline.answerer_ids.size(), 3u);
  Gateway g;
  ToolRegistry r;
  c.build(g, r);
  EXPECT_EQ(r.size(), 2u);
  EXPECT_EQ(r.get("grounder").endpoint_id, "grounder");
  EXPECT_NO_THROW(validate_run_config(c));
}

TEST(ParseRunConfig, PromptOverrides) {
  testing::TempDir dir;
  testing::write_file(dir.str("initial.txt"), "Q: <question>");
  nlohmann::json doc = minimal();
  doc["prompts"] = {{"initial", {{"file", "initial.txt"}}}, {"aggregate", "inline <question>"}};
  RunConfig c = parse_run_config(doc, dir.str(), fake_env({}));
  EXPECT_EQ(c.pipeline.prompts.initial, "Q: <question>");
  EXPECT_EQ(c.pipeline.prompts.aggregate, "inline <question>");
}

}  // namespace
}  // namespace dissent
