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

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dissent/aggregation.hpp"
#include "dissent/error.hpp"
#include "dissent/prompts.hpp"

namespace dissent {
namespace {

GroupedSolutions grouping(const std::vector<std::pair<std::string, int>>& counts) {
  std::vector<AgentAnswer> answers;
  int agent = 1;
  for (const auto& [answer, n] : counts) {
    for (int k = 0; k < n; ++k) {
      AgentAnswer a;
      a.agent_id = "Agent " + std::to_string(agent++);
      a.answer = answer;
      a.reasoning = "r";
      answers.push_back(a);
    }
  }
  return group_solutions(answers, GroupingStage::kFinal);
}

TEST(MajorityVote, StrictMajority) {
  FinalAnswer f = majority_vote(grouping({{"cat", 2}, {"dog", 1}}), 1);
  EXPECT_EQ(f.answer, "cat");
  EXPECT_DOUBLE_EQ(f.confidence, 2.0 / 3.0);
  EXPECT_EQ(f.method, AggregationMethod::kMajorityVote);
}

TEST(MajorityVote, Unanimity) {
  FinalAnswer f = majority_vote(grouping({{"x", 3}}), 0);
  EXPECT_EQ(f.answer, "x");
  EXPECT_DOUBLE_EQ(f.confidence, 1.0);
}

TEST(MajorityVote, SeededTieIsStable) {
  GroupedSolutions g = grouping({{"a", 1}, {"b", 1}, {"c", 1}});
  const std::string first = majority_vote(g, 7).answer;
  for (int i = 0; i < 20; ++i) EXPECT_EQ(majority_vote(g, 7).answer, first);
  EXPECT_TRUE(first == "a" || first == "b" || first == "c");
}

TEST(MajorityVote, TiesSpreadOverCandidates) {
  GroupedSolutions g = grouping({{"a", 2}, {"b", 2}, {"c", 1}});
  std::map<std::string, int> picks;
  for (std::uint64_t seed = 0; seed < 400; ++seed) ++picks[majority_vote(g, seed).answer];
  EXPECT_EQ(picks.count("c"), 0u);
  EXPECT_GT(picks["a"], 100);
  EXPECT_GT(picks["b"], 100);
}

TEST(MajorityVote, StrictMajorityIgnoresGroupOrder) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::pair<std::string, int>> counts = {{"w", 4}, {"x", 1}, {"y", 2}, {"z", 1}};
    std::shuffle(counts.begin(), counts.end(), rng);
    EXPECT_EQ(majority_vote(grouping(counts), rng()).answer, "w");
  }
}

TEST(TieBreakSeed, DependsOnRunSeedAndQuestion) {
  EXPECT_EQ(tie_break_seed(7, "q1"), tie_break_seed(7, "q1"));
  EXPECT_NE(tie_break_seed(7, "q1"), tie_break_seed(8, "q1"));
  EXPECT_NE(tie_break_seed(7, "q1"), tie_break_seed(7, "q2"));
}

class AggregateTest : public ::testing::Test {
 protected:
  void SetUp() override {
    gateway.set_sleeper([](std::chrono::milliseconds) {});
    EndpointProfile p;
    p.endpoint_id = "agg";
    p.model_name = "mock";
    gateway.add_endpoint(p);
    settings.aggregate_template = std::string(builtin_prompt("aggregate"));
  }
  FinalAnswer run(const GroupedSolutions& g) {
    return aggregate(ctx, "Which side?", ImagePayload{}, g, {}, AgreementScores{}, "agg", settings);
  }
  Gateway gateway;
  Transcript transcript;
  CallContext ctx{gateway, transcript, "q", 1};
  AggregateSettings settings;
};

TEST_F(AggregateTest, ScriptedPick) {
  gateway.register_mock_script("agg",
                               {MockEntry::reply("Reasoning: evidence\nAnswer: left\nConfidence: 0.9")});
  FinalAnswer f = run(grouping({{"left", 2}, {"right", 1}}));
  EXPECT_EQ(f.answer, "left");
  EXPECT_DOUBLE_EQ(f.confidence, 0.9);
  EXPECT_EQ(f.method, AggregationMethod::kAggregator);
  EXPECT_FALSE(f.off_menu);
}

TEST_F(AggregateTest, SingleCandidate) {
  gateway.register_mock_script("agg", {MockEntry::reply("Answer: yes\nConfidence: 1")});
  EXPECT_EQ(run(grouping({{"yes", 3}})).answer, "yes");
}

TEST_F(AggregateTest, GarbageFallsBackToMajority) {
  gateway.register_mock_script("agg", {MockEntry::reply("??"), MockEntry::reply("!!")});
  FinalAnswer f = run(grouping({{"A", 2}, {"B", 1}}));
  EXPECT_EQ(f.answer, "a");
  EXPECT_EQ(f.method, AggregationMethod::kMajorityVote);
  EXPECT_EQ(gateway.mock("agg").calls(), 2u);
}

TEST_F(AggregateTest, OffMenuAnswersAreFlagged) {
  gateway.register_mock_script("agg", {MockEntry::reply("Answer: purple\nConfidence: 0.4")});
  FinalAnswer f = run(grouping({{"red", 2}, {"blue", 1}}));
  EXPECT_EQ(f.answer, "purple");
  EXPECT_TRUE(f.off_menu);
}

TEST_F(AggregateTest, InitialAnswersAppearOnlyWhenRequested) {
  gateway.register_mock_script("agg", {MockEntry::reply("Answer: red"), MockEntry::reply("Answer: red")});
  GroupedSolutions g = grouping({{"red", 2}, {"blue", 1}});
  run(g);
  settings.initial_grouping = "Answer: green (3 agents)";
  run(g);
  std::vector<std::string> prompts;
  for (const auto& e : transcript.events()) {
    if (e["type"] == "call") prompts.push_back(e["messages"][0]["text"].get<std::string>());
  }
  ASSERT_EQ(prompts.size(), 2u);
  EXPECT_EQ(prompts[0].find("green"), std::string::npos);
  EXPECT_NE(prompts[1].find("green"), std::string::npos);
}

}  // namespace
}  // namespace dissent
