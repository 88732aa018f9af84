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

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dissent/config.hpp"
#include "dissent/error.hpp"
#include "dissent/evaluation.hpp"
#include "dissent/text.hpp"
#include "test_support.hpp"

namespace dissent {
namespace {

using testing::TempDir;
using testing::data_path;
using testing::read_file;
using testing::write_file;

std::string mc_line(const std::string& id, int gold, const std::string& extra = "") {
  return R"({"question_id":")" + id + R"(","question":"Which animal?","image":"bus.png",)" +
         R"("kind":"multiple_choice","choices":["cat","dog","bird","fish"],"gold":)" +
         std::to_string(gold) + extra + "}";
}

TEST(LoadDataset, CountsRecordsAndResolvesImages) {
  TempDir dir;
  write_file(dir.str("d.jsonl"), mc_line("a", 0) + "\n\n" + mc_line("b", 1) + "\n");
  auto ds = load_dataset(dir.str("d.jsonl"));
  ASSERT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds[1].question_id, "b");
  EXPECT_EQ(ds[0].image_path, dir.str("bus.png"));
}

TEST(LoadDataset, GoldIndexOutOfRangeNamesTheLine) {
  TempDir dir;
  write_file(dir.str("d.jsonl"), mc_line("a", 0) + "\n" + mc_line("b", 5) + "\n");
  try {
    load_dataset(dir.str("d.jsonl"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kRecordValidation);
    EXPECT_EQ(std::string(e.what()).rfind("line 2:", 0), 0u) << e.what();
  }
}

TEST(LoadDataset, OtherRecordErrors) {
  TempDir dir;
  auto error_for = [&](const std::string& text) {
    write_file(dir.str("d.jsonl"), text);
    try {
      load_dataset(dir.str("d.jsonl"));
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(error_for("not json").find("line 1"), std::string::npos);
  EXPECT_NE(error_for(mc_line("a", 0) + "\n" + mc_line("a", 1)).find("duplicate"), std::string::npos);
  EXPECT_NE(error_for(R"({"question_id":"x","question":"q","image":"i","kind":"essay","gold":1})")
                .find("unknown kind"),
            std::string::npos);
  EXPECT_NE(error_for(R"({"question_id":"x","question":"q","image":"i","kind":"direct_answer","gold":[]})")
                .find("gold"),
            std::string::npos);
}

TEST(LoadDataset, DirectAnswerReferencesRoundTrip) {
  nlohmann::json rec = {{"question_id", 17},   {"question", "What sport?"},
                        {"image", "x.png"},    {"kind", "direct_answer"},
                        {"category", "sports"}};
  std::vector<std::string> refs = {"surfing", "surfing", "surf",    "surfing", "wave riding",
                                   "surfing", "surfing", "surfing", "surf",    "surfing"};
  rec["gold"] = refs;
  Example ex = parse_example(rec, 1);
  EXPECT_EQ(ex.question_id, "17");
  EXPECT_EQ(ex.gold_answers, refs);
  EXPECT_EQ(ex.gold_answers.size(), 10u);
  EXPECT_EQ(ex.category, "sports");
}

Example mc_example(int gold) {
  return parse_example(nlohmann::json::parse(mc_line("m", gold)), 1);
}

TEST(ScoreMultipleChoice, LettersTextAndUnparsed) {
  EXPECT_EQ(score_multiple_choice("Option A", mc_example(0)).score, 1);
  EXPECT_EQ(score_multiple_choice("bird", mc_example(2)).score, 1);
  ChoiceScore maybe = score_multiple_choice("maybe B or C", mc_example(1));
  EXPECT_EQ(maybe.score, 0);
  EXPECT_TRUE(maybe.unparsed_choice);
  EXPECT_EQ(score_multiple_choice("(b)", mc_example(1)).score, 1);
  EXPECT_EQ(score_multiple_choice("B. dog", mc_example(1)).score, 1);
  EXPECT_EQ(score_multiple_choice("choice c", mc_example(1)).score, 0);
  EXPECT_FALSE(score_multiple_choice("choice c", mc_example(1)).unparsed_choice);
  EXPECT_TRUE(score_multiple_choice("E", mc_example(1)).unparsed_choice);
  EXPECT_EQ(render_question(mc_example(0)),
            "Which animal?\nOptions:\nA. cat\nB. dog\nC. bird\nD. fish");
}

TEST(ScoreDirectAnswer, HandCountedTable) {
  for (const auto& c : testing::direct_answer_cases()) {
    double expected = std::min(1.0, c.matches / 3.0);
    EXPECT_DOUBLE_EQ(score_direct_answer(c.prediction, c.gold), expected) << c.prediction;
  }
  std::vector<std::string> ten(10, "dog");
  EXPECT_DOUBLE_EQ(score_direct_answer("dog", std::vector<std::string>(5, "dog")), 1.0);
  EXPECT_DOUBLE_EQ(score_direct_answer("zebra", ten), 0.0);
}

TEST(Summarize, MeanAndCategories) {
  std::vector<ReportRow> rows(3);
  rows[0] = {"b", "x", 1.0, 0.9, "aggregator", "animals", false, false, 10, 2};
  rows[1] = {"a", "y", 0.0, 0.5, "aggregator", "animals", false, false, 5, 1};
  rows[2] = {"c", "z", 2.0 / 3.0, 0.7, "aggregator", std::nullopt, false, false, 1, 1};
  EvalReport r = summarize(rows);
  EXPECT_EQ(r.rows[0].question_id, "a");
  ASSERT_TRUE(r.accuracy.has_value());
  EXPECT_NEAR(*r.accuracy, (1.0 + 0.0 + 2.0 / 3.0) / 3.0, 1e-12);
  EXPECT_DOUBLE_EQ(r.per_category.at("animals").accuracy, 0.5);
  EXPECT_EQ(r.per_category.at("animals").count, 2u);
  EXPECT_EQ(r.prompt_tokens, 16);
  EXPECT_FALSE(summarize({}).accuracy.has_value());
  ReportRow back = ReportRow::from_json(rows[0].to_json());
  EXPECT_EQ(back.to_json(), rows[0].to_json());
}

// Three questions; agents always agree, so the aggregator decides alone.
nlohmann::json eval_config(bool fail_second) {
  nlohmann::json rules = nlohmann::json::array(
      {{{"match", "first question"}, {"reply", "Answer: cat\nConfidence: 0.9"}},
       {{"match", "second question"}, {"reply", "Answer: the dog\nConfidence: 0.8"}},
       {{"match", "third question"}, {"reply", "Answer: red\nConfidence: 0.6"}}});
  nlohmann::json endpoints = nlohmann::json::array();
  for (const char* id : {"a1", "a2", "a3", "recruiter", "scorer", "tools"}) {
    endpoints.push_back({{"id", id}, {"rules", rules}});
  }
  nlohmann::json agg = {{"id", "agg"}, {"rules", rules}};
  if (fail_second) {
    agg["script"] = {"Answer: cat\nConfidence: 0.9", {{"fail", true}}, {{"fail", true}},
                     {{"fail", true}}};
  }
  endpoints.push_back(agg);
  return {{"endpoints", endpoints},
          {"answerers", {"a1", "a2", "a3"}},
          {"recruiter", "recruiter"},
          {"scorer", "scorer"},
          {"aggregator", "agg"},
          {"run_seed", 3}};
}

std::vector<Example> eval_dataset(const TempDir& dir) {
  std::string image = data_path("bus.png");
  std::string text =
      R"({"question_id":"q1","question":"first question","image":")" + image +
      R"(","kind":"multiple_choice","choices":["cat","dog"],"gold":0})" + "\n" +
      R"({"question_id":"q2","question":"second question","image":")" + image +
      R"(","kind":"direct_answer","gold":["dog","dog","dog","puppy"]})" + "\n" +
      R"({"question_id":"q3","question":"third question","image":")" + image +
      R"(","kind":"direct_answer","gold":["blue","blue","blue"]})" + "\n";
  write_file(dir.str("data.jsonl"), text);
  return load_dataset(dir.str("data.jsonl"));
}

EvalReport eval_with(const nlohmann::json& doc, const std::vector<Example>& ds,
                     const std::string& run_dir, bool resume, int workers = 1) {
  RunConfig cfg = parse_run_config(doc);
  Gateway gateway(cfg.pipeline.run_seed);
  gateway.set_sleeper([](std::chrono::milliseconds) {});
  ToolRegistry registry;
  cfg.build(gateway, registry);
  return run_eval(ds, gateway, registry, cfg.pipeline, {run_dir, resume, workers});
}

TEST(RunEval, ScriptedTwoOfThree) {
  TempDir dir;
  auto ds = eval_dataset(dir);
  EvalReport r = eval_with(eval_config(false), ds, dir.str("run"), false, 3);
  ASSERT_EQ(r.rows.size(), 3u);
  ASSERT_TRUE(r.accuracy.has_value());
  EXPECT_NEAR(*r.accuracy, 2.0 / 3.0, 1e-12);
  EXPECT_TRUE(r.complete);
  for (const char* q : {"q1", "q2", "q3"}) {
    EXPECT_TRUE(std::filesystem::exists(dir.str("run/transcripts/") + q + ".jsonl"));
  }
  auto lines = split_lines(read_file(dir.str("run/reports/report.jsonl")));
  EXPECT_EQ(nlohmann::json::parse(lines[0])["question_id"], "q1");
  auto summary = nlohmann::json::parse(read_file(dir.str("run/reports/summary.json")));
  EXPECT_NEAR(summary["accuracy"].get<double>(), 2.0 / 3.0, 1e-12);
}

TEST(RunEval, EmptyDatasetLeavesAccuracyUndefined) {
  TempDir dir;
  EvalReport r = eval_with(eval_config(false), {}, dir.str("run"), false);
  EXPECT_TRUE(r.rows.empty());
  EXPECT_FALSE(r.accuracy.has_value());
  auto summary = nlohmann::json::parse(read_file(dir.str("run/reports/summary.json")));
  EXPECT_TRUE(summary["accuracy"].is_null());
}

TEST(RunEval, ResumeAfterInterruptCompletesWithoutDuplicates) {
  TempDir dir;
  auto ds = eval_dataset(dir);
  try {
    eval_with(eval_config(true), ds, dir.str("run"), false);
    FAIL() << "expected the run to abort";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAbortedRun);
  }
  auto count_rows = [](const std::string& text) {
    std::size_t n = 0;
    for (const auto& l : split_lines(text)) n += trim(l).empty() ? 0 : 1;
    return n;
  };
  EXPECT_EQ(count_rows(read_file(dir.str("run/reports/report.jsonl"))), 1u);

  // Without --resume the directory is protected.
  EXPECT_THROW(eval_with(eval_config(false), ds, dir.str("run"), false), Error);

  EvalReport r = eval_with(eval_config(false), ds, dir.str("run"), true);
  ASSERT_EQ(r.rows.size(), 3u);
  std::set<std::string> ids;
  for (const auto& row : r.rows) ids.insert(row.question_id);
  EXPECT_EQ(ids.size(), 3u);
  EXPECT_NEAR(*r.accuracy, 2.0 / 3.0, 1e-12);
  EXPECT_EQ(count_rows(read_file(dir.str("run/checkpoints/completed.jsonl"))), 3u);
  EXPECT_EQ(count_rows(read_file(dir.str("run/reports/rows.jsonl"))), 3u);
}

}  // namespace
}  // namespace dissent
