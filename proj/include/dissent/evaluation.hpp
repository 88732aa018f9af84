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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissent/debate.hpp"

namespace dissent {

enum class ExampleKind { kMultipleChoice, kDirectAnswer };

struct Example {
  std::string question_id;
  std::string question;
  std::string image_path;  // resolved against the dataset file's directory
  ExampleKind kind = ExampleKind::kMultipleChoice;
  std::vector<std::string> choices;
  int gold_index = -1;
  std::vector<std::string> gold_answers;
  std::optional<std::string> category;
};

// JSONL records {question_id, question, image, kind, choices?, gold,
// category?}; kind is "multiple_choice" or "direct_answer". Throws
// Error(kRecordValidation) naming the 1-based line.
std::vector<Example> load_dataset(const std::string& path);
Example parse_example(const nlohmann::json& record, std::size_t line_no,
                      const std::string& base_dir = {});

// Question text shown to the agents; choices are listed as "A. ...".
std::string render_question(const Example& example);

struct ChoiceScore {
  int score = 0;
  bool unparsed_choice = false;
  std::optional<int> matched_index;
};

// Matches a choice letter ("A", "Option A", "(a)", "a) ...") or the full
// normalized choice text.
ChoiceScore score_multiple_choice(std::string_view prediction, const Example& example);

// min(1, matches / 3) over references equal to the prediction after
// normalize_direct_answer.
double score_direct_answer(std::string_view prediction, std::span<const std::string> gold);

struct ReportRow {
  std::string question_id;
  std::string prediction;
  double score = 0.0;
  double confidence = 0.0;
  std::string method;
  std::optional<std::string> category;
  bool unparsed_choice = false;
  bool off_menu = false;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  nlohmann::json to_json() const;
  static ReportRow from_json(const nlohmann::json& j);
};

struct CategoryStats {
  double accuracy = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  std::vector<ReportRow> rows;  // sorted by question_id
  std::optional<double> accuracy;  // undefined for an empty run
  std::map<std::string, CategoryStats> per_category;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  bool complete = true;

  nlohmann::json summary_json() const;
};

EvalReport summarize(std::vector<ReportRow> rows);

struct EvalOptions {
  std::string run_dir;
  bool resume = false;
  int workers = 1;
};

// Runs every example not yet checkpointed, writing under run_dir:
//   transcripts/<question_id>.jsonl, reports/rows.jsonl (append-only),
//   reports/report.jsonl (sorted), reports/summary.json,
//   checkpoints/completed.jsonl.
// An aborted question stops dispatch; the partial report is written and
// Error(kAbortedRun) is thrown.
EvalReport run_eval(std::span<const Example> dataset, Gateway& gateway,
                    const ToolRegistry& registry, const PipelineConfig& config,
                    const EvalOptions& options);

ReportRow score_prediction(const Example& example, const PipelineResult& result);

}  // namespace dissent
