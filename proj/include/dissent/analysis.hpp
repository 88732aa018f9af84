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

#include "dissent/evaluation.hpp"
#include "dissent/transcript.hpp"

namespace dissent {

struct OverlapMetrics {
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rougeL = 0.0;
  double jaccard = 0.0;
  bool empty_input = false;  // both sides had no tokens
};

// Lowercase, drop ASCII punctuation, split on whitespace.
std::vector<std::string> overlap_tokens(std::string_view text);

// F1 of clipped n-gram matches. When neither side has an n-gram of this
// order the score is 1 for identical non-empty sequences and 0 otherwise.
double rouge_n_f1(std::span<const std::string> a, std::span<const std::string> b, int n);
double rouge_l_f1(std::span<const std::string> a, std::span<const std::string> b);
std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

OverlapMetrics compute_overlap(std::string_view before, std::string_view after);

struct CalibrationRecord {
  double confidence = 0.0;
  int correct = 0;
};

// Equal-width bins over [0,1]; a confidence of exactly 1 falls in the last
// bin. Throws Error(kInvalidArgument) on empty input or out-of-range values.
double compute_ece(std::span<const CalibrationRecord> records, int bin_count = 10);

struct ToolDistribution {
  std::map<std::string, std::int64_t> calls;
  std::map<std::string, std::size_t> questions;  // questions calling the tool
  std::size_t questions_with_tools = 0;
  std::size_t questions_total = 0;
  std::int64_t total_calls = 0;

  double fraction(const std::string& tool) const;
};

ToolDistribution tool_distribution(std::span<const Transcript> transcripts);

// Mean size of each question's first tool plan; questions without a plan
// count as 0.
double disagreement_rate(std::span<const Transcript> transcripts);

struct TokenTotals {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::int64_t calls = 0;
  std::map<std::string, std::int64_t> completion_by_stage;
};

TokenTotals token_totals(std::span<const Transcript> transcripts);

struct AgentOverlap {
  std::string question_id;
  std::string agent_id;
  OverlapMetrics metrics;
};

// Per agent: its accepted initial reply with the first round's tool evidence
// appended, against its accepted first discussion reply.
std::vector<AgentOverlap> round_overlaps(std::span<const Transcript> transcripts);

struct AnalysisSummary {
  std::size_t questions = 0;
  ToolDistribution tools;
  double disagreement_rate = 0.0;
  TokenTotals tokens;
  std::vector<AgentOverlap> overlaps;
  OverlapMetrics mean_overlap;
  std::optional<double> ece;  // needs scored report rows
  std::size_t calibration_records = 0;

  nlohmann::json to_json() const;
};

// A report row counts as correct when its score is at least 0.5.
std::vector<CalibrationRecord> calibration_records(std::span<const ReportRow> rows);

AnalysisSummary analyze(std::span<const Transcript> transcripts,
                        std::span<const ReportRow> rows = {}, int bin_count = 10);

// Accepts a run directory (reads transcripts/ and reports/report.jsonl) or a
// plain directory of transcript files. Files are read in name order.
std::vector<Transcript> load_transcripts(const std::string& dir);
std::vector<ReportRow> load_report_rows(const std::string& dir);

// Writes summary.json plus tool_distribution.csv, overlap.csv and tokens.csv.
void write_analysis(const AnalysisSummary& summary, const std::string& out_dir);

}  // namespace dissent
