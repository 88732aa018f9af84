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

// Prints one PASS/FAIL line per acceptance criterion; exits non-zero on any
// failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dissent/aggregation.hpp"
#include "dissent/agreement.hpp"
#include "dissent/analysis.hpp"
#include "dissent/config.hpp"
#include "dissent/debate.hpp"
#include "dissent/error.hpp"
#include "dissent/evaluation.hpp"
#include "dissent/recruitment.hpp"
#include "dissent/text.hpp"
#include "test_support.hpp"

namespace {

using namespace dissent;
using Matrix = std::vector<std::vector<int>>;

struct Check {
  std::string name;
  std::function<std::string()> run;  // empty string means pass
};

nlohmann::json golden_document() {
  return nlohmann::json::parse(testing::read_file(testing::data_path("golden_config.json")));
}

PipelineResult run_document(const nlohmann::json& doc, const Question& q) {
  RunConfig config = parse_run_config(doc, DISSENT_TEST_DATA_DIR);
  Gateway gateway(config.pipeline.run_seed);
  gateway.set_sleeper([](std::chrono::milliseconds) {});
  ToolRegistry registry;
  config.build(gateway, registry);
  return run_pipeline(gateway, registry, config.pipeline, q);
}

std::string golden_determinism() {
  const std::string pinned = testing::read_file(testing::data_path("golden_transcript.jsonl"));
  const Question q = testing::golden_question();
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 20; ++i) {
    if (testing::run_scenario("golden", q).transcript.to_jsonl() != pinned) {
      return "run " + std::to_string(i) + " differs from the pinned transcript";
    }
  }
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start).count();
  if (ms >= 5000) return "20 runs took " + std::to_string(ms) + " ms";
  return {};
}

std::string agreement_matrices() {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t rows = 1 + rng() % 8, cols = 1 + rng() % 10;
    Matrix m(rows, std::vector<int>(cols));
    for (auto& row : m) {
      for (auto& b : row) b = static_cast<int>(rng() & 1U);
    }
    AgreementScores s = aggregate_scores(m);
    std::vector<std::size_t> perm(cols);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix permuted = m, ones = m, zeros = m;
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) permuted[i][j] = m[i][perm[j]];
      ones[i].push_back(1);
      zeros[i].push_back(0);
    }
    AgreementScores p = aggregate_scores(permuted);
    AgreementScores up = aggregate_scores(ones), down = aggregate_scores(zeros);
    for (std::size_t i = 0; i < rows; ++i) {
      std::int64_t sum = std::accumulate(m[i].begin(), m[i].end(), std::int64_t{0});
      if (!(s.score(i) == Rational{sum, static_cast<std::int64_t>(cols)})) {
        return "row mean is not the exact rational at trial " + std::to_string(trial);
      }
      if (!(p.score(i) == s.score(i))) return "column permutation changed a score";
      if (up.mean(i) < s.mean(i) || down.mean(i) > s.mean(i)) return "monotonicity violated";
    }
  }
  return {};
}

std::string grouping_multisets() {
  static const std::vector<std::string> vocab = {"Cat", "cat.", "the cat", "Dog", "dog!",
                                                 "a bird", "Bird", "fish", "  FISH  "};
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10000; ++trial) {
    std::size_t n = 1 + rng() % 7;
    std::vector<AgentAnswer> answers(n);
    for (std::size_t i = 0; i < n; ++i) {
      answers[i].agent_id = "Agent " + std::to_string(i + 1);
      answers[i].answer = vocab[rng() % vocab.size()];
    }
    GroupedSolutions g = group_solutions(answers, GroupingStage::kInitial);
    std::size_t total = 0;
    std::set<std::string> canon;
    std::map<std::string, std::size_t> counts;
    for (const auto& grp : g.groups) {
      total += grp.supporter_count();
      canon.insert(grp.canonical_answer);
      counts[grp.canonical_answer] = grp.supporter_count();
    }
    if (total != n) return "supporter counts do not sum to the agent count";
    if (canon.size() != g.groups.size()) return "canonical answers are not distinct";
    std::map<std::string, std::size_t> expected;
    for (const auto& a : answers) ++expected[normalize_answer(a.answer)];
    if (expected != counts) return "groups do not match normalized answer counts";

    std::shuffle(answers.begin(), answers.end(), rng);
    GroupedSolutions again = group_solutions(answers, GroupingStage::kInitial);
    std::map<std::string, std::size_t> shuffled;
    for (const auto& grp : again.groups) shuffled[grp.canonical_answer] = grp.supporter_count();
    if (shuffled != counts) return "grouping depends on agent order";
  }
  return {};
}

std::string recruiter_fuzz() {
  ToolRegistry registry = testing::builtin_registry();
  std::mt19937_64 rng(77);
  for (int i = 0; i < 10000; ++i) {
    std::string doc = testing::fuzz_recruiter_document(rng);
    try {
      ValidatedPlan v = validate_tool_plan(doc, registry);
      if (!testing::plan_respects_arity(v.plan, registry)) {
        return "accepted plan violates arity: " + doc;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNotAStructuredDocument &&
          e.code() != ErrorCode::kMissingExpertsKey) {
        return std::string("unexpected error: ") + e.what();
      }
    } catch (const std::exception& e) {
      return std::string("unexpected exception: ") + e.what();
    }
  }
  return {};
}

std::string ece_properties() {
  std::vector<CalibrationRecord> calibrated;
  for (int k = 0; k < 4; ++k) calibrated.push_back({0.25, k == 0 ? 1 : 0});
  for (int k = 0; k < 5; ++k) calibrated.push_back({0.6, k < 3 ? 1 : 0});
  for (int k = 0; k < 2; ++k) calibrated.push_back({1.0, 1});
  if (std::abs(compute_ece(calibrated)) > 1e-12) return "perfectly calibrated ECE is not 0";

  // One bin: |mean confidence - accuracy|.
  std::vector<CalibrationRecord> one_bin = {{0.81, 1}, {0.85, 0}, {0.89, 1}, {0.83, 0}};
  double closed = std::abs((0.81 + 0.85 + 0.89 + 0.83) / 4.0 - 0.5);
  if (std::abs(compute_ece(one_bin) - closed) > 1e-12) return "single-bin ECE mismatch";

  std::mt19937_64 rng(5);
  std::vector<CalibrationRecord> rec;
  for (int i = 0; i < 200; ++i) {
    rec.push_back({static_cast<double>(rng() % 1001) / 1000.0, static_cast<int>(rng() & 1U)});
  }
  auto doubled = rec;
  doubled.insert(doubled.end(), rec.begin(), rec.end());
  if (std::abs(compute_ece(rec) - compute_ece(doubled)) > 1e-12) return "duplication changed ECE";
  return {};
}

double lcs_f1_oracle(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<int>> t(a.size() + 1, std::vector<int>(b.size() + 1, 0));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      t[i + 1][j + 1] = a[i] == b[j] ? t[i][j] + 1 : std::max(t[i][j + 1], t[i + 1][j]);
    }
  }
  double l = t[a.size()][b.size()];
  if (l == 0.0) return 0.0;
  double p = l / static_cast<double>(b.size()), r = l / static_cast<double>(a.size());
  return 2.0 * p * r / (p + r);
}

std::string rouge_l_oracle() {
  static const std::vector<std::string> vocab = {"the", "cat", "sat", "on", "mat", "a", "dog", "red"};
  std::mt19937_64 rng(500);
  int pairs = 0;
  while (pairs < 500) {
    std::vector<std::string> a(1 + rng() % 20), b(1 + rng() % 20);
    for (auto& t : a) t = vocab[rng() % vocab.size()];
    for (auto& t : b) t = vocab[rng() % vocab.size()];
    if (std::abs(rouge_l_f1(a, b) - lcs_f1_oracle(a, b)) > 1e-9) return "LCS F1 mismatch";
    ++pairs;
  }
  OverlapMetrics same = compute_overlap("The cat sat on the mat.", "the cat sat on the mat");
  if (same.rouge1 != 1.0 || same.rouge2 != 1.0 || same.rougeL != 1.0 || same.jaccard != 1.0) {
    return "identical texts do not score 1";
  }
  OverlapMetrics apart = compute_overlap("red blue green", "cat dog");
  if (apart.rouge1 != 0.0 || apart.rouge2 != 0.0 || apart.rougeL != 0.0 || apart.jaccard != 0.0) {
    return "disjoint texts do not score 0";
  }
  return {};
}

std::string direct_answer_table() {
  const auto& cases = testing::direct_answer_cases();
  if (cases.size() < 30) return "table has fewer than 30 cases";
  for (const auto& c : cases) {
    double expected = std::min(1.0, c.matches / 3.0);
    if (std::abs(score_direct_answer(c.prediction, c.gold) - expected) > 1e-12) {
      return "score mismatch for '" + c.prediction + "'";
    }
  }
  return {};
}

std::size_t contacted_count(const Transcript& t, const std::string& endpoint) {
  auto seen = testing::contacted_endpoints(t);
  return static_cast<std::size_t>(std::count(seen.begin(), seen.end(), endpoint));
}

std::string ablation_and_fallback() {
  nlohmann::json unanimous = golden_document();
  for (auto& e : unanimous["endpoints"]) {
    if (e["id"] == "answerer-c") e["script"] = {"Answer: Volvo\nReasoning: logo\nConfidence: 0.7"};
  }
  PipelineResult u = run_document(unanimous, testing::golden_question());
  for (const char* id : {"recruiter", "grounder", "ocr", "scorer"}) {
    if (contacted_count(u.transcript, id) != 0) return std::string("unanimous run contacted ") + id;
  }
  if (!u.tool_calls.empty()) return "unanimous run made tool calls";

  nlohmann::json no_tools = golden_document();
  no_tools["ablations"] = {{"no_tools", true}};
  PipelineResult n = run_document(no_tools, testing::golden_question());
  std::vector<std::string> expected = {"aggregator", "answerer-a", "answerer-b", "answerer-c"};
  if (testing::contacted_endpoints(n.transcript) != expected) return "no_tools contacted extra endpoints";

  std::mt19937_64 rng(1000);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t n_groups = 1 + rng() % 5;
    std::vector<AgentAnswer> answers;
    std::vector<std::size_t> sizes(n_groups);
    for (std::size_t g = 0; g < n_groups; ++g) {
      sizes[g] = 1 + rng() % 3;
      for (std::size_t k = 0; k < sizes[g]; ++k) {
        AgentAnswer a;
        a.agent_id = "Agent " + std::to_string(answers.size() + 1);
        a.answer = "answer" + std::to_string(g);
        answers.push_back(a);
      }
    }
    std::uint64_t seed = rng();
    GroupedSolutions grouped = group_solutions(answers, GroupingStage::kFinal);
    std::size_t best = *std::max_element(sizes.begin(), sizes.end());
    std::vector<std::size_t> tied;
    for (std::size_t g = 0; g < n_groups; ++g) {
      if (sizes[g] == best) tied.push_back(g);
    }
    std::size_t pick = tied.size() == 1 ? tied[0] : tied[std::mt19937_64(seed)() % tied.size()];
    FinalAnswer f = majority_vote(grouped, seed);
    if (f.answer != "answer" + std::to_string(pick)) return "majority vote disagrees with the oracle";
    if (std::abs(f.confidence - static_cast<double>(best) / answers.size()) > 1e-12) {
      return "majority confidence is not the winning share";
    }
  }
  return {};
}

std::string meter_example() {
  PipelineResult r = testing::run_scenario("meter", testing::meter_question());
  if (normalize_answer(r.final_answer.answer) != "weekends") {
    return "final answer was '" + r.final_answer.answer + "'";
  }
  return {};
}

std::string unit_suite() {
  std::stringstream paths(DISSENT_SUITE);
  std::string path;
  auto start = std::chrono::steady_clock::now();
  int count = 0;
  while (std::getline(paths, path, '|')) {
    if (path.empty()) continue;
    ++count;
    std::string cmd = "\"" + path + "\" > /dev/null 2>&1";
    if (std::system(cmd.c_str()) != 0) return "failed: " + path;
  }
  auto s = std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - start)
               .count();
  if (count == 0) return "no unit binaries configured";
  if (s >= 60) return "suite took " + std::to_string(s) + " s";
  return {};
}

}  // namespace

int main() {
  const std::vector<Check> checks = {
      {"golden transcript byte-identical over 20 runs", golden_determinism},
      {"agreement scores on 1000 random matrices", agreement_matrices},
      {"grouping invariants on 10000 multisets", grouping_multisets},
      {"recruiter validator on 10000 fuzzed documents", recruiter_fuzz},
      {"calibration error properties", ece_properties},
      {"ROUGE-L against a full-table LCS oracle", rouge_l_oracle},
      {"direct-answer scoring on the hand-counted table", direct_answer_table},
      {"unanimity, no_tools audit and seeded majority vote", ablation_and_fallback},
      {"meter example answers weekends", meter_example},
      {"unit suite green within 60 s", unit_suite},
  };
  int failures = 0;
  int index = 1;
  for (const auto& c : checks) {
    std::string why;
    try {
      why = c.run();
    } catch (const std::exception& e) {
      why = std::string("exception: ") + e.what();
    }
    std::cout << (why.empty() ? "PASS" : "FAIL") << " [" << index++ << "] " << c.name;
    if (!why.empty()) std::cout << ": " << why;
    std::cout << "\n";
    failures += why.empty() ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
