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

#include "dissent/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dissent/error.hpp"
#include "dissent/text.hpp"

namespace fs = std::filesystem;

namespace dissent {

namespace {

double f1(double matches, std::size_t a_total, std::size_t b_total) {
  if (matches <= 0.0 || a_total == 0 || b_total == 0) return 0.0;
  double p = matches / static_cast<double>(a_total);
  double r = matches / static_cast<double>(b_total);
  return 2.0 * p * r / (p + r);
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(std::span<const std::string> t, int n) {
  std::map<std::vector<std::string>, std::size_t> out;
  if (static_cast<int>(t.size()) < n) return out;
  for (std::size_t i = 0; i + n <= t.size(); ++i) {
    out[std::vector<std::string>(t.begin() + i, t.begin() + i + n)] += 1;
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
}

nlohmann::json overlap_json(const OverlapMetrics& m) {
  return {{"rouge1", m.rouge1}, {"rouge2", m.rouge2}, {"rougeL", m.rougeL},
          {"jaccard", m.jaccard}, {"empty_input", m.empty_input}};
}

}  // namespace

std::vector<std::string> overlap_tokens(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char c : text) {
    auto u = static_cast<unsigned char>(c);
    if (std::ispunct(u)) continue;
    cleaned.push_back(static_cast<char>(std::tolower(u)));
  }
  return split_whitespace(cleaned);
}

double rouge_n_f1(std::span<const std::string> a, std::span<const std::string> b, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n-gram order must be >= 1");
  auto ca = ngram_counts(a, n);
  auto cb = ngram_counts(b, n);
  if (ca.empty() && cb.empty()) {
    return !a.empty() && std::equal(a.begin(), a.end(), b.begin(), b.end()) ? 1.0 : 0.0;
  }
  std::size_t ta = 0, tb = 0, match = 0;
  for (const auto& [g, c] : ca) ta += c;
  for (const auto& [g, c] : cb) {
    tb += c;
    auto it = ca.find(g);
    if (it != ca.end()) match += std::min(c, it->second);
  }
  return f1(static_cast<double>(match), ta, tb);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l_f1(std::span<const std::string> a, std::span<const std::string> b) {
  return f1(static_cast<double>(lcs_length(a, b)), a.size(), b.size());
}

OverlapMetrics compute_overlap(std::string_view before, std::string_view after) {
  OverlapMetrics m;
  auto a = overlap_tokens(before);
  auto b = overlap_tokens(after);
  if (a.empty() && b.empty()) {
    m.empty_input = true;
    return m;
  }
  m.rouge1 = rouge_n_f1(a, b, 1);
  m.rouge2 = rouge_n_f1(a, b, 2);
  m.rougeL = rouge_l_f1(a, b);
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t inter = 0;
  for (const auto& t : sa) inter += sb.count(t);
  std::size_t uni = sa.size() + sb.size() - inter;
  m.jaccard = uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
  return m;
}

double compute_ece(std::span<const CalibrationRecord> records, int bin_count) {
  if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "ECE needs at least one record");
  if (bin_count < 1) throw Error(ErrorCode::kInvalidArgument, "bin_count must be >= 1");
  std::vector<double> conf_sum(bin_count, 0.0), acc_sum(bin_count, 0.0);
  std::vector<std::size_t> count(bin_count, 0);
  for (const auto& r : records) {
    if (!(r.confidence >= 0.0 && r.confidence <= 1.0)) {
      throw Error(ErrorCode::kInvalidArgument, "confidence outside [0,1]");
    }
    if (r.correct != 0 && r.correct != 1) {
      throw Error(ErrorCode::kInvalidArgument, "correctness must be 0 or 1");
    }
    int b = std::min(bin_count - 1, static_cast<int>(std::floor(r.confidence * bin_count)));
    conf_sum[b] += r.confidence;
    acc_sum[b] += r.correct;
    count[b] += 1;
  }
  const double n = static_cast<double>(records.size());
  double ece = 0.0;
  for (int b = 0; b < bin_count; ++b) {
    if (count[b] == 0) continue;
    double k = static_cast<double>(count[b]);
    ece += (k / n) * std::abs(acc_sum[b] / k - conf_sum[b] / k);
  }
  return ece;
}

double ToolDistribution::fraction(const std::string& tool) const {
  auto it = questions.find(tool);
  if (it == questions.end() || questions_with_tools == 0) return 0.0;
  return static_cast<double>(it->second) / static_cast<double>(questions_with_tools);
}

ToolDistribution tool_distribution(std::span<const Transcript> transcripts) {
  ToolDistribution out;
  out.questions_total = transcripts.size();
  for (const auto& t : transcripts) {
    std::set<std::string> used;
    for (const auto& e : t.events()) {
      if (e.value("type", "") != "tool") continue;
      std::string name = e.value("tool", "");
      out.calls[name] += 1;
      out.total_calls += 1;
      used.insert(name);
    }
    for (const auto& name : used) out.questions[name] += 1;
    if (!used.empty()) out.questions_with_tools += 1;
  }
  return out;
}

double disagreement_rate(std::span<const Transcript> transcripts) {
  if (transcripts.empty()) return 0.0;
  double total = 0.0;
  for (const auto& t : transcripts) {
    for (const auto& e : t.events()) {
      if (e.value("type", "") != "plan") continue;
      const auto& inv = e.contains("invocations") ? e["invocations"] : nlohmann::json::array();
      total += static_cast<double>(inv.size());
      break;
    }
  }
  return total / static_cast<double>(transcripts.size());
}

TokenTotals token_totals(std::span<const Transcript> transcripts) {
  TokenTotals out;
  for (const auto& t : transcripts) {
    for (const auto& e : t.events()) {
      if (e.value("type", "") != "call") continue;
      auto completion = e.value("completion_tokens", std::int64_t{0});
      out.calls += 1;
      out.prompt_tokens += e.value("prompt_tokens", std::int64_t{0});
      out.completion_tokens += completion;
      out.completion_by_stage[e.value("stage", "")] += completion;
    }
  }
  return out;
}

std::vector<AgentOverlap> round_overlaps(std::span<const Transcript> transcripts) {
  std::vector<AgentOverlap> out;
  for (const auto& t : transcripts) {
    std::map<std::string, std::string> initial, discussed;
    std::vector<std::string> order;
    std::string evidence;
    std::string qid;
    for (const auto& e : t.events()) {
      const std::string type = e.value("type", "");
      const int round = e.value("round", 0);
      if (qid.empty()) qid = e.value("question_id", "");
      if (type == "call") {
        const std::string stage = e.value("stage", "");
        const std::string actor = e.value("actor", "");
        // The last reply of a reprompt sequence is the accepted one.
        if (stage == "initial" && round == 0) {
          if (!initial.count(actor)) order.push_back(actor);
          initial[actor] = e.value("response", "");
        } else if (stage == "discuss" && round == 1) {
          discussed[actor] = e.value("response", "");
        }
      } else if (type == "tool" && round == 1 && e.value("succeeded", false)) {
        evidence += "\n" + e.value("evidence", "");
      }
    }
    for (const auto& agent : order) {
      auto it = discussed.find(agent);
      if (it == discussed.end()) continue;
      out.push_back({qid, agent, compute_overlap(initial[agent] + evidence, it->second)});
    }
  }
  return out;
}

std::vector<CalibrationRecord> calibration_records(std::span<const ReportRow> rows) {
  std::vector<CalibrationRecord> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({std::clamp(r.confidence, 0.0, 1.0), r.score >= 0.5 ? 1 : 0});
  }
  return out;
}

AnalysisSummary analyze(std::span<const Transcript> transcripts, std::span<const ReportRow> rows,
                        int bin_count) {
  AnalysisSummary s;
  s.questions = transcripts.size();
  s.tools = tool_distribution(transcripts);
  s.disagreement_rate = disagreement_rate(transcripts);
  s.tokens = token_totals(transcripts);
  s.overlaps = round_overlaps(transcripts);
  std::size_t counted = 0;
  for (const auto& o : s.overlaps) {
    if (o.metrics.empty_input) continue;
    s.mean_overlap.rouge1 += o.metrics.rouge1;
    s.mean_overlap.rouge2 += o.metrics.rouge2;
    s.mean_overlap.rougeL += o.metrics.rougeL;
    s.mean_overlap.jaccard += o.metrics.jaccard;
    ++counted;
  }
  if (counted > 0) {
    double k = static_cast<double>(counted);
    s.mean_overlap.rouge1 /= k;
    s.mean_overlap.rouge2 /= k;
    s.mean_overlap.rougeL /= k;
    s.mean_overlap.jaccard /= k;
  } else {
    s.mean_overlap.empty_input = true;
  }
  auto records = calibration_records(rows);
  s.calibration_records = records.size();
  if (!records.empty()) s.ece = compute_ece(records, bin_count);
  return s;
}

nlohmann::json AnalysisSummary::to_json() const {
  nlohmann::json dist = nlohmann::json::object();
  for (const auto& [name, n] : tools.calls) {
    dist[name] = {{"calls", n}, {"questions", tools.questions.at(name)},
                  {"fraction_of_tool_questions", tools.fraction(name)}};
  }
  nlohmann::json by_stage = nlohmann::json::object();
  for (const auto& [stage, n] : tokens.completion_by_stage) by_stage[stage] = n;
  return {{"questions", questions},
          {"tool_distribution",
           {{"tools", dist},
            {"total_calls", tools.total_calls},
            {"questions_with_tools", tools.questions_with_tools}}},
          {"disagreement_rate", disagreement_rate},
          {"tokens",
           {{"calls", tokens.calls},
            {"prompt_tokens", tokens.prompt_tokens},
            {"completion_tokens", tokens.completion_tokens},
            {"completion_by_stage", by_stage},
            {"mean_completion_per_question",
             questions == 0 ? 0.0
                            : static_cast<double>(tokens.completion_tokens) /
                                  static_cast<double>(questions)}}},
          {"overlap", {{"mean", overlap_json(mean_overlap)}, {"pairs", overlaps.size()}}},
          {"calibration",
           {{"ece", ece ? nlohmann::json(*ece) : nlohmann::json(nullptr)},
            {"records", calibration_records}}}};
}

std::vector<Transcript> load_transcripts(const std::string& dir) {
  fs::path root(dir);
  if (fs::is_directory(root / "transcripts")) root /= "transcripts";
  if (!fs::is_directory(root)) throw Error(ErrorCode::kIo, "not a directory: '" + dir + "'");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Transcript> out;
  for (const auto& f : files) out.push_back(Transcript::load(f.string()));
  return out;
}

std::vector<ReportRow> load_report_rows(const std::string& dir) {
  fs::path path = fs::path(dir) / "reports" / "report.jsonl";
  std::vector<ReportRow> out;
  if (!fs::exists(path)) return out;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::kRecordValidation, "malformed report row in '" + path.string() + "'");
    }
    out.push_back(ReportRow::from_json(j));
  }
  return out;
}

void write_analysis(const AnalysisSummary& summary, const std::string& out_dir) {
  fs::path root(out_dir);
  fs::create_directories(root);
  write_text(root / "summary.json", summary.to_json().dump(2) + "\n");

  std::string tools = "tool,calls,questions,fraction_of_tool_questions\n";
  for (const auto& [name, n] : summary.tools.calls) {
    tools += csv_field(name) + "," + std::to_string(n) + "," +
             std::to_string(summary.tools.questions.at(name)) + "," +
             format_real(summary.tools.fraction(name)) + "\n";
  }
  write_text(root / "tool_distribution.csv", tools);

  std::string overlap = "question_id,agent,rouge1,rouge2,rougeL,jaccard,empty_input\n";
  for (const auto& o : summary.overlaps) {
    overlap += csv_field(o.question_id) + "," + csv_field(o.agent_id) + "," +
               format_real(o.metrics.rouge1) + "," + format_real(o.metrics.rouge2) + "," +
               format_real(o.metrics.rougeL) + "," + format_real(o.metrics.jaccard) + "," +
               (o.metrics.empty_input ? "true" : "false") + "\n";
  }
  write_text(root / "overlap.csv", overlap);

  std::string tokens = "stage,completion_tokens\n";
  for (const auto& [stage, n] : summary.tokens.completion_by_stage) {
    tokens += csv_field(stage) + "," + std::to_string(n) + "\n";
  }
  write_text(root / "tokens.csv", tokens);
}

}  // namespace dissent
