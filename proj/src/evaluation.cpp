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

#include "dissent/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "dissent/error.hpp"
#include "dissent/text.hpp"

namespace fs = std::filesystem;

namespace dissent {

namespace {

Error record_error(std::size_t line_no, const std::string& why) {
  return Error(ErrorCode::kRecordValidation, "line " + std::to_string(line_no) + ": " + why);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void append_line(const fs::path& path, const std::string& line) {
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to '" + path.string() + "'");
  out << line << '\n';
  out.flush();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << text;
}

std::string safe_file_stem(const std::string& id) {
  std::string out;
  for (char c : id) {
    bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "_" : out;
}

}  // namespace

Example parse_example(const nlohmann::json& record, std::size_t line_no,
                      const std::string& base_dir) {
  if (!record.is_object()) throw record_error(line_no, "record is not a JSON object");
  auto text_field = [&](const char* key, bool required) -> std::optional<std::string> {
    auto it = record.find(key);
    if (it == record.end() || it->is_null()) {
      if (required) throw record_error(line_no, std::string("missing field \"") + key + "\"");
      return std::nullopt;
    }
    if (it->is_number_integer() && std::string_view(key) == "question_id") {
      return it->dump();
    }
    if (!it->is_string()) throw record_error(line_no, std::string("\"") + key + "\" must be a string");
    return it->get<std::string>();
  };

  Example ex;
  ex.question_id = *text_field("question_id", true);
  if (ex.question_id.empty()) throw record_error(line_no, "\"question_id\" is empty");
  ex.question = *text_field("question", true);
  std::string image = *text_field("image", true);
  if (!image.empty() && !base_dir.empty() && fs::path(image).is_relative()) {
    image = (fs::path(base_dir) / image).lexically_normal().string();
  }
  ex.image_path = image;
  ex.category = text_field("category", false);

  std::string kind = *text_field("kind", true);
  if (!record.contains("gold")) throw record_error(line_no, "missing field \"gold\"");
  const auto& gold = record["gold"];
  if (kind == "multiple_choice") {
    ex.kind = ExampleKind::kMultipleChoice;
    if (!record.contains("choices") || !record["choices"].is_array() || record["choices"].empty()) {
      throw record_error(line_no, "multiple_choice records need a non-empty \"choices\" list");
    }
    for (const auto& c : record["choices"]) {
      if (!c.is_string()) throw record_error(line_no, "choices must be strings");
      ex.choices.push_back(c.get<std::string>());
    }
    if (!gold.is_number_integer()) throw record_error(line_no, "\"gold\" must be a choice index");
    auto idx = gold.get<std::int64_t>();
    if (idx < 0 || idx >= static_cast<std::int64_t>(ex.choices.size())) {
      throw record_error(line_no, "gold index " + std::to_string(idx) + " out of range for " +
                                      std::to_string(ex.choices.size()) + " choices");
    }
    ex.gold_index = static_cast<int>(idx);
  } else if (kind == "direct_answer") {
    ex.kind = ExampleKind::kDirectAnswer;
    if (!gold.is_array() || gold.empty()) {
      throw record_error(line_no, "direct_answer records need a non-empty \"gold\" list");
    }
    for (const auto& g : gold) {
      if (!g.is_string()) throw record_error(line_no, "gold answers must be strings");
      ex.gold_answers.push_back(g.get<std::string>());
    }
  } else {
    throw record_error(line_no, "unknown kind '" + kind + "'");
  }
  return ex;
}

std::vector<Example> load_dataset(const std::string& path) {
  std::string text = read_file(path);
  std::string base_dir = fs::path(path).parent_path().string();
  std::vector<Example> out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto record = nlohmann::json::parse(line, nullptr, false);
    if (record.is_discarded()) throw record_error(line_no, "not valid JSON");
    Example ex = parse_example(record, line_no, base_dir);
    if (!ids.insert(ex.question_id).second) {
      throw record_error(line_no, "duplicate question_id '" + ex.question_id + "'");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::string render_question(const Example& example) {
  if (example.kind != ExampleKind::kMultipleChoice) return example.question;
  std::string out = example.question + "\nOptions:";
  for (std::size_t i = 0; i < example.choices.size(); ++i) {
    out += "\n";
    out.push_back(static_cast<char>('A' + i));
    out += ". " + example.choices[i];
  }
  return out;
}

ChoiceScore score_multiple_choice(std::string_view prediction, const Example& example) {
  ChoiceScore out;
  if (example.kind != ExampleKind::kMultipleChoice) {
    throw Error(ErrorCode::kInvalidArgument, "example is not multiple choice");
  }
  std::string pred = normalize_answer(prediction);
  for (std::size_t i = 0; i < example.choices.size(); ++i) {
    if (!pred.empty() && pred == normalize_answer(example.choices[i])) {
      out.matched_index = static_cast<int>(i);
      break;
    }
  }
  if (!out.matched_index) {
    // "a", "(a)", "a)", "option a", "choice (b)", "a. some text"
    static const std::regex kLetter(R"(^(?:(?:option|choice|answer)\s*)?\(?([a-z])\)?(?:[.:)]\s*.*)?$)");
    std::smatch m;
    if (std::regex_match(pred, m, kLetter)) {
      int idx = m[1].str()[0] - 'a';
      if (idx >= 0 && idx < static_cast<int>(example.choices.size())) out.matched_index = idx;
    }
  }
  if (!out.matched_index) {
    out.unparsed_choice = true;
    return out;
  }
  out.score = *out.matched_index == example.gold_index ? 1 : 0;
  return out;
}

double score_direct_answer(std::string_view prediction, std::span<const std::string> gold) {
  if (gold.empty()) throw Error(ErrorCode::kInvalidArgument, "direct-answer scoring needs references");
  std::string pred = normalize_direct_answer(prediction);
  std::size_t matches = 0;
  for (const auto& ref : gold) {
    if (normalize_direct_answer(ref) == pred) ++matches;
  }
  return std::min(1.0, static_cast<double>(matches) / 3.0);
}

nlohmann::json ReportRow::to_json() const {
  return {{"question_id", question_id},
          {"prediction", prediction},
          {"score", score},
          {"confidence", confidence},
          {"method", method},
          {"category", category ? nlohmann::json(*category) : nlohmann::json(nullptr)},
          {"unparsed_choice", unparsed_choice},
          {"off_menu", off_menu},
          {"prompt_tokens", prompt_tokens},
          {"completion_tokens", completion_tokens}};
}

ReportRow ReportRow::from_json(const nlohmann::json& j) {
  ReportRow r;
  r.question_id = j.at("question_id").get<std::string>();
  r.prediction = j.value("prediction", "");
  r.score = j.value("score", 0.0);
  r.confidence = j.value("confidence", 0.0);
  r.method = j.value("method", "");
  if (j.contains("category") && j["category"].is_string()) r.category = j["category"].get<std::string>();
  r.unparsed_choice = j.value("unparsed_choice", false);
  r.off_menu = j.value("off_menu", false);
  r.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  r.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  return r;
}

nlohmann::json EvalReport::summary_json() const {
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [name, stats] : per_category) {
    cats[name] = {{"accuracy", stats.accuracy}, {"count", stats.count}};
  }
  return {{"examples", rows.size()},
          {"accuracy", accuracy ? nlohmann::json(*accuracy) : nlohmann::json(nullptr)},
          {"per_category", cats},
          {"prompt_tokens", prompt_tokens},
          {"completion_tokens", completion_tokens},
          {"total_tokens", prompt_tokens + completion_tokens},
          {"complete", complete}};
}

EvalReport summarize(std::vector<ReportRow> rows) {
  EvalReport report;
  std::sort(rows.begin(), rows.end(),
            [](const ReportRow& a, const ReportRow& b) { return a.question_id < b.question_id; });
  double total = 0.0;
  std::map<std::string, double> cat_sum;
  for (const auto& r : rows) {
    total += r.score;
    report.prompt_tokens += r.prompt_tokens;
    report.completion_tokens += r.completion_tokens;
    if (r.category) {
      cat_sum[*r.category] += r.score;
      report.per_category[*r.category].count += 1;
    }
  }
  for (auto& [name, stats] : report.per_category) {
    stats.accuracy = cat_sum[name] / static_cast<double>(stats.count);
  }
  if (!rows.empty()) report.accuracy = total / static_cast<double>(rows.size());
  report.rows = std::move(rows);
  return report;
}

ReportRow score_prediction(const Example& example, const PipelineResult& result) {
  ReportRow row;
  row.question_id = example.question_id;
  row.prediction = result.final_answer.answer;
  row.confidence = result.final_answer.confidence;
  row.method = std::string(aggregation_method_name(result.final_answer.method));
  row.category = example.category;
  row.off_menu = result.final_answer.off_menu;
  row.prompt_tokens = result.prompt_tokens;
  row.completion_tokens = result.completion_tokens;
  if (example.kind == ExampleKind::kMultipleChoice) {
    ChoiceScore s = score_multiple_choice(row.prediction, example);
    row.score = s.score;
    row.unparsed_choice = s.unparsed_choice;
  } else {
    row.score = score_direct_answer(row.prediction, example.gold_answers);
  }
  return row;
}

EvalReport run_eval(std::span<const Example> dataset, Gateway& gateway,
                    const ToolRegistry& registry, const PipelineConfig& config,
                    const EvalOptions& options) {
  validate_pipeline(config, gateway, registry);
  if (options.run_dir.empty()) throw Error(ErrorCode::kInvalidArgument, "run_dir is required");
  const fs::path root(options.run_dir);
  const fs::path transcripts = root / "transcripts";
  const fs::path reports = root / "reports";
  const fs::path checkpoints = root / "checkpoints";
  fs::create_directories(transcripts);
  fs::create_directories(reports);
  fs::create_directories(checkpoints);
  const fs::path checkpoint_file = checkpoints / "completed.jsonl";
  const fs::path rows_file = reports / "rows.jsonl";

  std::set<std::string> completed;
  if (fs::exists(checkpoint_file)) {
    if (!options.resume && fs::file_size(checkpoint_file) > 0) {
      throw Error(ErrorCode::kConfig,
                  "run directory '" + options.run_dir + "' already holds results; resume it instead");
    }
    for (const auto& line : split_lines(read_file(checkpoint_file.string()))) {
      if (trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_object() && j.contains("question_id") && j["question_id"].is_string()) {
        completed.insert(j["question_id"].get<std::string>());
      }
    }
  }
  std::map<std::string, ReportRow> rows;
  if (fs::exists(rows_file)) {
    for (const auto& line : split_lines(read_file(rows_file.string()))) {
      if (trim(line).empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (!j.is_object() || !j.contains("question_id")) continue;
      ReportRow r = ReportRow::from_json(j);
      // Rows without a checkpoint entry were interrupted mid-write.
      if (completed.count(r.question_id) != 0) rows.emplace(r.question_id, std::move(r));
    }
  }

  std::vector<const Example*> pending;
  for (const auto& ex : dataset) {
    if (completed.count(ex.question_id) == 0) pending.push_back(&ex);
  }

  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::optional<Error> failure;
  auto worker = [&] {
    while (!stop.load()) {
      std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const Example& ex = *pending[i];
      try {
        Question q{ex.question_id, render_question(ex),
                   ex.image_path.empty() ? ImagePayload{} : load_image(ex.image_path)};
        PipelineResult result = run_pipeline(gateway, registry, config, q);
        ReportRow row = score_prediction(ex, result);
        std::lock_guard lock(mu);
        result.transcript.save((transcripts / (safe_file_stem(ex.question_id) + ".jsonl")).string());
        append_line(rows_file, row.to_json().dump());
        append_line(checkpoint_file, nlohmann::json{{"question_id", ex.question_id}}.dump());
        rows.emplace(row.question_id, std::move(row));
      } catch (const Error& e) {
        std::lock_guard lock(mu);
        if (!failure) failure = Error(ErrorCode::kAbortedRun, e.what());
        stop.store(true);
      }
    }
  };
  int workers = std::max(1, options.workers);
  if (workers == 1 || pending.size() <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  std::vector<ReportRow> all;
  for (auto& kv : rows) all.push_back(kv.second);
  EvalReport report = summarize(std::move(all));
  report.complete = !failure.has_value() && report.rows.size() == dataset.size();
  std::string sorted;
  for (const auto& r : report.rows) sorted += r.to_json().dump() + "\n";
  write_file(reports / "report.jsonl", sorted);
  write_file(reports / "summary.json", report.summary_json().dump(2) + "\n");
  if (failure) throw *failure;
  return report;
}

}  // namespace dissent
