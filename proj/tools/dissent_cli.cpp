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

// Command-line front end. Talks to the library only through dissent.h.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dissent/dissent.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailed = 1;
constexpr int kExitConfig = 2;

int report_failure(dissent_status status) {
  std::cerr << "error (" << dissent_status_name(status) << "): " << dissent_last_error() << "\n";
  if (status == DISSENT_ERR_CONFIG || status == DISSENT_ERR_INVALID_ARGUMENT) return kExitConfig;
  return kExitRunFailed;
}

std::string timestamp() {
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

fs::path fresh_run_dir(const std::string& root, unsigned long long seed) {
  fs::path base = fs::path(root) / (timestamp() + "-seed" + std::to_string(seed));
  fs::path dir = base;
  for (int n = 2; fs::exists(dir); ++n) dir = base.string() + "-" + std::to_string(n);
  return dir;
}

struct ConfigHandle {
  dissent_config* ptr = nullptr;
  ~ConfigHandle() { dissent_config_free(ptr); }
};

int write_snapshot(const dissent_config* cfg, const fs::path& dir) {
  char* json = nullptr;
  dissent_status st = dissent_config_snapshot(cfg, &json);
  if (st != DISSENT_OK) return report_failure(st);
  std::ofstream(dir / "config.json") << json;
  dissent_string_free(json);
  return kExitOk;
}

int cmd_validate(const std::string& config_path) {
  ConfigHandle cfg;
  dissent_status st = dissent_config_load(config_path.c_str(), &cfg.ptr);
  if (st == DISSENT_OK) st = dissent_config_validate(cfg.ptr);
  if (st != DISSENT_OK) return report_failure(st);
  std::cout << "config ok: " << config_path << "\n";
  return kExitOk;
}

int cmd_ask(const std::string& config_path, const std::string& question, const std::string& image,
            const std::string& question_id, const std::string& runs_root, std::string run_dir) {
  ConfigHandle cfg;
  dissent_status st = dissent_config_load(config_path.c_str(), &cfg.ptr);
  if (st != DISSENT_OK) return report_failure(st);
  dissent_result* result = nullptr;
  st = dissent_ask(cfg.ptr, question_id.c_str(), question.c_str(),
                   image.empty() ? nullptr : image.c_str(), &result);
  if (st != DISSENT_OK) return report_failure(st);

  fs::path dir = run_dir.empty() ? fresh_run_dir(runs_root, dissent_config_run_seed(cfg.ptr))
                                 : fs::path(run_dir);
  fs::create_directories(dir / "transcripts");
  int rc = write_snapshot(cfg.ptr, dir);
  fs::path transcript = dir / "transcripts" / (question_id + ".jsonl");
  if (rc == kExitOk) {
    st = dissent_result_save_transcript(result, transcript.string().c_str());
    if (st != DISSENT_OK) rc = report_failure(st);
  }
  if (rc == kExitOk) {
    std::cout << "Answer: " << dissent_result_answer(result) << "\n"
              << "Reasoning: " << dissent_result_reasoning(result) << "\n"
              << "Confidence: " << dissent_result_confidence(result) << "\n"
              << "Method: " << dissent_result_method(result) << "\n"
              << "Transcript: " << transcript.string() << "\n";
  }
  dissent_result_free(result);
  return rc;
}

int cmd_eval(const std::string& config_path, const std::string& dataset, const std::string& runs_root,
             std::string run_dir, bool resume, int workers) {
  ConfigHandle cfg;
  dissent_status st = dissent_config_load(config_path.c_str(), &cfg.ptr);
  if (st == DISSENT_OK) st = dissent_config_validate(cfg.ptr);
  if (st != DISSENT_OK) return report_failure(st);
  if (resume && run_dir.empty()) {
    std::cerr << "error: --resume needs --run-dir\n";
    return kExitConfig;
  }
  if (run_dir.empty()) run_dir = fresh_run_dir(runs_root, dissent_config_run_seed(cfg.ptr)).string();
  char* summary = nullptr;
  st = dissent_eval(cfg.ptr, dataset.c_str(), run_dir.c_str(), resume ? 1 : 0, workers, &summary);
  if (summary != nullptr) {
    std::cout << summary << "\n";
    dissent_string_free(summary);
  }
  std::cout << "Run directory: " << run_dir << "\n";
  if (st != DISSENT_OK) return report_failure(st);
  return kExitOk;
}

int cmd_analyze(const std::vector<std::string>& dirs, std::string out_dir, int bins) {
  if (out_dir.empty()) out_dir = (fs::path(dirs.front()) / "analysis").string();
  std::vector<const char*> ptrs;
  for (const auto& d : dirs) ptrs.push_back(d.c_str());
  char* summary = nullptr;
  dissent_status st = dissent_analyze(ptrs.data(), ptrs.size(), out_dir.c_str(), bins, &summary);
  if (st != DISSENT_OK) return report_failure(st);
  std::cout << summary << "\n" << "Analysis written to: " << out_dir << "\n";
  dissent_string_free(summary);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent visual question answering with tool-backed debate"};
  app.set_version_flag("--version", dissent_version());
  app.require_subcommand(1);

  std::string config_path, question, image, question_id = "q0", runs_root = "runs", run_dir;
  std::string dataset, out_dir;
  std::vector<std::string> dirs;
  bool resume = false;
  int workers = 0;
  int bins = 10;

  auto* validate = app.add_subcommand("validate-config", "Check a run configuration");
  validate->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);

  auto* ask = app.add_subcommand("ask", "Answer one question");
  ask->add_option("-c,--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  ask->add_option("-q,--question", question, "Question text")->required();
  ask->add_option("-i,--image", image, "Image file")->check(CLI::ExistingFile);
  ask->add_option("--id", question_id, "Question id")->capture_default_str();
  ask->add_option("--runs-root", runs_root, "Parent of new run directories")->capture_default_str();
  ask->add_option("--run-dir", run_dir, "Explicit run directory");

  auto* eval = app.add_subcommand("eval", "Evaluate a dataset");
  eval->add_option("-c,--config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  eval->add_option("-d,--dataset", dataset, "Dataset JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--runs-root", runs_root, "Parent of new run directories")->capture_default_str();
  eval->add_option("--run-dir", run_dir, "Explicit run directory");
  eval->add_flag("--resume", resume, "Continue an interrupted run in --run-dir");
  eval->add_option("-w,--workers", workers, "Worker threads (default from config)");

  auto* analyze = app.add_subcommand("analyze", "Summarize transcripts and reports");
  analyze->add_option("dirs", dirs, "Run or transcript directories")->required()->check(CLI::ExistingDirectory);
  analyze->add_option("-o,--out", out_dir, "Output directory (default <first dir>/analysis)");
  analyze->add_option("--bins", bins, "ECE bin count")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (*validate) return cmd_validate(config_path);
  if (*ask) return cmd_ask(config_path, question, image, question_id, runs_root, run_dir);
  if (*eval) return cmd_eval(config_path, dataset, runs_root, run_dir, resume, workers);
  return cmd_analyze(dirs, out_dir, bins);
}
