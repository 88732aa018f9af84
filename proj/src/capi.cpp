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

#include "dissent/dissent.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include "dissent/analysis.hpp"
#include "dissent/config.hpp"
#include "dissent/error.hpp"
#include "dissent/evaluation.hpp"
#include "dissent/version.hpp"

struct dissent_config {
  dissent::RunConfig config;
};

struct dissent_result {
  dissent::PipelineResult result;
  std::string method;
  std::string transcript;
};

namespace {

thread_local std::string g_last_error;

dissent_status to_status(dissent::ErrorCode code) {
  return static_cast<dissent_status>(static_cast<int>(code) + 1);
}

template <class Fn>
dissent_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return DISSENT_OK;
  } catch (const dissent::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DISSENT_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return DISSENT_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (p == nullptr) {
    throw dissent::Error(dissent::ErrorCode::kInvalidArgument, std::string(what) + " is NULL");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* dissent_version(void) { return DISSENT_VERSION_STRING; }

const char* dissent_status_name(dissent_status status) {
  if (status == DISSENT_OK) return "ok";
  if (status == DISSENT_ERR_INTERNAL) return "internal";
  int code = static_cast<int>(status) - 1;
  if (code < 0 || code > static_cast<int>(dissent::ErrorCode::kIo)) return "unknown";
  return dissent::error_code_name(static_cast<dissent::ErrorCode>(code)).data();
}

const char* dissent_last_error(void) { return g_last_error.c_str(); }

void dissent_string_free(char* s) { std::free(s); }

dissent_status dissent_config_load(const char* path, dissent_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    auto cfg = std::make_unique<dissent_config>();
    cfg->config = dissent::load_run_config(path);
    *out = cfg.release();
  });
}

dissent_status dissent_config_parse(const char* json_text, const char* base_dir,
                                    dissent_config** out) {
  return guarded([&] {
    require(json_text, "json_text");
    require(out, "out");
    *out = nullptr;
    auto doc = nlohmann::json::parse(json_text, nullptr, false);
    if (doc.is_discarded()) {
      throw dissent::Error(dissent::ErrorCode::kConfig, "config: not valid JSON");
    }
    auto cfg = std::make_unique<dissent_config>();
    cfg->config = dissent::parse_run_config(doc, base_dir ? base_dir : "");
    *out = cfg.release();
  });
}

void dissent_config_free(dissent_config* config) { delete config; }

dissent_status dissent_config_validate(const dissent_config* config) {
  return guarded([&] {
    require(config, "config");
    dissent::validate_run_config(config->config);
  });
}

unsigned long long dissent_config_run_seed(const dissent_config* config) {
  return config == nullptr ? 0ULL : config->config.pipeline.run_seed;
}

dissent_status dissent_config_snapshot(const dissent_config* config, char** out_json) {
  return guarded([&] {
    require(config, "config");
    require(out_json, "out_json");
    *out_json = copy_string(config->config.document.dump(2) + "\n");
  });
}

dissent_status dissent_ask(const dissent_config* config, const char* question_id,
                           const char* question, const char* image_path, dissent_result** out) {
  return guarded([&] {
    require(config, "config");
    require(question, "question");
    require(out, "out");
    *out = nullptr;
    dissent::Gateway gateway(config->config.pipeline.run_seed);
    dissent::ToolRegistry registry;
    config->config.build(gateway, registry);
    dissent::Question q;
    q.id = question_id != nullptr && *question_id != '\0' ? question_id : "q0";
    q.text = question;
    if (image_path != nullptr && *image_path != '\0') q.image = dissent::load_image(image_path);
    auto res = std::make_unique<dissent_result>();
    res->result = dissent::run_pipeline(gateway, registry, config->config.pipeline, q);
    res->method = std::string(dissent::aggregation_method_name(res->result.final_answer.method));
    res->transcript = res->result.transcript.to_jsonl();
    *out = res.release();
  });
}

void dissent_result_free(dissent_result* result) { delete result; }

const char* dissent_result_answer(const dissent_result* result) {
  return result ? result->result.final_answer.answer.c_str() : "";
}

const char* dissent_result_reasoning(const dissent_result* result) {
  return result ? result->result.final_answer.reasoning.c_str() : "";
}

double dissent_result_confidence(const dissent_result* result) {
  return result ? result->result.final_answer.confidence : 0.0;
}

const char* dissent_result_method(const dissent_result* result) {
  return result ? result->method.c_str() : "";
}

int dissent_result_rounds(const dissent_result* result) {
  return result ? result->result.discussion_rounds() : 0;
}

const char* dissent_result_transcript(const dissent_result* result) {
  return result ? result->transcript.c_str() : "";
}

dissent_status dissent_result_save_transcript(const dissent_result* result, const char* path) {
  return guarded([&] {
    require(result, "result");
    require(path, "path");
    result->result.transcript.save(path);
  });
}

dissent_status dissent_eval(const dissent_config* config, const char* dataset_path,
                            const char* run_dir, int resume, int workers, char** out_summary) {
  namespace fs = std::filesystem;
  if (out_summary != nullptr) *out_summary = nullptr;
  return guarded([&] {
    require(config, "config");
    require(dataset_path, "dataset_path");
    require(run_dir, "run_dir");
    auto dataset = dissent::load_dataset(dataset_path);
    fs::create_directories(run_dir);
    const fs::path snapshot = fs::path(run_dir) / "config.json";
    if (!fs::exists(snapshot)) {
      std::ofstream(snapshot) << config->config.document.dump(2) << "\n";
    }
    dissent::Gateway gateway(config->config.pipeline.run_seed);
    dissent::ToolRegistry registry;
    config->config.build(gateway, registry);
    dissent::EvalOptions options{run_dir, resume != 0,
                                 workers > 0 ? workers : config->config.workers};
    try {
      auto report = dissent::run_eval(dataset, gateway, registry, config->config.pipeline, options);
      if (out_summary != nullptr) *out_summary = copy_string(report.summary_json().dump(2));
    } catch (const dissent::Error& e) {
      if (e.code() == dissent::ErrorCode::kAbortedRun && out_summary != nullptr) {
        std::ifstream in(fs::path(run_dir) / "reports" / "summary.json");
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        *out_summary = copy_string(text);
      }
      throw;
    }
  });
}

dissent_status dissent_analyze(const char* const* dirs, size_t dir_count, const char* out_dir,
                               int bin_count, char** out_summary) {
  if (out_summary != nullptr) *out_summary = nullptr;
  return guarded([&] {
    if (dir_count == 0) {
      throw dissent::Error(dissent::ErrorCode::kInvalidArgument, "no input directories");
    }
    require(dirs, "dirs");
    std::vector<dissent::Transcript> transcripts;
    std::vector<dissent::ReportRow> rows;
    for (size_t i = 0; i < dir_count; ++i) {
      require(dirs[i], "dirs[i]");
      for (auto& t : dissent::load_transcripts(dirs[i])) transcripts.push_back(std::move(t));
      for (auto& r : dissent::load_report_rows(dirs[i])) rows.push_back(std::move(r));
    }
    auto summary = dissent::analyze(transcripts, rows, bin_count > 0 ? bin_count : 10);
    if (out_dir != nullptr && *out_dir != '\0') dissent::write_analysis(summary, out_dir);
    if (out_summary != nullptr) *out_summary = copy_string(summary.to_json().dump(2));
  });
}

}  // extern "C"
