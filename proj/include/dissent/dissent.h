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

#ifndef DISSENT_DISSENT_H_
#define DISSENT_DISSENT_H_

#include <stddef.h>

#if defined(_WIN32)
#define DISSENT_API __declspec(dllexport)
#else
#define DISSENT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dissent_status {
  DISSENT_OK = 0,
  DISSENT_ERR_INVALID_ARGUMENT = 1,
  DISSENT_ERR_EXHAUSTED_RETRIES = 2,
  DISSENT_ERR_TIMEOUT = 3,
  DISSENT_ERR_MALFORMED_WIRE_RESPONSE = 4,
  DISSENT_ERR_TRANSPORT = 5,
  DISSENT_ERR_SCRIPT_EXHAUSTED = 6,
  DISSENT_ERR_NOT_A_MOCK_ENDPOINT = 7,
  DISSENT_ERR_UNKNOWN_ENDPOINT = 8,
  DISSENT_ERR_PARSE_FAILURE = 9,
  DISSENT_ERR_NOT_A_STRUCTURED_DOCUMENT = 10,
  DISSENT_ERR_MISSING_EXPERTS_KEY = 11,
  DISSENT_ERR_DUPLICATE_TOOL_NAME = 12,
  DISSENT_ERR_UNKNOWN_TOOL = 13,
  DISSENT_ERR_PAYLOAD_SCHEMA_MISMATCH = 14,
  DISSENT_ERR_RECORD_VALIDATION = 15,
  DISSENT_ERR_CONFIG = 16,
  DISSENT_ERR_ABORTED_RUN = 17,
  DISSENT_ERR_IO = 18,
  DISSENT_ERR_INTERNAL = 99
} dissent_status;

typedef struct dissent_config dissent_config;
typedef struct dissent_result dissent_result;

DISSENT_API const char* dissent_version(void);
DISSENT_API const char* dissent_status_name(dissent_status status);

/* Message of the last failed call on this thread; "" when none. */
DISSENT_API const char* dissent_last_error(void);

/* Strings returned through char** are owned by the caller. */
DISSENT_API void dissent_string_free(char* s);

DISSENT_API dissent_status dissent_config_load(const char* path, dissent_config** out);
/* base_dir resolves relative prompt files; may be NULL. */
DISSENT_API dissent_status dissent_config_parse(const char* json_text, const char* base_dir,
                                                dissent_config** out);
DISSENT_API void dissent_config_free(dissent_config* config);
DISSENT_API dissent_status dissent_config_validate(const dissent_config* config);
DISSENT_API unsigned long long dissent_config_run_seed(const dissent_config* config);
/* The config document as written, environment references unexpanded. */
DISSENT_API dissent_status dissent_config_snapshot(const dissent_config* config, char** out_json);

/* image_path may be NULL for a text-only question. */
DISSENT_API dissent_status dissent_ask(const dissent_config* config, const char* question_id,
                                       const char* question, const char* image_path,
                                       dissent_result** out);
DISSENT_API void dissent_result_free(dissent_result* result);
DISSENT_API const char* dissent_result_answer(const dissent_result* result);
DISSENT_API const char* dissent_result_reasoning(const dissent_result* result);
DISSENT_API double dissent_result_confidence(const dissent_result* result);
DISSENT_API const char* dissent_result_method(const dissent_result* result);
DISSENT_API int dissent_result_rounds(const dissent_result* result);
DISSENT_API const char* dissent_result_transcript(const dissent_result* result);
DISSENT_API dissent_status dissent_result_save_transcript(const dissent_result* result,
                                                          const char* path);

/* workers <= 0 takes the config's worker count. On success and on an
   aborted run, *out_summary (when non-NULL) receives the summary JSON. */
DISSENT_API dissent_status dissent_eval(const dissent_config* config, const char* dataset_path,
                                        const char* run_dir, int resume, int workers,
                                        char** out_summary);

/* dirs are run directories or directories of transcript files. */
DISSENT_API dissent_status dissent_analyze(const char* const* dirs, size_t dir_count,
                                           const char* out_dir, int bin_count,
                                           char** out_summary);

#ifdef __cplusplus
}
#endif

#endif  // DISSENT_DISSENT_H_
