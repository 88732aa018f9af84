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

#include <string>
#include <string_view>
#include <vector>

namespace dissent {

// Templates compiled in from prompts/*.txt. Names are the file stems
// ("initial", "recruit", "tool_ocr", ...). Throws Error(kInvalidArgument)
// for unknown names.
std::string_view builtin_prompt(std::string_view name);
std::vector<std::string> builtin_prompt_names();

struct PromptSet {
  std::string initial;
  std::string recruit;
  std::string score;
  std::string discuss;
  std::string aggregate;

  static PromptSet defaults();
};

}  // namespace dissent
