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

#include "dissent/prompts.hpp"

#include <utility>

#include "dissent/error.hpp"

namespace dissent {

namespace detail {
extern const std::pair<std::string_view, std::string_view> kPromptTable[];
extern const std::size_t kPromptCount;
}  // namespace detail

std::string_view builtin_prompt(std::string_view name) {
  for (std::size_t i = 0; i < detail::kPromptCount; ++i) {
    if (detail::kPromptTable[i].first == name) return detail::kPromptTable[i].second;
  }
  throw Error(ErrorCode::kInvalidArgument, "no built-in prompt named '" + std::string(name) + "'");
}

std::vector<std::string> builtin_prompt_names() {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < detail::kPromptCount; ++i) {
    names.emplace_back(detail::kPromptTable[i].first);
  }
  return names;
}

PromptSet PromptSet::defaults() {
  PromptSet p;
  p.initial = std::string(builtin_prompt("initial"));
  p.recruit = std::string(builtin_prompt("recruit"));
  p.score = std::string(builtin_prompt("score"));
  p.discuss = std::string(builtin_prompt("discuss"));
  p.aggregate = std::string(builtin_prompt("aggregate"));
  return p;
}

}  // namespace dissent
