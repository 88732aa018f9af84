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

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "dissent/debate.hpp"
#include "dissent/gateway.hpp"
#include "dissent/tools.hpp"

namespace dissent {

struct EndpointConfig {
  EndpointProfile profile;
  std::vector<MockEntry> script;
  std::vector<MockRule> rules;
};

struct RunConfig {
  std::vector<EndpointConfig> endpoints;
  std::vector<ToolDescriptor> tools;
  PipelineConfig pipeline;
  int workers = 1;
  nlohmann::json document;  // as written, before interpolation

  // Fresh gateway and registry for one run. Mock scripts are loaded anew.
  void build(Gateway& gateway, ToolRegistry& registry) const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
std::optional<std::string> process_env(const std::string& name);

// Replaces ${NAME} with the variable's value. Throws Error(kConfig) naming
// `field` when a variable is unset or empty, or a reference is unterminated.
std::string interpolate_env(std::string_view text, const std::string& field,
                            const EnvLookup& env = process_env);

// Relative prompt files resolve against base_dir. Every error is
// Error(kConfig) whose message starts with the offending field path.
RunConfig parse_run_config(const nlohmann::json& document, const std::string& base_dir = {},
                           const EnvLookup& env = process_env);
RunConfig load_run_config(const std::string& path, const EnvLookup& env = process_env);

// Parse plus the cross-reference checks a run would hit.
void validate_run_config(const RunConfig& config);

}  // namespace dissent
