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

namespace dissent {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string collapse_whitespace(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);

// Canonical answer form used for grouping and scoring: lowercase, trimmed,
// terminal punctuation stripped, internal whitespace collapsed.
std::string normalize_answer(std::string_view answer);

// normalize_answer plus removal of the English articles a/an/the.
std::string normalize_direct_answer(std::string_view answer);

// Replaces every occurrence of each key in a single left-to-right pass.
// Substituted values are never rescanned, so a value containing a key is
// inserted literally.
std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values);

// Shortest decimal text that parses back to the same double.
std::string format_real(double value);
std::string format_fixed(double value, int decimals);

// First balanced top-level {...} in the text, skipping braces inside JSON
// string literals. Tolerates surrounding prose and code fences.
std::optional<std::string> extract_json_object(std::string_view text);

std::string base64_encode(std::span<const std::uint8_t> bytes);

std::size_t whitespace_token_count(std::string_view s);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 0);

}  // namespace dissent
