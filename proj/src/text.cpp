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

#include "dissent/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <sstream>

#include "dissent/error.hpp"

namespace dissent {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_terminal_punct(char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':':
      return true;
    default:
      return false;
  }
}

}  // namespace

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kExhaustedRetries: return "ExhaustedRetries";
    case ErrorCode::kTimeout: return "Timeout";
    case ErrorCode::kMalformedWireResponse: return "MalformedWireResponse";
    case ErrorCode::kTransport: return "Transport";
    case ErrorCode::kScriptExhausted: return "ScriptExhausted";
    case ErrorCode::kNotAMockEndpoint: return "NotAMockEndpoint";
    case ErrorCode::kUnknownEndpoint: return "UnknownEndpoint";
    case ErrorCode::kParseFailure: return "ParseFailure";
    case ErrorCode::kNotAStructuredDocument: return "NotAStructuredDocument";
    case ErrorCode::kMissingExpertsKey: return "MissingExpertsKey";
    case ErrorCode::kDuplicateToolName: return "DuplicateToolName";
    case ErrorCode::kUnknownTool: return "UnknownTool";
    case ErrorCode::kPayloadSchemaMismatch: return "PayloadSchemaMismatch";
    case ErrorCode::kRecordValidation: return "RecordValidationError";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kAbortedRun: return "AbortedRun";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string collapse_whitespace(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool pending = false;
  for (char c : s) {
    if (is_space(c)) {
      pending = !out.empty();
      continue;
    }
    if (pending) out.push_back(' ');
    pending = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_lines(std::string_view s) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t nl = s.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.emplace_back(s.substr(start));
      break;
    }
    std::string_view line = s.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.emplace_back(line);
    start = nl + 1;
  }
  return lines;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string normalize_answer(std::string_view answer) {
  std::string s = collapse_whitespace(to_lower(answer));
  while (!s.empty() && (is_terminal_punct(s.back()) || is_space(s.back()))) {
    s.pop_back();
  }
  return trim(s);
}

std::string normalize_direct_answer(std::string_view answer) {
  std::string base = normalize_answer(answer);
  std::string out;
  for (const auto& word : split_whitespace(base)) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

std::string render_template(std::string_view tmpl,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    const std::pair<const std::string, std::string>* hit = nullptr;
    for (const auto& kv : values) {
      if (kv.first.empty()) continue;
      if (tmpl.compare(i, kv.first.size(), kv.first) == 0 &&
          (hit == nullptr || kv.first.size() > hit->first.size())) {
        hit = &kv;
      }
    }
    if (hit != nullptr) {
      out += hit->second;
      i += hit->first.size();
    } else {
      out.push_back(tmpl[i]);
      ++i;
    }
  }
  return out;
}

std::string format_real(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

std::optional<std::string> extract_json_object(std::string_view text) {
  std::size_t pos = 0;
  while (true) {
    std::size_t start = text.find('{', pos);
    if (start == std::string_view::npos) return std::nullopt;
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
      char c = text[i];
      if (in_string) {
        if (escaped) {
          escaped = false;
        } else if (c == '\\') {
          escaped = true;
        } else if (c == '"') {
          in_string = false;
        }
        continue;
      }
      if (c == '"') {
        in_string = true;
      } else if (c == '{') {
        ++depth;
      } else if (c == '}') {
        --depth;
        if (depth == 0) return std::string(text.substr(start, i - start + 1));
      }
    }
    // Unbalanced from this brace; try the next opening brace.
    pos = start + 1;
  }
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  static constexpr char kAlphabet[] =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    std::uint32_t v = bytes[i] << 16;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out += "==";
  } else if (rest == 2) {
    std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

std::size_t whitespace_token_count(std::string_view s) {
  return split_whitespace(s).size();
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dissent
