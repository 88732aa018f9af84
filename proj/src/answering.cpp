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

#include "dissent/answering.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "dissent/error.hpp"
#include "dissent/text.hpp"

namespace dissent {

namespace {

enum class Label { kNone, kAnswer, kReasoning, kConfidence };

// Returns the label a line opens with and the offset of its value.
std::pair<Label, std::size_t> match_label(std::string_view line) {
  std::size_t i = 0;
  auto skip = [&](std::string_view chars) {
    while (i < line.size() && chars.find(line[i]) != std::string_view::npos) ++i;
  };
  skip(" \t*#->_");
  static constexpr std::pair<std::string_view, Label> kLabels[] = {
      {"answer", Label::kAnswer},
      {"reasoning", Label::kReasoning},
      {"confidence", Label::kConfidence},
  };
  for (const auto& [word, label] : kLabels) {
    if (line.size() - i < word.size()) continue;
    bool same = std::equal(word.begin(), word.end(), line.begin() + static_cast<long>(i),
                           [](char a, char b) {
                             return a == std::tolower(static_cast<unsigned char>(b));
                           });
    if (!same) continue;
    std::size_t j = i + word.size();
    while (j < line.size() && (line[j] == '*' || line[j] == ' ' || line[j] == '_')) ++j;
    if (j < line.size() && line[j] == ':') {
      ++j;
      while (j < line.size() && (line[j] == '*' || line[j] == '_')) ++j;
      return {label, j};
    }
  }
  return {Label::kNone, 0};
}

std::optional<double> first_number(std::string_view s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    bool digit = std::isdigit(static_cast<unsigned char>(s[i])) != 0;
    bool dot_digit = s[i] == '.' && i + 1 < s.size() &&
                     std::isdigit(static_cast<unsigned char>(s[i + 1])) != 0;
    if (!digit && !dot_digit) continue;
    std::size_t start = i;
    if (i > 0 && s[i - 1] == '-') start = i - 1;
    double v = 0.0;
    auto res = std::from_chars(s.data() + start, s.data() + s.size(), v);
    if (res.ec != std::errc()) {
      // from_chars rejects a leading '.', so retry with an explicit zero.
      std::string padded = "0" + std::string(s.substr(i));
      res = std::from_chars(padded.data(), padded.data() + padded.size(), v);
      if (res.ec != std::errc()) return std::nullopt;
      std::size_t consumed = static_cast<std::size_t>(res.ptr - padded.data()) - 1;
      if (i + consumed < s.size() && s[i + consumed] == '%') v /= 100.0;
      return v;
    }
    std::size_t end = static_cast<std::size_t>(res.ptr - s.data());
    if (end < s.size() && s[end] == '%') v /= 100.0;
    return v;
  }
  return std::nullopt;
}

}  // namespace

ParsedOutput parse_agent_output(std::string_view text) {
  std::optional<std::string> blocks[4];
  Label current = Label::kNone;
  std::string buffer;
  auto flush = [&] {
    auto& slot = blocks[static_cast<int>(current)];
    if (current != Label::kNone && !slot) slot = trim(buffer);
    buffer.clear();
  };
  for (const auto& line : split_lines(text)) {
    auto [label, offset] = match_label(line);
    if (label != Label::kNone) {
      flush();
      current = label;
      buffer = std::string_view(line).substr(offset);
      continue;
    }
    if (current != Label::kNone) {
      buffer.push_back('\n');
      buffer += line;
    }
  }
  flush();

  const auto& answer = blocks[static_cast<int>(Label::kAnswer)];
  if (!answer || answer->empty()) {
    throw Error(ErrorCode::kParseFailure, "no 'Answer:' field in model output");
  }
  ParsedOutput out;
  out.answer = *answer;
  out.reasoning = blocks[static_cast<int>(Label::kReasoning)].value_or("");
  if (const auto& conf = blocks[static_cast<int>(Label::kConfidence)]) {
    if (auto v = first_number(*conf)) {
      out.confidence = std::clamp(*v, 0.0, 1.0);
      out.confidence_found = true;
    }
  }
  return out;
}

std::string render_agent_output(const AgentAnswer& answer) {
  return "Answer: " + answer.answer + "\nReasoning: " + answer.reasoning +
         "\nConfidence: " + format_real(answer.confidence);
}

AgentAnswer fallback_answer(std::string agent_id, std::string raw_text) {
  AgentAnswer a;
  a.agent_id = std::move(agent_id);
  for (const auto& line : split_lines(raw_text)) {
    std::string t = trim(line);
    if (!t.empty()) {
      a.answer = std::move(t);
      break;
    }
  }
  if (a.answer.empty()) a.answer = "no answer";
  a.reasoning = raw_text;
  a.confidence = 0.5;
  a.raw_text = std::move(raw_text);
  a.parse_fallback_used = true;
  return a;
}

std::size_t GroupedSolutions::agent_count() const {
  std::size_t n = 0;
  for (const auto& g : groups) n += g.supporter_count();
  return n;
}

std::optional<std::size_t> GroupedSolutions::find(std::string_view answer) const {
  std::string key = normalize_answer(answer);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i].canonical_answer == key) return i;
  }
  return std::nullopt;
}

GroupedSolutions group_solutions(std::span<const AgentAnswer> answers, GroupingStage stage) {
  GroupedSolutions out;
  out.stage = stage;
  for (const auto& a : answers) {
    std::string key = normalize_answer(a.answer);
    auto it = std::find_if(out.groups.begin(), out.groups.end(),
                           [&](const SolutionGroup& g) { return g.canonical_answer == key; });
    if (it == out.groups.end()) {
      out.groups.push_back({key, {}, {}, {}});
      it = std::prev(out.groups.end());
    }
    it->supporters.push_back(a.agent_id);
    it->reasonings.push_back(a.reasoning);
    it->confidences.push_back(a.confidence);
  }
  return out;
}

std::string render_grouped(const GroupedSolutions& grouped,
                           const std::map<std::string, double>& agreement) {
  std::string out;
  for (const auto& g : grouped.groups) {
    if (!out.empty()) out += "\n\n";
    std::size_t n = g.supporter_count();
    out += "Answer: " + g.canonical_answer + " (" + std::to_string(n) +
           (n == 1 ? " agent" : " agents") + ") — Reasoning: ";
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) out += " ";
      out += "[" + g.supporters[i] + "] " + collapse_whitespace(g.reasonings[i]);
    }
    out += "; Confidence: ";
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) out += "; ";
      out += "[" + g.supporters[i] + "] self-confidence " + format_real(g.confidences[i]);
      auto it = agreement.find(g.supporters[i]);
      if (it != agreement.end()) out += ", expert-agreement " + format_fixed(it->second, 2);
    }
  }
  return out;
}

AgentAnswer ask_formatted(CallContext& ctx, Stage stage, const AgentSeat& seat,
                          std::vector<ChatMessage>& history, int reprompt_budget) {
  ChatRequest req;
  req.messages = history;
  req.temperature = seat.temperature;
  std::string last_text;
  for (int attempt = 0; attempt <= reprompt_budget; ++attempt) {
    ChatResponse resp = ctx.chat(stage, seat.agent_id, seat.endpoint_id, req);
    last_text = resp.text;
    try {
      ParsedOutput parsed = parse_agent_output(resp.text);
      history.push_back({MessageRole::kAssistant, resp.text, std::nullopt});
      AgentAnswer a;
      a.agent_id = seat.agent_id;
      a.answer = std::move(parsed.answer);
      a.reasoning = std::move(parsed.reasoning);
      a.confidence = parsed.confidence;
      a.raw_text = resp.text;
      return a;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kParseFailure) throw;
    }
    if (attempt < reprompt_budget) {
      req.messages.push_back({MessageRole::kAssistant, resp.text, std::nullopt});
      req.messages.push_back(
          {MessageRole::kUser,
           "Your previous response did not follow the required format. Respond again using "
           "exactly these labeled lines:\nAnswer: [answer]\nReasoning: [reasoning]\n"
           "Confidence: [confidence]",
           std::nullopt});
    }
  }
  ctx.warn(stage, seat.agent_id + ": output never matched the answer format; using fallback");
  history.push_back({MessageRole::kAssistant, last_text, std::nullopt});
  return fallback_answer(seat.agent_id, last_text);
}

AgentAnswer ask_seat(CallContext& ctx, Stage stage, const AgentSeat& seat,
                     std::vector<ChatMessage>& history, int reprompt_budget,
                     bool substitute_failed) {
  try {
    return ask_formatted(ctx, stage, seat, history, reprompt_budget);
  } catch (const Error& e) {
    if (!substitute_failed) throw;
    ctx.warn(stage, seat.agent_id + ": endpoint failed (" + e.what() + "); substituting no answer");
    history.push_back({MessageRole::kAssistant, "", std::nullopt});
    return fallback_answer(seat.agent_id, "");
  }
}

std::string render_initial_prompt(std::string_view tmpl, std::string_view question) {
  return render_template(tmpl, {{"<question>", std::string(question)}});
}

InitialRound generate_initial_answers(CallContext& ctx, std::string_view question,
                                      const ImagePayload& image, std::span<const AgentSeat> agents,
                                      std::string_view initial_template, int reprompt_budget,
                                      bool parallel, bool substitute_failed) {
  if (agents.empty()) throw Error(ErrorCode::kInvalidArgument, "at least one answering agent is required");
  InitialRound out;
  out.answers.resize(agents.size());
  out.histories.resize(agents.size());
  std::string prompt = render_initial_prompt(initial_template, question);
  fan_out(ctx, agents.size(), parallel, [&](std::size_t i, CallContext& sub) {
    auto& history = out.histories[i];
    history.push_back({MessageRole::kUser, prompt,
                       image.empty() ? std::nullopt : std::optional<ImagePayload>(image)});
    out.answers[i] =
        ask_seat(sub, Stage::kInitial, agents[i], history, reprompt_budget, substitute_failed);
  });
  return out;
}

}  // namespace dissent
