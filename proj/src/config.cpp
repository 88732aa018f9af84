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

#include "dissent/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "dissent/error.hpp"
#include "dissent/prompts.hpp"

namespace fs = std::filesystem;

namespace dissent {

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfig, field + ": " + why);
}

std::string child(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

// Typed access to one JSON object, rejecting keys it does not know.
class Fields {
 public:
  Fields(const nlohmann::json& obj, std::string path, std::set<std::string> allowed)
      : obj_(obj), path_(std::move(path)) {
    if (!obj.is_object()) fail(path_.empty() ? "config" : path_, "must be an object");
    for (const auto& [key, value] : obj.items()) {
      if (!allowed.count(key)) fail(child(path_, key), "unknown key");
    }
  }

  const std::string& path() const { return path_; }
  std::string at(const std::string& key) const { return child(path_, key); }
  bool has(const std::string& key) const { return obj_.contains(key) && !obj_[key].is_null(); }
  const nlohmann::json& raw(const std::string& key) const { return obj_[key]; }

  std::string str(const std::string& key, std::string def = {}) const {
    if (!has(key)) return def;
    if (!obj_[key].is_string()) fail(at(key), "must be a string");
    return obj_[key].get<std::string>();
  }
  std::string required_str(const std::string& key) const {
    if (!has(key)) fail(at(key), "is required");
    std::string s = str(key);
    if (s.empty()) fail(at(key), "must be non-empty");
    return s;
  }
  double real(const std::string& key, double def) const {
    if (!has(key)) return def;
    if (!obj_[key].is_number()) fail(at(key), "must be a number");
    return obj_[key].get<double>();
  }
  std::int64_t integer(const std::string& key, std::int64_t def) const {
    if (!has(key)) return def;
    if (!obj_[key].is_number_integer()) fail(at(key), "must be an integer");
    return obj_[key].get<std::int64_t>();
  }
  bool flag(const std::string& key, bool def) const {
    if (!has(key)) return def;
    if (!obj_[key].is_boolean()) fail(at(key), "must be true or false");
    return obj_[key].get<bool>();
  }
  std::vector<std::string> strings(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    if (!obj_[key].is_array()) fail(at(key), "must be a list of strings");
    for (std::size_t i = 0; i < obj_[key].size(); ++i) {
      if (!obj_[key][i].is_string()) fail(index(at(key), i), "must be a string");
      out.push_back(obj_[key][i].get<std::string>());
    }
    return out;
  }

 private:
  const nlohmann::json& obj_;
  std::string path_;
};

nlohmann::json interpolate_all(const nlohmann::json& j, const std::string& path,
                               const EnvLookup& env) {
  if (j.is_string()) return interpolate_env(j.get<std::string>(), path, env);
  if (j.is_array()) {
    nlohmann::json out = nlohmann::json::array();
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(interpolate_all(j[i], index(path, i), env));
    return out;
  }
  if (j.is_object()) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [k, v] : j.items()) out[k] = interpolate_all(v, child(path, k), env);
    return out;
  }
  return j;
}

std::string read_text(const fs::path& path, const std::string& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(field, "cannot read '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return text;
}

// A template given inline or as {"file": path}.
std::string template_text(const nlohmann::json& j, const std::string& field,
                          const std::string& base_dir) {
  if (j.is_string()) return j.get<std::string>();
  Fields f(j, field, {"file"});
  fs::path p(f.required_str("file"));
  if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
  return read_text(p, f.at("file"));
}

MockEntry parse_mock_entry(const nlohmann::json& j, const std::string& field) {
  if (j.is_string()) return MockEntry::reply(j.get<std::string>());
  Fields f(j, field, {"text", "fail", "malformed", "prompt_tokens", "completion_tokens"});
  if (f.has("fail")) {
    const auto& v = f.raw("fail");
    if (v.is_string() && v.get<std::string>() == "timeout") return MockEntry::timeout();
    if (v.is_boolean() && v.get<bool>()) return MockEntry::fail();
    fail(f.at("fail"), "must be true or \"timeout\"");
  }
  if (f.flag("malformed", false)) return MockEntry::malformed();
  if (!f.has("text")) fail(field, "needs \"text\", \"fail\" or \"malformed\"");
  MockEntry e = MockEntry::reply(f.str("text"));
  if (f.has("prompt_tokens")) e.prompt_tokens = f.integer("prompt_tokens", 0);
  if (f.has("completion_tokens")) e.completion_tokens = f.integer("completion_tokens", 0);
  if (e.prompt_tokens.value_or(0) < 0 || e.completion_tokens.value_or(0) < 0) {
    fail(field, "token counts must be >= 0");
  }
  return e;
}

EndpointConfig parse_endpoint(const nlohmann::json& j, const std::string& field) {
  Fields f(j, field,
           {"id", "transport", "base_url", "model", "temperature", "max_retries", "timeout_ms",
            "role", "api_key", "max_in_flight", "backoff_base_ms", "script", "rules"});
  EndpointConfig ec;
  EndpointProfile& p = ec.profile;
  p.endpoint_id = f.required_str("id");
  p.base_url = f.str("base_url");
  std::string transport = f.str("transport", p.base_url.empty() ? "mock" : "http");
  if (transport == "http") {
    p.transport = Transport::kHttp;
    if (p.base_url.empty()) fail(f.at("base_url"), "is required for http endpoints");
  } else if (transport == "mock") {
    p.transport = Transport::kMock;
  } else {
    fail(f.at("transport"), "must be \"http\" or \"mock\"");
  }
  p.model_name = f.str("model", p.transport == Transport::kMock ? "mock" : "");
  if (p.model_name.empty()) fail(f.at("model"), "is required for http endpoints");
  p.temperature = f.real("temperature", p.temperature);
  p.max_retries = static_cast<int>(f.integer("max_retries", p.max_retries));
  if (f.has("role")) {
    try {
      p.role_hint = parse_role_hint(f.str("role"));
    } catch (const Error& e) {
      fail(f.at("role"), e.what());
    }
  }
  // Tool endpoints default to a shorter timeout than model roles.
  const std::int64_t default_timeout = p.role_hint == RoleHint::kTool ? 30000 : p.timeout.count();
  p.timeout = std::chrono::milliseconds(f.integer("timeout_ms", default_timeout));
  p.max_in_flight = static_cast<int>(f.integer("max_in_flight", p.max_in_flight));
  p.backoff_base = std::chrono::milliseconds(f.integer("backoff_base_ms", p.backoff_base.count()));
  p.api_key = f.str("api_key");
  if (!(p.temperature >= 0.0 && p.temperature <= 2.0)) fail(f.at("temperature"), "must lie in [0,2]");
  if (p.max_retries < 0) fail(f.at("max_retries"), "must be >= 0");
  if (p.timeout.count() <= 0) fail(f.at("timeout_ms"), "must be > 0");
  if (p.max_in_flight < 1) fail(f.at("max_in_flight"), "must be >= 1");
  if (p.backoff_base.count() < 0) fail(f.at("backoff_base_ms"), "must be >= 0");
  try {
    p.validate();
  } catch (const Error& e) {
    fail(field, e.what());
  }
  if (f.has("script")) {
    const auto& s = f.raw("script");
    if (!s.is_array()) fail(f.at("script"), "must be a list");
    for (std::size_t i = 0; i < s.size(); ++i) {
      ec.script.push_back(parse_mock_entry(s[i], index(f.at("script"), i)));
    }
  }
  if (f.has("rules")) {
    const auto& r = f.raw("rules");
    if (!r.is_array()) fail(f.at("rules"), "must be a list");
    for (std::size_t i = 0; i < r.size(); ++i) {
      Fields rf(r[i], index(f.at("rules"), i), {"match", "reply"});
      if (!rf.has("reply")) fail(rf.at("reply"), "is required");
      ec.rules.push_back({rf.str("match"), rf.str("reply")});
    }
  }
  if (p.transport == Transport::kHttp && (!ec.script.empty() || !ec.rules.empty())) {
    fail(field, "scripts and rules only apply to mock endpoints");
  }
  return ec;
}

ToolDescriptor parse_tool(const nlohmann::json& j, const std::string& field,
                          const std::string& base_dir) {
  Fields f(j, field,
           {"name", "endpoint", "input", "hint", "capability", "recruiter_line", "backend", "style",
            "template"});
  const std::string name = f.required_str("name");
  ToolDescriptor d;
  if (is_builtin_tool(name)) {
    d = builtin_tool(name);
  } else {
    d.tool_name = name;
    d.prompt_template = std::string(builtin_prompt("tool_reasoning"));
    if (!f.has("capability") && !f.has("recruiter_line")) {
      fail(f.at("capability"), "is required for a custom tool");
    }
  }
  d.endpoint_id = f.required_str("endpoint");
  if (f.has("input")) {
    std::string in = f.str("input");
    if (in == "none") {
      d.input_kind = InputKind::kNone;
    } else if (in == "list") {
      d.input_kind = InputKind::kQueryList;
    } else {
      fail(f.at("input"), "must be \"none\" or \"list\"");
    }
  }
  if (f.has("hint")) d.input_hint = f.str("hint");
  if (f.has("capability")) {
    d.capability_sentence = f.str("capability");
    d.recruiter_line_text.clear();
  }
  if (f.has("recruiter_line")) d.recruiter_line_text = f.str("recruiter_line");
  if (f.has("backend")) {
    std::string b = f.str("backend");
    if (b == "model") {
      d.backend = ToolBackendKind::kModel;
    } else if (b == "structured") {
      d.backend = ToolBackendKind::kStructured;
      if (!f.has("template")) d.prompt_template = std::string(builtin_prompt("tool_structured"));
    } else {
      fail(f.at("backend"), "must be \"model\" or \"structured\"");
    }
  }
  if (f.has("style")) {
    std::string s = f.str("style");
    if (s == "grounding") {
      d.style = StructuredStyle::kGrounding;
    } else if (s == "detection") {
      d.style = StructuredStyle::kDetection;
    } else {
      fail(f.at("style"), "must be \"grounding\" or \"detection\"");
    }
  }
  if (f.has("template")) d.prompt_template = template_text(f.raw("template"), f.at("template"), base_dir);
  try {
    d.validate();
  } catch (const Error& e) {
    fail(field, e.what());
  }
  return d;
}

void parse_ablations(const nlohmann::json& j, AblationFlags& ab) {
  Fields f(j, "ablations",
           {"no_tools", "no_scores", "majority_vote", "single_model",
            "show_initial_answers_to_aggregator", "unanimity_short_circuit", "withheld_tools",
            "single_model_temperature", "single_model_agents"});
  ab.no_tools = f.flag("no_tools", ab.no_tools);
  ab.no_scores = f.flag("no_scores", ab.no_scores);
  ab.majority_vote = f.flag("majority_vote", ab.majority_vote);
  ab.single_model = f.flag("single_model", ab.single_model);
  ab.show_initial_answers_to_aggregator =
      f.flag("show_initial_answers_to_aggregator", ab.show_initial_answers_to_aggregator);
  ab.unanimity_short_circuit = f.flag("unanimity_short_circuit", ab.unanimity_short_circuit);
  ab.withheld_tools = f.strings("withheld_tools");
  ab.single_model_temperature = f.real("single_model_temperature", ab.single_model_temperature);
  ab.single_model_agents = static_cast<int>(f.integer("single_model_agents", ab.single_model_agents));
}

}  // namespace

std::optional<std::string> process_env(const std::string& name) {
  const char* v = std::getenv(name.c_str());
  if (v == nullptr) return std::nullopt;
  return std::string(v);
}

std::string interpolate_env(std::string_view text, const std::string& field, const EnvLookup& env) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = text.find("${", i);
    if (start == std::string_view::npos) {
      out.append(text.substr(i));
      break;
    }
    out.append(text.substr(i, start - i));
    std::size_t end = text.find('}', start + 2);
    if (end == std::string_view::npos) fail(field, "unterminated ${...} reference");
    std::string name(text.substr(start + 2, end - start - 2));
    if (name.empty()) fail(field, "empty ${} reference");
    auto value = env(name);
    if (!value) fail(field, "environment variable '" + name + "' is not set");
    if (value->empty()) fail(field, "environment variable '" + name + "' is empty");
    out += *value;
    i = end + 1;
  }
  return out;
}

RunConfig parse_run_config(const nlohmann::json& document, const std::string& base_dir,
                           const EnvLookup& env) {
  RunConfig rc;
  rc.document = document;
  const nlohmann::json doc = interpolate_all(document, "", env);
  Fields f(doc, "",
           {"endpoints", "answerers", "recruiter", "scorer", "aggregator", "tools", "rounds",
            "ablations", "run_seed", "workers", "parallel_calls", "prompts", "reprompt_budgets",
            "scorer_temperature", "substitute_failed_agents"});

  if (!f.has("endpoints") || !f.raw("endpoints").is_array() || f.raw("endpoints").empty()) {
    fail("endpoints", "must be a non-empty list");
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < f.raw("endpoints").size(); ++i) {
    EndpointConfig ec = parse_endpoint(f.raw("endpoints")[i], index("endpoints", i));
    if (!ids.insert(ec.profile.endpoint_id).second) {
      fail(index("endpoints", i) + ".id", "duplicate endpoint id '" + ec.profile.endpoint_id + "'");
    }
    rc.endpoints.push_back(std::move(ec));
  }

  PipelineConfig& pc = rc.pipeline;
  pc.answerer_ids = f.strings("answerers");
  pc.recruiter_id = f.str("recruiter");
  pc.scorer_id = f.str("scorer");
  pc.aggregator_id = f.str("aggregator");
  pc.rounds = static_cast<int>(f.integer("rounds", pc.rounds));
  std::int64_t seed = f.integer("run_seed", 0);
  if (seed < 0) fail("run_seed", "must be >= 0");
  pc.run_seed = static_cast<std::uint64_t>(seed);
  pc.parallel_calls = f.flag("parallel_calls", pc.parallel_calls);
  pc.substitute_failed_agents = f.flag("substitute_failed_agents", pc.substitute_failed_agents);
  pc.scorer_temperature = f.real("scorer_temperature", pc.scorer_temperature);
  if (!(pc.scorer_temperature >= 0.0 && pc.scorer_temperature <= 2.0)) {
    fail("scorer_temperature", "must lie in [0,2]");
  }
  rc.workers = static_cast<int>(f.integer("workers", 1));
  if (rc.workers < 1) fail("workers", "must be >= 1");
  if (f.has("ablations")) parse_ablations(f.raw("ablations"), pc.ablations);

  if (f.has("reprompt_budgets")) {
    Fields b(f.raw("reprompt_budgets"), "reprompt_budgets", {"answer", "recruit", "score", "aggregate"});
    pc.budgets.answer = static_cast<int>(b.integer("answer", pc.budgets.answer));
    pc.budgets.recruit = static_cast<int>(b.integer("recruit", pc.budgets.recruit));
    pc.budgets.score = static_cast<int>(b.integer("score", pc.budgets.score));
    pc.budgets.aggregate = static_cast<int>(b.integer("aggregate", pc.budgets.aggregate));
  }

  if (f.has("prompts")) {
    Fields p(f.raw("prompts"), "prompts", {"initial", "recruit", "score", "discuss", "aggregate"});
    auto load = [&](const char* key, std::string& slot) {
      if (p.has(key)) slot = template_text(p.raw(key), p.at(key), base_dir);
    };
    load("initial", pc.prompts.initial);
    load("recruit", pc.prompts.recruit);
    load("score", pc.prompts.score);
    load("discuss", pc.prompts.discuss);
    load("aggregate", pc.prompts.aggregate);
  }

  if (f.has("tools")) {
    if (!f.raw("tools").is_array()) fail("tools", "must be a list");
    std::set<std::string> names;
    for (std::size_t i = 0; i < f.raw("tools").size(); ++i) {
      ToolDescriptor d = parse_tool(f.raw("tools")[i], index("tools", i), base_dir);
      if (!names.insert(d.tool_name).second) {
        fail(index("tools", i) + ".name", "duplicate tool name '" + d.tool_name + "'");
      }
      rc.tools.push_back(std::move(d));
    }
  }
  return rc;
}

RunConfig load_run_config(const std::string& path, const EnvLookup& env) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kConfig, "config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  auto doc = nlohmann::json::parse(ss.str(), nullptr, false);
  if (doc.is_discarded()) throw Error(ErrorCode::kConfig, "config: '" + path + "' is not valid JSON");
  return parse_run_config(doc, fs::path(path).parent_path().string(), env);
}

void RunConfig::build(Gateway& gateway, ToolRegistry& registry) const {
  for (const auto& ec : endpoints) {
    gateway.add_endpoint(ec.profile);
    if (ec.profile.transport == Transport::kMock) {
      gateway.register_mock_script(ec.profile.endpoint_id, ec.script);
      gateway.register_mock_rules(ec.profile.endpoint_id, ec.rules);
    }
  }
  for (const auto& t : tools) registry.register_tool(t);
}

void validate_run_config(const RunConfig& config) {
  Gateway gateway(config.pipeline.run_seed);
  ToolRegistry registry;
  config.build(gateway, registry);
  validate_pipeline(config.pipeline, gateway, registry);
}

}  // namespace dissent
