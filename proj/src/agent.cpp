#include "oransec/agent.hpp"

#include <sstream>

#include "oransec/error.hpp"

namespace oransec::agent {

ScriptedProvider::ScriptedProvider(std::map<std::string, std::string> script)
    : script_(std::move(script)) {}

ScriptedProvider::ScriptedProvider(const ScriptedProvider& other) {
  std::lock_guard lock(other.mu_);
  script_ = other.script_;
}

ScriptedProvider::ScriptedProvider(ScriptedProvider&& other) noexcept
    : script_(std::move(other.script_)) {}

ScriptedProvider& ScriptedProvider::operator=(ScriptedProvider other) noexcept {
  std::lock_guard lock(mu_);
  script_ = std::move(other.script_);
  return *this;
}

ScriptedProvider ScriptedProvider::from_json(const Json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::SchemaViolation, "script must be a JSON object");
  std::map<std::string, std::string> script;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it->is_string()) {
      throw Error(ErrorCode::SchemaViolation, "script entry " + it.key() + " must be a string");
    }
    script.emplace(it.key(), it->get<std::string>());
  }
  return ScriptedProvider(std::move(script));
}

ScriptedProvider ScriptedProvider::load(const std::filesystem::path& path) {
  return from_json(read_json_file(path));
}

std::string ScriptedProvider::key(std::string_view scenario_id, AgentRole role, int step_index) {
  return std::string(scenario_id) + "/" + std::string(to_string(role)) + "/" +
         std::to_string(step_index);
}

void ScriptedProvider::set(const std::string& key, std::string completion) {
  std::lock_guard lock(mu_);
  script_[key] = std::move(completion);
}

void ScriptedProvider::merge(const ScriptedProvider& other) {
  if (&other == this) return;
  std::scoped_lock lock(mu_, other.mu_);
  for (const auto& [k, v] : other.script_) script_[k] = v;
}

std::size_t ScriptedProvider::size() const {
  std::lock_guard lock(mu_);
  return script_.size();
}

std::string ScriptedProvider::complete(const CompletionRequest& request) {
  const std::string k = key(request.scenario_id, request.role, request.step_index);
  std::lock_guard lock(mu_);
  auto it = script_.find(k);
  if (it == script_.end()) throw Error(ErrorCode::ScriptExhausted, "no scripted completion for " + k);
  return it->second;
}

namespace {

constexpr const char* kEnvelope =
    "Reply with exactly one JSON object per turn and nothing else. To call a tool:\n"
    "{\"thought\": \"<reasoning>\", \"action\": \"<tool name>\", \"action_input\": {<params>}}\n"
    "To finish:\n"
    "{\"thought\": \"<reasoning>\", \"final\": {<answer>}}\n"
    "Only tools listed under Tools may be called. Tool errors are returned as observations.\n";

// Exemplars are written for this project; they illustrate the envelope only.
constexpr const char* kAnalysisPreamble =
    "You are the threat analysis agent for an O-RAN deployment. Inspect the alert, correlate it "
    "with RRC/NAS traffic, network events and UE state, and decide whether it is a genuine threat, "
    "a benign fault or a false positive.\n"
    "Final answer fields: verdict (threat|benign|false_positive), event_summary, "
    "affected_components (list, e.g. \"O-CU\", \"UE:<id>\"), risk (low|medium|high), "
    "evidence_refs (optional list of {trace_id, ts_from, ts_to}).\n"
    "Example:\n"
    "Alert: UE 7 dropped off the cell twice within a minute.\n"
    "{\"thought\": \"Check the UE's signalling first.\", \"action\": \"get_traffic\", "
    "\"action_input\": {\"trace_id\": \"t-17\", \"ue_id\": \"ue-7\"}}\n"
    "Observation: [RRCRelease with cause other, RRCSetupRequest from ue-7 ...]\n"
    "{\"thought\": \"Releases follow radio link failure; no attacker-controlled messages.\", "
    "\"final\": {\"verdict\": \"benign\", \"event_summary\": \"Radio link failures caused by coverage\", "
    "\"affected_components\": [\"UE:ue-7\"], \"risk\": \"low\"}}\n";

constexpr const char* kClassificationPreamble =
    "You are the threat classification agent. Map the threat report onto MITRE FiGHT techniques. "
    "Select only from the retrieved candidates listed in the context documents; you may search "
    "and read techniques and mitigations to decide.\n"
    "Final answer fields: selected_technique_ids (non-empty list of candidate ids), "
    "rationale (optional).\n"
    "Example:\n"
    "{\"thought\": \"Candidate 1 describes the observed downgrade.\", \"action\": "
    "\"get_technique\", \"action_input\": {\"technique_id\": \"FGT1600\"}}\n"
    "Observation: {\"technique_id\": \"FGT1600\", \"name\": \"Weaken Encryption\", ...}\n"
    "{\"thought\": \"Matches.\", \"final\": {\"selected_technique_ids\": [\"FGT1600\"]}}\n";

constexpr const char* kResponsePreamble =
    "You are the response planning agent. Turn the mitigation guidance into a step-by-step plan "
    "that uses only the safe control APIs in the catalog below. You supply parameters; the "
    "execution workflow and a human approver decide how and whether it runs. If the guidance "
    "cannot be implemented with the catalog, do not improvise: answer {\"no_plan\": true}.\n"
    "Control catalog: get_ran_cu_config {}, update_ran_cu_config {\"changes\": [{\"path\", \"op\" "
    "(set|remove_list_item|add_list_item), \"value\"}]}, reboot_ran {}. "
    "get_ran_cu_config must precede update_ran_cu_config, which must precede reboot_ran.\n"
    "Final answer fields: plan ({\"steps\": [{\"tool_name\", \"params\", \"rationale\"}]}) or "
    "no_plan (true), reason (optional).\n"
    "Example:\n"
    "{\"thought\": \"Read the CU config.\", \"action\": \"get_ran_cu_config\", \"action_input\": {}}\n"
    "Observation: {\"version\": 4, \"other_params\": {\"inactivity_timer_s\": \"10\"}, ...}\n"
    "{\"thought\": \"Shorten the timer.\", \"final\": {\"plan\": {\"steps\": ["
    "{\"tool_name\": \"get_ran_cu_config\", \"params\": {}, \"rationale\": \"baseline\"}, "
    "{\"tool_name\": \"update_ran_cu_config\", \"params\": {\"changes\": [{\"path\": "
    "\"other_params.inactivity_timer_s\", \"op\": \"set\", \"value\": \"5\"}]}, \"rationale\": \"apply\"}, "
    "{\"tool_name\": \"reboot_ran\", \"params\": {}, \"rationale\": \"activate\"}]}}}\n";

std::string render_params(const ToolSpec& spec) {
  if (spec.params.empty()) return "none";
  std::vector<std::string> parts;
  for (const auto& p : spec.params) {
    parts.push_back(p.name + " (" + std::string(to_string(p.type)) + ", " +
                    (p.required ? "required" : "optional") +
                    (p.description.empty() ? "" : ": " + p.description) + ")");
  }
  return join(parts, "; ");
}

std::string render_action(const ReactStep& step) {
  if (const auto* call = std::get_if<ToolCall>(&step.action)) {
    return call->tool_name + " " + call->params.dump();
  }
  return "final " + std::get<FinalAnswer>(step.action).payload.dump();
}

}  // namespace

PromptLibrary PromptLibrary::builtin() {
  PromptLibrary lib;
  lib.set(AgentRole::analysis, std::string(kAnalysisPreamble) + kEnvelope);
  lib.set(AgentRole::classification, std::string(kClassificationPreamble) + kEnvelope);
  lib.set(AgentRole::response, std::string(kResponsePreamble) + kEnvelope);
  return lib;
}

void PromptLibrary::set(AgentRole role, std::string preamble) { preambles_[role] = std::move(preamble); }

const std::string& PromptLibrary::preamble(AgentRole role) const {
  auto it = preambles_.find(role);
  if (it == preambles_.end()) {
    throw Error(ErrorCode::UnknownRole, "no prompt template for role " + std::string(to_string(role)));
  }
  return it->second;
}

std::string render_prompt(const PromptLibrary& prompts, const ToolRegistry& registry, AgentRole role,
                          const TaskContext& context, const std::vector<ReactStep>& steps) {
  std::ostringstream out;
  out << prompts.preamble(role) << "\n## Tools\n";
  std::vector<const ToolSpec*> tools;
  for (const ToolSpec* spec : registry.for_role(role)) {
    if (!spec->mutating) tools.push_back(spec);
  }
  if (tools.empty()) {
    out << "No tools available. Reply with a final answer.\n";
  } else {
    for (const ToolSpec* spec : tools) {
      out << "- " << spec->name << ": " << spec->description << "\n  params: " << render_params(*spec)
          << "\n";
    }
  }
  out << "\n## Task\n" << context.task << "\n\n## Context documents\n";
  if (context.documents.empty()) out << "(none)\n";
  for (std::size_t i = 0; i < context.documents.size(); ++i) {
    out << "[" << (i + 1) << "] " << context.documents[i] << "\n";
  }
  out << "\n## Previous steps\n";
  if (steps.empty()) out << "(none)\n";
  for (const auto& s : steps) {
    out << "### Step " << s.index << "\nThought: " << s.thought << "\nAction: " << render_action(s)
        << "\n";
    if (s.observation) out << "Observation: " << *s.observation << "\n";
  }
  out << "\n## Next\nStep " << (steps.size() + 1) << " of " << kMaxIterations
      << ". Respond with one JSON object.\n";
  return out.str();
}

std::string render_repair_prompt(const std::string& prompt, std::string_view rejected,
                                 const GuardrailVerdict& verdict) {
  std::ostringstream out;
  out << prompt << "\n## Repair\nYour previous reply was rejected at the "
      << to_string(verdict.stage) << " check: " << verdict.violation.value_or("invalid output")
      << "\nRejected reply:\n"
      << rejected << "\nRe-emit a single valid JSON object that follows the format above.\n";
  return out.str();
}

std::string_view to_string(LoopOutcome o) noexcept {
  switch (o) {
    case LoopOutcome::final_answer: return "final_answer";
    case LoopOutcome::iteration_limit: return "iteration_limit";
    case LoopOutcome::guardrail_abort: return "guardrail_abort";
    case LoopOutcome::provider_failure: return "provider_failure";
  }
  return "provider_failure";
}

namespace {

LoopOutcome parse_outcome(std::string_view s) {
  if (s == "final_answer") return LoopOutcome::final_answer;
  if (s == "iteration_limit") return LoopOutcome::iteration_limit;
  if (s == "guardrail_abort") return LoopOutcome::guardrail_abort;
  if (s == "provider_failure") return LoopOutcome::provider_failure;
  throw Error(ErrorCode::SchemaViolation, "unknown loop outcome " + std::string(s));
}

Json step_to_json(const ReactStep& s) {
  Json j{{"type", "step"}, {"index", s.index}, {"thought", s.thought}};
  if (const auto* call = std::get_if<ToolCall>(&s.action)) {
    j["action"] = Json{{"tool", call->tool_name}, {"params", call->params}};
  } else {
    j["final"] = std::get<FinalAnswer>(s.action).payload;
  }
  j["observation"] = s.observation ? Json(*s.observation) : Json(nullptr);
  return j;
}

ReactStep step_from_json(const Json& j) {
  ReactStep s;
  s.index = j.at("index").get<int>();
  s.thought = j.at("thought").get<std::string>();
  if (j.contains("action")) {
    s.action = ToolCall{j.at("action").at("tool").get<std::string>(), j.at("action").at("params")};
  } else {
    s.action = FinalAnswer{j.at("final")};
  }
  if (!j.at("observation").is_null()) s.observation = j.at("observation").get<std::string>();
  return s;
}

Json summary_to_json(const AgentTranscript& t, bool include_wall_clock) {
  Json calls = Json::array();
  for (const auto& c : t.provider_calls) {
    calls.push_back(Json{{"index", c.index}, {"repair", c.repair}, {"completion", c.completion}});
  }
  Json verdicts = Json::array();
  for (const auto& v : t.guardrail_log) verdicts.push_back(to_json(v));
  Json j{{"type", "summary"},
         {"transcript_id", t.transcript_id},
         {"role", to_string(t.role)},
         {"incident_id", t.incident_id},
         {"scenario_id", t.scenario_id},
         {"outcome", to_string(t.outcome)},
         {"step_count", t.steps.size()},
         {"provider_calls", calls},
         {"guardrail_log", verdicts},
         {"tools_executed", t.tools_executed}};
  j["failure_detail"] = t.failure_detail ? Json(*t.failure_detail) : Json(nullptr);
  if (include_wall_clock) j["wall_clock_ms"] = t.wall_clock_ms;
  return j;
}

void summary_from_json(const Json& j, AgentTranscript& t) {
  t.transcript_id = j.at("transcript_id").get<std::string>();
  t.role = parse_role(j.at("role").get<std::string>());
  t.incident_id = j.at("incident_id").get<std::string>();
  t.scenario_id = j.at("scenario_id").get<std::string>();
  t.outcome = parse_outcome(j.at("outcome").get<std::string>());
  if (!j.at("failure_detail").is_null()) t.failure_detail = j.at("failure_detail").get<std::string>();
  for (const auto& c : j.at("provider_calls")) {
    t.provider_calls.push_back(
        {c.at("index").get<int>(), c.at("repair").get<bool>(), c.at("completion").get<std::string>()});
  }
  for (const auto& v : j.at("guardrail_log")) t.guardrail_log.push_back(verdict_from_json(v));
  t.tools_executed = j.at("tools_executed").get<std::vector<std::string>>();
  t.wall_clock_ms = j.value("wall_clock_ms", 0.0);
}

}  // namespace

const Json* AgentTranscript::final_payload() const {
  if (outcome != LoopOutcome::final_answer || steps.empty() || !steps.back().is_final()) return nullptr;
  return &std::get<FinalAnswer>(steps.back().action).payload;
}

std::string transcript_to_jsonl(const AgentTranscript& t, bool include_wall_clock) {
  std::string out;
  for (const auto& s : t.steps) out += step_to_json(s).dump() + "\n";
  out += summary_to_json(t, include_wall_clock).dump() + "\n";
  return out;
}

AgentTranscript transcript_from_jsonl(std::string_view jsonl) {
  AgentTranscript t;
  bool saw_summary = false;
  std::istringstream in{std::string(jsonl)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line);
    if (j.at("type") == "step") {
      t.steps.push_back(step_from_json(j));
    } else {
      summary_from_json(j, t);
      saw_summary = true;
    }
  }
  if (!saw_summary) throw Error(ErrorCode::SchemaViolation, "transcript lacks a summary line");
  return t;
}

Json to_json(const AgentTranscript& t) {
  Json steps = Json::array();
  for (const auto& s : t.steps) steps.push_back(step_to_json(s));
  Json j = summary_to_json(t, true);
  j["steps"] = steps;
  j.erase("type");
  return j;
}

AgentTranscript transcript_from_json(const Json& j) {
  AgentTranscript t;
  summary_from_json(j, t);
  for (const auto& s : j.at("steps")) t.steps.push_back(step_from_json(s));
  return t;
}

ScriptedProvider script_from_transcript(const AgentTranscript& t) {
  ScriptedProvider p;
  for (const auto& c : t.provider_calls) {
    p.set(ScriptedProvider::key(t.scenario_id, t.role, c.index), c.completion);
  }
  return p;
}

namespace {

struct Evaluation {
  std::optional<ParsedAction> action;
  GuardrailVerdict failure;
};

Evaluation evaluate(const std::string& raw, const LoopConfig& config, const ToolRegistry& registry,
                    AgentTranscript& t) {
  Evaluation ev;
  SanitizeResult s = sanitize_completion(raw);
  t.guardrail_log.push_back(s.verdict);
  if (!s.verdict.passed) {
    ev.failure = s.verdict;
    return ev;
  }
  SchemaCheck c = validate_against_schema(std::move(*s.payload), registry, config.role,
                                          config.final_schema);
  t.guardrail_log.push_back(c.verdict);
  if (!c.verdict.passed) {
    ev.failure = c.verdict;
    return ev;
  }
  ev.action = std::move(c.action);
  return ev;
}

}  // namespace

AgentTranscript run_react_loop(const LoopConfig& config, CompletionProvider& provider,
                               const ToolRegistry& registry, const PromptLibrary& prompts,
                               const TaskContext& context) {
  Stopwatch clock;
  AgentTranscript t;
  t.transcript_id = config.transcript_id;
  t.role = config.role;
  t.incident_id = context.incident_id;
  t.scenario_id = context.scenario_id;

  int call_index = 0;
  auto call = [&](const std::string& prompt, bool repair) -> std::optional<std::string> {
    CompletionRequest req{prompt, context.documents, context.scenario_id, config.role, ++call_index,
                          repair};
    try {
      std::string completion = provider.complete(req);
      t.provider_calls.push_back({req.step_index, repair, completion});
      return completion;
    } catch (const Error& e) {
      t.outcome = LoopOutcome::provider_failure;
      t.failure_detail = std::string(to_string(e.code())) + ": " + e.what();
      return std::nullopt;
    }
  };
  auto finish = [&] {
    t.wall_clock_ms = clock.elapsed_ms();
    return t;
  };

  for (int iteration = 1; iteration <= kMaxIterations; ++iteration) {
    const std::string prompt = render_prompt(prompts, registry, config.role, context, t.steps);
    auto raw = call(prompt, false);
    if (!raw) return finish();
    Evaluation ev = evaluate(*raw, config, registry, t);
    if (!ev.action) {
      auto retry = call(render_repair_prompt(prompt, *raw, ev.failure), true);
      if (!retry) return finish();
      ev = evaluate(*retry, config, registry, t);
      if (!ev.action) {
        t.outcome = LoopOutcome::guardrail_abort;
        t.failure_detail = std::string(to_string(ev.failure.stage)) + ": " +
                           ev.failure.violation.value_or("invalid output");
        return finish();
      }
    }

    ReactStep step;
    step.index = iteration;
    step.thought = ev.action->thought;
    if (ev.action->is_final) {
      step.action = ev.action->final;
      t.steps.push_back(std::move(step));
      t.outcome = LoopOutcome::final_answer;
      return finish();
    }

    const ToolCall& tc = ev.action->call;
    step.action = tc;
    try {
      Json result = registry.execute(tc.tool_name, tc.params, config.role);
      step.observation = result.is_string() ? result.get<std::string>() : result.dump();
    } catch (const Error& e) {
      step.observation = "error: " + std::string(to_string(e.code())) + ": " + e.what();
    } catch (const std::exception& e) {
      step.observation = std::string("error: ") + e.what();
    }
    t.tools_executed.push_back(tc.tool_name);
    t.steps.push_back(std::move(step));
  }
  t.outcome = LoopOutcome::iteration_limit;
  return finish();
}

}  // namespace oransec::agent
