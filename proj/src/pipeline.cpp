#include "oransec/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <spdlog/spdlog.h>

#include "oransec/error.hpp"

namespace oransec::pipeline {

using agent::AgentRole;
using agent::FieldSpec;
using agent::FieldType;
using agent::FinalSchema;
using agent::ParamSpec;
using agent::ParamType;

namespace {

const char* const kVerdicts[] = {"threat", "benign", "false_positive"};
const char* const kRisks[] = {"low", "medium", "high"};
const char* const kPlanStatuses[] = {"draft",    "validated", "awaiting_approval", "executing",
                                     "completed", "rejected", "failed",            "escalated"};
const char* const kReasons[] = {"no_viable_plan", "plan_validation_failed", "guardrail_abort",
                                "iteration_limit", "provider_failure"};
const char* const kPhases[] = {"received",  "analyzed",      "classified", "planned",
                               "awaiting_approval", "executing", "mitigated", "closed_benign",
                               "escalated", "failed"};

template <typename E, std::size_t N>
E parse_enum(const char* const (&names)[N], std::string_view s, const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (s == names[i]) return static_cast<E>(i);
  }
  throw Error(ErrorCode::SchemaViolation, std::string("unknown ") + what + " '" + std::string(s) + "'");
}

// Tools the Config Tuning workflow executes on a plan's behalf.
bool workflow_covers(std::string_view tool) {
  return tool == "update_ran_cu_config" || tool == "reboot_ran";
}

std::int64_t wall_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string fmt_score(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

Json mitigations_json(const std::vector<kb::Mitigation>& ms) {
  Json out = Json::array();
  for (const auto& m : ms) out.push_back(kb::to_json(m));
  return out;
}

std::vector<kb::Mitigation> mitigations_from_json(const Json& j) {
  std::vector<kb::Mitigation> out;
  for (const auto& m : j) {
    out.push_back({m.at("mitigation_id").get<std::string>(), m.at("name").get<std::string>(),
                   m.at("guidance").get<std::string>()});
  }
  return out;
}

template <typename T>
Json opt_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

}  // namespace

std::string_view to_string(Verdict v) noexcept { return kVerdicts[static_cast<int>(v)]; }
std::string_view to_string(Risk r) noexcept { return kRisks[static_cast<int>(r)]; }
std::string_view to_string(PlanStatus s) noexcept { return kPlanStatuses[static_cast<int>(s)]; }
std::string_view to_string(RecommendationReason r) noexcept { return kReasons[static_cast<int>(r)]; }
std::string_view to_string(Phase p) noexcept { return kPhases[static_cast<int>(p)]; }

std::optional<Phase> parse_phase(std::string_view s) noexcept {
  for (std::size_t i = 0; i < std::size(kPhases); ++i) {
    if (s == kPhases[i]) return static_cast<Phase>(i);
  }
  return std::nullopt;
}

bool is_terminal(Phase p) noexcept {
  return p == Phase::mitigated || p == Phase::closed_benign || p == Phase::escalated ||
         p == Phase::failed;
}

bool phase_transition_allowed(Phase from, Phase to) noexcept {
  switch (from) {
    case Phase::received: return to == Phase::analyzed || to == Phase::escalated;
    case Phase::analyzed:
      return to == Phase::classified || to == Phase::closed_benign || to == Phase::escalated;
    case Phase::classified: return to == Phase::planned || to == Phase::escalated;
    case Phase::planned:
      return to == Phase::awaiting_approval || to == Phase::failed || to == Phase::escalated;
    case Phase::awaiting_approval:
      return to == Phase::executing || to == Phase::failed || to == Phase::escalated;
    case Phase::executing: return to == Phase::mitigated || to == Phase::failed;
    default: return false;
  }
}

bool plan_transition_allowed(PlanStatus from, PlanStatus to) noexcept {
  switch (from) {
    case PlanStatus::draft: return to == PlanStatus::validated || to == PlanStatus::failed;
    case PlanStatus::validated: return to == PlanStatus::awaiting_approval || to == PlanStatus::failed;
    case PlanStatus::awaiting_approval:
      return to == PlanStatus::executing || to == PlanStatus::rejected || to == PlanStatus::escalated;
    case PlanStatus::executing: return to == PlanStatus::completed || to == PlanStatus::failed;
    default: return false;
  }
}

Json to_json(const ThreatReport& r) {
  Json refs = Json::array();
  for (const auto& e : r.evidence_refs) {
    refs.push_back(Json{{"trace_id", e.trace_id}, {"ts_from", e.ts_from}, {"ts_to", e.ts_to}});
  }
  return Json{{"incident_id", r.incident_id},
              {"verdict", to_string(r.verdict)},
              {"event_summary", r.event_summary},
              {"affected_components", r.affected_components},
              {"risk", to_string(r.risk)},
              {"evidence_refs", refs},
              {"produced_by", r.produced_by}};
}

ThreatReport report_from_json(const Json& j) {
  ThreatReport r;
  r.incident_id = j.value("incident_id", "");
  r.verdict = parse_enum<Verdict>(kVerdicts, j.at("verdict").get<std::string>(), "verdict");
  r.event_summary = j.at("event_summary").get<std::string>();
  r.affected_components = j.at("affected_components").get<std::vector<std::string>>();
  r.risk = parse_enum<Risk>(kRisks, j.at("risk").get<std::string>(), "risk");
  if (j.contains("evidence_refs") && j.at("evidence_refs").is_array()) {
    for (const auto& e : j.at("evidence_refs")) {
      r.evidence_refs.push_back({e.at("trace_id").get<std::string>(),
                                 e.at("ts_from").get<TimestampUs>(), e.at("ts_to").get<TimestampUs>()});
    }
  }
  r.produced_by = j.value("produced_by", "");
  return r;
}

Json to_json(const Classification& c) {
  Json cands = Json::array();
  for (const auto& r : c.candidates) cands.push_back(kb::to_json(r));
  return Json{{"incident_id", c.incident_id},
              {"candidates", cands},
              {"selected_technique_ids", c.selected_technique_ids},
              {"mitigation_guidance", mitigations_json(c.mitigation_guidance)},
              {"confidence", c.confidence},
              {"produced_by", c.produced_by}};
}

Classification classification_from_json(const Json& j) {
  Classification c;
  c.incident_id = j.at("incident_id").get<std::string>();
  for (const auto& r : j.at("candidates")) {
    c.candidates.push_back(
        {r.at("technique_id").get<std::string>(), r.at("score").get<double>(), r.at("rank").get<int>()});
  }
  c.selected_technique_ids = j.at("selected_technique_ids").get<std::vector<std::string>>();
  c.mitigation_guidance = mitigations_from_json(j.at("mitigation_guidance"));
  c.confidence = j.at("confidence").get<double>();
  c.produced_by = j.value("produced_by", "");
  return c;
}

Json to_json(const ActionPlan& p) {
  Json steps = Json::array();
  for (const auto& s : p.steps) {
    steps.push_back(Json{{"step_no", s.step_no},
                         {"tool_name", s.tool_name},
                         {"params", s.params},
                         {"rationale", s.rationale}});
  }
  return Json{{"plan_id", p.plan_id},
              {"incident_id", p.incident_id},
              {"steps", steps},
              {"status", to_string(p.status)}};
}

ActionPlan plan_from_json(const Json& j) {
  ActionPlan p;
  p.plan_id = j.at("plan_id").get<std::string>();
  p.incident_id = j.at("incident_id").get<std::string>();
  for (const auto& s : j.at("steps")) {
    p.steps.push_back({s.at("step_no").get<int>(), s.at("tool_name").get<std::string>(),
                       s.at("params"), s.at("rationale").get<std::string>()});
  }
  p.status = parse_enum<PlanStatus>(kPlanStatuses, j.at("status").get<std::string>(), "plan status");
  return p;
}

Json to_json(const Recommendation& r) {
  return Json{{"incident_id", r.incident_id},
              {"guidance", mitigations_json(r.guidance)},
              {"reason", to_string(r.reason)},
              {"violations", r.violations}};
}

Recommendation recommendation_from_json(const Json& j) {
  Recommendation r;
  r.incident_id = j.at("incident_id").get<std::string>();
  r.guidance = mitigations_from_json(j.at("guidance"));
  r.reason = parse_enum<RecommendationReason>(kReasons, j.at("reason").get<std::string>(), "reason");
  r.violations = j.at("violations").get<std::vector<std::string>>();
  return r;
}

std::vector<std::string> IncidentState::tool_calls() const {
  std::vector<std::string> out;
  for (const auto& t : transcripts) out.insert(out.end(), t.tools_executed.begin(), t.tools_executed.end());
  if (workflow) out.insert(out.end(), workflow->tools_executed.begin(), workflow->tools_executed.end());
  return out;
}

Json to_json(const IncidentState& s, bool include_transcripts) {
  Json history = Json::array();
  for (const auto& h : s.history) history.push_back(Json{{"phase", to_string(h.phase)}, {"ts", h.ts}});
  Json j{{"incident_id", s.incident_id},
         {"scenario_id", s.scenario_id},
         {"event", telemetry::to_json(s.event)},
         {"phase", to_string(s.phase)},
         {"history", history},
         {"report", s.report ? to_json(*s.report) : Json(nullptr)},
         {"classification", s.classification ? to_json(*s.classification) : Json(nullptr)},
         {"plan", s.plan ? to_json(*s.plan) : Json(nullptr)},
         {"recommendation", s.recommendation ? to_json(*s.recommendation) : Json(nullptr)},
         {"approval_id", opt_json(s.approval_id)},
         {"workflow", s.workflow ? ran::to_json(*s.workflow) : Json(nullptr)},
         {"escalation_reason", opt_json(s.escalation_reason)},
         {"tool_calls", s.tool_calls()},
         {"latency_ms",
          {{"analysis", s.latency.analysis_ms},
           {"classification", s.latency.classification_ms},
           {"planning", s.latency.planning_ms},
           {"approval_wait", s.latency.approval_wait_ms},
           {"execution", s.latency.execution_ms},
           {"total", s.latency.total_ms()}}},
         {"suspended_at_ms", s.suspended_at_ms}};
  if (include_transcripts) {
    Json ts = Json::array();
    for (const auto& t : s.transcripts) ts.push_back(agent::to_json(t));
    j["transcripts"] = ts;
  }
  return j;
}

IncidentState incident_from_json(const Json& j) {
  IncidentState s;
  s.incident_id = j.at("incident_id").get<std::string>();
  s.scenario_id = j.at("scenario_id").get<std::string>();
  s.event = telemetry::event_from_json(j.at("event"));
  auto phase = parse_phase(j.at("phase").get<std::string>());
  if (!phase) throw Error(ErrorCode::SchemaViolation, "unknown phase");
  s.phase = *phase;
  for (const auto& h : j.at("history")) {
    auto p = parse_phase(h.at("phase").get<std::string>());
    if (!p) throw Error(ErrorCode::SchemaViolation, "unknown phase in history");
    s.history.push_back({*p, h.at("ts").get<TimestampUs>()});
  }
  if (!j.at("report").is_null()) s.report = report_from_json(j.at("report"));
  if (!j.at("classification").is_null()) s.classification = classification_from_json(j.at("classification"));
  if (!j.at("plan").is_null()) s.plan = plan_from_json(j.at("plan"));
  if (!j.at("recommendation").is_null()) s.recommendation = recommendation_from_json(j.at("recommendation"));
  if (!j.at("approval_id").is_null()) s.approval_id = j.at("approval_id").get<std::string>();
  if (!j.at("workflow").is_null()) s.workflow = ran::workflow_result_from_json(j.at("workflow"));
  if (!j.at("escalation_reason").is_null()) s.escalation_reason = j.at("escalation_reason").get<std::string>();
  const auto& lat = j.at("latency_ms");
  s.latency.analysis_ms = lat.at("analysis").get<double>();
  s.latency.classification_ms = lat.at("classification").get<double>();
  s.latency.planning_ms = lat.at("planning").get<double>();
  s.latency.approval_wait_ms = lat.at("approval_wait").get<double>();
  s.latency.execution_ms = lat.at("execution").get<double>();
  s.suspended_at_ms = j.at("suspended_at_ms").get<TimestampUs>();
  if (j.contains("transcripts")) {
    for (const auto& t : j.at("transcripts")) s.transcripts.push_back(agent::transcript_from_json(t));
  }
  return s;
}

Json to_json(const PipelineAuditEntry& e) {
  return Json{{"ts", e.ts},
              {"incident_id", e.incident_id},
              {"phase_from", e.phase_from.empty() ? Json(nullptr) : Json(e.phase_from)},
              {"phase_to", e.phase_to},
              {"detail", e.detail}};
}

void register_read_tools(agent::ToolRegistry& registry,
                         std::shared_ptr<telemetry::TelemetryStore> store,
                         std::shared_ptr<const kb::KnowledgeBase> knowledge) {
  constexpr std::size_t kMaxRecords = 50;

  auto optional_enum = [](std::vector<std::string> allowed) {
    return [allowed](const Json& v) -> std::optional<std::string> {
      if (std::find(allowed.begin(), allowed.end(), v.get<std::string>()) != allowed.end()) {
        return std::nullopt;
      }
      return "must be one of {" + join(allowed, ", ") + "}";
    };
  };

  registry.add(
      {"get_traffic",
       "RRC/NAS records of an ingested trace within an inclusive time window (defaults to the "
       "whole trace), optionally filtered by layer, direction and UE.",
       {{"trace_id", ParamType::String, true, "ingested trace id", {}},
        {"ts_from", ParamType::Timestamp, false, "window start, microseconds", {}},
        {"ts_to", ParamType::Timestamp, false, "window end, microseconds", {}},
        {"layer", ParamType::String, false, "RRC or NAS", optional_enum({"RRC", "NAS"})},
        {"direction", ParamType::String, false, "UL or DL", optional_enum({"UL", "DL"})},
        {"ue_id", ParamType::String, false, "UE identifier", {}}},
       false,
       {AgentRole::analysis}},
      [store](const Json& p) {
        const auto trace_id = p.at("trace_id").get<std::string>();
        const auto span = store->trace_span(trace_id);
        const TimestampUs from = p.contains("ts_from") ? p.at("ts_from").get<TimestampUs>() : span.first;
        const TimestampUs to = p.contains("ts_to") ? p.at("ts_to").get<TimestampUs>() : span.second;
        telemetry::TrafficFilter f;
        if (p.contains("layer")) f.layer = telemetry::parse_layer(p.at("layer").get<std::string>());
        if (p.contains("direction")) {
          f.direction = telemetry::parse_direction(p.at("direction").get<std::string>());
        }
        if (p.contains("ue_id")) f.ue_id = p.at("ue_id").get<std::string>();
        const auto records = store->get_traffic(trace_id, from, to, f);
        Json out{{"trace_id", trace_id}, {"count", records.size()},
                 {"truncated", records.size() > kMaxRecords}};
        Json list = Json::array();
        for (std::size_t i = 0; i < records.size() && i < kMaxRecords; ++i) {
          list.push_back(telemetry::to_json(records[i]));
        }
        out["records"] = list;
        return out;
      });

  registry.add({"get_network_events",
                "Threat events received at or after `since` (microseconds; default 0).",
                {{"since", ParamType::Timestamp, false, "lower bound on received_at", {}}},
                false,
                {AgentRole::analysis}},
               [store](const Json& p) {
                 const TimestampUs since = p.contains("since") ? p.at("since").get<TimestampUs>() : 0;
                 Json out = Json::array();
                 for (const auto& e : store->get_network_events(since)) out.push_back(telemetry::to_json(e));
                 return out;
               });

  registry.add({"get_ue_description",
                "Derived RRC state and security context of one UE.",
                {{"ue_id", ParamType::String, true, "UE identifier", {}}},
                false,
                {AgentRole::analysis, AgentRole::response}},
               [store](const Json& p) {
                 return telemetry::to_json(store->get_ue_description(p.at("ue_id").get<std::string>()));
               });

  auto require_kb = [knowledge]() -> const kb::KnowledgeBase& {
    if (!knowledge) throw Error(ErrorCode::EmptyIndex, "knowledge base index is not loaded");
    return *knowledge;
  };

  registry.add({"search_fight",
                "Semantic search over the FiGHT technique corpus.",
                {{"query", ParamType::String, true, "free text", {}},
                 {"k", ParamType::Integer, false, "number of results (1-10, default 3)",
                  [](const Json& v) -> std::optional<std::string> {
                    const auto k = v.get<std::int64_t>();
                    if (k < 1 || k > 10) return "must be between 1 and 10";
                    return std::nullopt;
                  }}},
                false,
                {AgentRole::classification}},
               [require_kb](const Json& p) {
                 const auto k = p.contains("k") ? p.at("k").get<std::size_t>() : std::size_t{3};
                 Json out = Json::array();
                 for (const auto& r : require_kb().search(p.at("query").get<std::string>(), k)) {
                   out.push_back(kb::to_json(r));
                 }
                 return out;
               });

  registry.add({"get_technique",
                "Full record of one FiGHT technique.",
                {{"technique_id", ParamType::TechniqueId, true, "e.g. FGT1600.501", {}}},
                false,
                {AgentRole::classification}},
               [require_kb](const Json& p) {
                 return kb::to_json(require_kb().get_technique(p.at("technique_id").get<std::string>()));
               });

  registry.add({"get_mitigations",
                "Mitigation guidance attached to one FiGHT technique.",
                {{"technique_id", ParamType::TechniqueId, true, "e.g. FGT1600.501", {}}},
                false,
                {AgentRole::classification, AgentRole::response}},
               [require_kb](const Json& p) {
                 return mitigations_json(
                     require_kb().get_mitigations(p.at("technique_id").get<std::string>()));
               });
}

std::vector<std::string> validate_plan(const Json& steps, const agent::ToolRegistry& registry) {
  std::vector<std::string> v;
  if (!steps.is_array() || steps.empty()) {
    v.push_back("plan must contain at least one step");
    return v;
  }
  std::optional<std::size_t> first_get, first_update, first_reboot, last_update;
  bool mutating = false;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const std::string at = "step " + std::to_string(i + 1) + ": ";
    const Json& s = steps[i];
    if (!s.is_object()) {
      v.push_back(at + "must be an object");
      continue;
    }
    auto tool = s.find("tool");
    if (tool == s.end() || !tool->is_string()) {
      v.push_back(at + "'tool' must be a string");
      continue;
    }
    const auto name = tool->get<std::string>();
    const agent::ToolSpec* spec = registry.find(name);
    if (!spec) {
      v.push_back(at + "unknown tool '" + name + "'");
      continue;
    }
    Json params = s.contains("params") ? s.at("params") : Json::object();
    if (!params.is_object()) {
      v.push_back(at + "'params' must be an object");
    } else if (auto why = agent::check_params(*spec, params)) {
      v.push_back(at + *why);
    }
    if (s.contains("rationale") && !s.at("rationale").is_string()) {
      v.push_back(at + "'rationale' must be a string");
    }
    if (spec->mutating) {
      mutating = true;
      if (!workflow_covers(name)) {
        v.push_back(at + "mutating tool '" + name + "' is not covered by an approval-gated workflow");
      }
    }
    if (name == "get_ran_cu_config" && !first_get) first_get = i;
    if (name == "update_ran_cu_config") {
      if (!first_update) first_update = i;
      last_update = i;
    }
    if (name == "reboot_ran" && !first_reboot) first_reboot = i;
  }
  if (first_update && (!first_get || *first_get > *first_update)) {
    v.push_back("ordering: get_ran_cu_config must precede update_ran_cu_config");
  }
  if (first_reboot && (!first_update || *first_reboot < *last_update)) {
    v.push_back("ordering: update_ran_cu_config must precede reboot_ran");
  }
  if (first_update && !first_reboot) {
    v.push_back("ordering: update_ran_cu_config must be followed by reboot_ran");
  }
  if (!mutating) v.push_back("plan makes no configuration change");
  return v;
}

ActionPlan plan_from_steps(const std::string& plan_id, const std::string& incident_id,
                           const Json& steps) {
  ActionPlan p;
  p.plan_id = plan_id;
  p.incident_id = incident_id;
  int n = 0;
  for (const auto& s : steps) {
    PlanStep step;
    step.step_no = ++n;
    step.tool_name = s.value("tool", "");
    step.params = s.contains("params") && s.at("params").is_object() ? s.at("params") : Json::object();
    step.rationale = s.contains("rationale") && s.at("rationale").is_string()
                         ? s.at("rationale").get<std::string>()
                         : "";
    p.steps.push_back(std::move(step));
  }
  return p;
}

FinalSchema analysis_schema() {
  FinalSchema s;
  s.name = "ThreatReport";
  s.fields = {{"verdict", FieldType::Enum, true, {"threat", "benign", "false_positive"}},
              {"event_summary", FieldType::String, true, {}},
              {"affected_components", FieldType::StringList, true, {}},
              {"risk", FieldType::Enum, true, {"low", "medium", "high"}},
              {"evidence_refs", FieldType::Array, false, {}}};
  s.extra_check = [](const Json& f) -> std::optional<std::string> {
    if (f.at("verdict") == "threat") {
      if (f.at("event_summary").get<std::string>().empty()) {
        return "a threat verdict requires a non-empty event_summary";
      }
      if (f.at("affected_components").empty()) {
        return "a threat verdict requires at least one affected component";
      }
    }
    if (f.contains("evidence_refs")) {
      for (const auto& e : f.at("evidence_refs")) {
        if (!e.is_object() || !e.contains("trace_id") || !e.at("trace_id").is_string() ||
            !e.contains("ts_from") || !e.at("ts_from").is_number_integer() || !e.contains("ts_to") ||
            !e.at("ts_to").is_number_integer()) {
          return "evidence_refs entries need trace_id, ts_from and ts_to";
        }
      }
    }
    return std::nullopt;
  };
  return s;
}

FinalSchema classification_schema(std::vector<std::string> candidate_ids) {
  FinalSchema s;
  s.name = "Classification";
  s.fields = {{"selected_technique_ids", FieldType::StringList, true, {}},
              {"rationale", FieldType::String, false, {}}};
  s.extra_check = [ids = std::move(candidate_ids)](const Json& f) -> std::optional<std::string> {
    const auto& sel = f.at("selected_technique_ids");
    if (sel.empty()) return "selected_technique_ids must not be empty";
    for (const auto& id : sel) {
      if (std::find(ids.begin(), ids.end(), id.get<std::string>()) == ids.end()) {
        return "selected technique " + id.get<std::string>() +
               " is not among the retrieved candidates {" + join(ids, ", ") + "}";
      }
    }
    return std::nullopt;
  };
  return s;
}

FinalSchema response_schema() {
  FinalSchema s;
  s.name = "ActionPlan";
  s.fields = {{"no_plan", FieldType::Boolean, false, {}},
              {"steps", FieldType::Array, false, {}},
              {"rationale", FieldType::String, false, {}}};
  s.extra_check = [](const Json& f) -> std::optional<std::string> {
    const bool no_plan = f.contains("no_plan") && f.at("no_plan").get<bool>();
    const bool has_steps = f.contains("steps") && !f.at("steps").empty();
    if (no_plan == has_steps) return "provide either a non-empty 'steps' list or \"no_plan\": true";
    return std::nullopt;
  };
  return s;
}

Pipeline::Pipeline(std::shared_ptr<const kb::KnowledgeBase> knowledge,
                   std::shared_ptr<telemetry::TelemetryStore> store,
                   std::shared_ptr<ran::RanSimulator> sim,
                   std::shared_ptr<agent::CompletionProvider> provider, PipelineConfig config,
                   std::shared_ptr<Clock> clock, agent::PromptLibrary prompts)
    : kb_(std::move(knowledge)),
      store_(std::move(store)),
      sim_(std::move(sim)),
      provider_(std::move(provider)),
      config_(std::move(config)),
      clock_(std::move(clock)),
      prompts_(std::move(prompts)) {
  register_read_tools(registry_, store_, kb_);
  ran::register_control_tools(registry_, *sim_);
}

std::shared_ptr<Pipeline::Slot> Pipeline::slot(const std::string& incident_id) const {
  std::shared_lock lock(map_mu_);
  auto it = incidents_.find(incident_id);
  if (it == incidents_.end()) throw Error(ErrorCode::UnknownIncident, "unknown incident " + incident_id);
  return it->second;
}

IncidentState Pipeline::snapshot(const Slot& s) const {
  std::lock_guard lock(s.state_mu);
  return s.state;
}

template <typename F>
void Pipeline::mutate(Slot& s, F&& f) {
  std::lock_guard lock(s.state_mu);
  f(s.state);
}

void Pipeline::record_audit(const std::string& incident_id, std::optional<Phase> from, Phase to,
                            const std::string& detail) {
  PipelineAuditEntry e{clock_->now_us(), incident_id, from ? std::string(to_string(*from)) : "",
                       std::string(to_string(to)), detail};
  std::lock_guard lock(audit_mu_);
  if (config_.audit_path) {
    std::ofstream out(*config_.audit_path, std::ios::app);
    out << pipeline::to_json(e).dump() << "\n";
  }
  audit_.push_back(std::move(e));
}

void Pipeline::transition(Slot& s, Phase to, const std::string& detail) {
  Phase from;
  std::string id;
  {
    std::lock_guard lock(s.state_mu);
    from = s.state.phase;
    if (!phase_transition_allowed(from, to)) {
      throw Error(ErrorCode::IllegalTransition, s.state.incident_id + ": " +
                                                    std::string(to_string(from)) + " -> " +
                                                    std::string(to_string(to)));
    }
    s.state.phase = to;
    s.state.history.push_back({to, clock_->now_us()});
    id = s.state.incident_id;
  }
  record_audit(id, from, to, detail);
}

void Pipeline::escalate(Slot& s, const std::string& reason) {
  mutate(s, [&](IncidentState& st) { st.escalation_reason = reason; });
  transition(s, Phase::escalated, reason);
}

namespace {

void set_plan_status(IncidentState& st, PlanStatus to) {
  if (!st.plan) throw Error(ErrorCode::IllegalTransition, st.incident_id + " has no plan");
  if (!plan_transition_allowed(st.plan->status, to)) {
    throw Error(ErrorCode::IllegalTransition, "plan " + st.plan->plan_id + ": " +
                                                  std::string(to_string(st.plan->status)) + " -> " +
                                                  std::string(to_string(to)));
  }
  st.plan->status = to;
}

std::optional<RecommendationReason> reason_for(agent::LoopOutcome o) {
  switch (o) {
    case agent::LoopOutcome::guardrail_abort: return RecommendationReason::guardrail_abort;
    case agent::LoopOutcome::iteration_limit: return RecommendationReason::iteration_limit;
    case agent::LoopOutcome::provider_failure: return RecommendationReason::provider_failure;
    case agent::LoopOutcome::final_answer: return std::nullopt;
  }
  return std::nullopt;
}

std::string event_task(const IncidentState& st, const telemetry::TelemetryStore& store) {
  const auto& e = st.event;
  std::ostringstream os;
  os << "Incident " << st.incident_id << ". Decide whether this event is a genuine security threat "
     << "or a benign network fault, and report it.\n";
  os << "Event " << e.event_id << " from " << telemetry::to_string(e.source);
  if (e.severity_hint) os << " (severity hint: " << telemetry::to_string(*e.severity_hint) << ")";
  os << ": " << e.description << "\n";
  if (e.telemetry_ref) {
    os << "Telemetry trace: " << *e.telemetry_ref;
    if (store.has_trace(*e.telemetry_ref)) {
      const auto span = store.trace_span(*e.telemetry_ref);
      os << " (ts " << span.first << ".." << span.second << ")";
    } else {
      os << " (not ingested)";
    }
    os << "\n";
  }
  if (!e.affected_ue_ids.empty()) os << "Affected UEs: " << join(e.affected_ue_ids, ", ") << "\n";
  return os.str();
}

}  // namespace

std::string Pipeline::submit(const telemetry::EventInput& input, const std::string& scenario_id) {
  telemetry::ThreatEvent event = store_->add_event(input);
  auto s = std::make_shared<Slot>();
  {
    std::unique_lock lock(map_mu_);
    std::ostringstream id;
    id << "INC-" << std::setw(6) << std::setfill('0') << next_seq_++;
    s->state.incident_id = id.str();
    s->state.scenario_id = scenario_id;
    s->state.event = event;
    s->state.history.push_back({Phase::received, clock_->now_us()});
    incidents_.emplace(s->state.incident_id, s);
    order_.push_back(s->state.incident_id);
  }
  record_audit(s->state.incident_id, std::nullopt, Phase::received, "event " + event.event_id);
  return s->state.incident_id;
}

void Pipeline::run_analysis(Slot& s) {
  Stopwatch watch;
  const IncidentState st = snapshot(s);
  agent::TaskContext ctx{st.incident_id, st.scenario_id, event_task(st, *store_), {}};
  agent::LoopConfig cfg{AgentRole::analysis, analysis_schema(), st.incident_id + "/analysis"};
  auto t = agent::run_react_loop(cfg, *provider_, registry_, prompts_, ctx);
  const auto outcome = t.outcome;
  std::optional<ThreatReport> report;
  if (outcome == agent::LoopOutcome::final_answer) {
    report = report_from_json(*t.final_payload());
    report->incident_id = st.incident_id;
    report->produced_by = t.transcript_id;
  }
  mutate(s, [&](IncidentState& x) {
    x.transcripts.push_back(std::move(t));
    x.report = report;
    x.latency.analysis_ms = watch.elapsed_ms();
  });
  if (!report) {
    escalate(s, "analysis: " + std::string(agent::to_string(outcome)));
    return;
  }
  transition(s, Phase::analyzed, "verdict " + std::string(to_string(report->verdict)));
  if (report->verdict != Verdict::threat) {
    transition(s, Phase::closed_benign, "verdict " + std::string(to_string(report->verdict)));
  }
}

void Pipeline::run_classification(Slot& s) {
  Stopwatch watch;
  const IncidentState st = snapshot(s);
  auto done = [&] { mutate(s, [&](IncidentState& x) { x.latency.classification_ms = watch.elapsed_ms(); }); };
  const ThreatReport& report = *st.report;

  std::string query = report.event_summary;
  for (const auto& c : report.affected_components) query += " " + c;

  std::vector<kb::RetrievalResult> candidates;
  try {
    if (!kb_) throw Error(ErrorCode::EmptyIndex, "knowledge base index is not loaded");
    candidates = kb_->search(query, config_.top_k);
  } catch (const Error& e) {
    done();
    escalate(s, std::string(to_string(ErrorCode::EscalatedConfigurationError)) + ": " + e.what());
    return;
  }
  const double confidence = candidates.empty() ? 0.0 : candidates.front().score;
  Classification c;
  c.incident_id = st.incident_id;
  c.candidates = candidates;
  c.confidence = confidence;
  if (candidates.empty() || confidence < config_.confidence_threshold) {
    mutate(s, [&](IncidentState& x) { x.classification = c; });
    done();
    escalate(s, "classification: low_confidence (" + fmt_score(confidence) + ")");
    return;
  }

  std::vector<std::string> ids;
  std::vector<std::string> docs;
  for (const auto& r : candidates) {
    ids.push_back(r.technique_id);
    const auto& t = kb_->get_technique(r.technique_id);
    docs.push_back(t.technique_id + " (score " + fmt_score(r.score) + ") " + t.name + ": " +
                   t.description);
  }
  std::ostringstream task;
  task << "Threat report for incident " << st.incident_id << " (risk " << to_string(report.risk)
       << "): " << report.event_summary << "\n"
       << "Affected components: " << join(report.affected_components, ", ") << "\n"
       << "Select the FiGHT technique(s) that match this threat. Only the retrieved candidates in "
       << "the context documents may be selected: " << join(ids, ", ") << "\n";
  agent::TaskContext ctx{st.incident_id, st.scenario_id, task.str(), docs};
  agent::LoopConfig cfg{AgentRole::classification, classification_schema(ids),
                        st.incident_id + "/classification"};
  auto t = agent::run_react_loop(cfg, *provider_, registry_, prompts_, ctx);
  const auto outcome = t.outcome;
  if (outcome == agent::LoopOutcome::final_answer) {
    c.selected_technique_ids =
        t.final_payload()->at("selected_technique_ids").get<std::vector<std::string>>();
    for (const auto& id : c.selected_technique_ids) {
      for (const auto& m : kb_->get_mitigations(id)) {
        const bool seen = std::any_of(c.mitigation_guidance.begin(), c.mitigation_guidance.end(),
                                      [&](const kb::Mitigation& x) { return x.mitigation_id == m.mitigation_id; });
        if (!seen) c.mitigation_guidance.push_back(m);
      }
    }
    c.produced_by = t.transcript_id;
  }
  mutate(s, [&](IncidentState& x) {
    x.transcripts.push_back(std::move(t));
    if (outcome == agent::LoopOutcome::final_answer) x.classification = c;
  });
  done();
  if (outcome != agent::LoopOutcome::final_answer) {
    escalate(s, "classification: " + std::string(agent::to_string(outcome)));
    return;
  }
  transition(s, Phase::classified, "selected " + join(c.selected_technique_ids, ", "));
}

void Pipeline::run_planning(Slot& s) {
  Stopwatch watch;
  const IncidentState st = snapshot(s);
  auto done = [&] { mutate(s, [&](IncidentState& x) { x.latency.planning_ms = watch.elapsed_ms(); }); };
  const Classification& c = *st.classification;

  auto recommend = [&](RecommendationReason reason, std::vector<std::string> violations) {
    Recommendation r{st.incident_id, c.mitigation_guidance, reason, std::move(violations)};
    mutate(s, [&](IncidentState& x) { x.recommendation = r; });
    done();
    escalate(s, std::string(to_string(reason)));
  };

  std::vector<std::string> docs;
  std::ostringstream task;
  task << "Incident " << st.incident_id << " is classified as " << join(c.selected_technique_ids, ", ")
       << ".\n";
  if (st.report) {
    task << "Threat: " << st.report->event_summary << "\n"
         << "Affected components: " << join(st.report->affected_components, ", ") << "\n";
  }
  task << "Draft a step-by-step plan that uses only the safe APIs listed in the tool catalog to "
       << "carry out the mitigation guidance in the context documents. Reply with "
       << "{\"final\": {\"steps\": [{\"tool\": ..., \"params\": {...}, \"rationale\": ...}]}}, or "
       << "{\"final\": {\"no_plan\": true}} when no catalog API can implement the guidance.\n";
  task << "Catalog: get_ran_cu_config, update_ran_cu_config(changes), reboot_ran. Config changes "
       << "use ops set, remove_list_item, add_list_item over these paths: ";
  std::vector<std::string> paths;
  for (const auto& p : sim_->paths().entries()) paths.push_back(p.path);
  task << join(paths, ", ") << "\n";
  for (const auto& m : c.mitigation_guidance) {
    docs.push_back(m.mitigation_id + " " + m.name + ": " + m.guidance);
  }

  agent::TaskContext ctx{st.incident_id, st.scenario_id, task.str(), docs};
  agent::LoopConfig cfg{AgentRole::response, response_schema(), st.incident_id + "/response"};
  auto t = agent::run_react_loop(cfg, *provider_, registry_, prompts_, ctx);
  const auto outcome = t.outcome;
  std::optional<Json> final;
  if (outcome == agent::LoopOutcome::final_answer) final = *t.final_payload();
  mutate(s, [&](IncidentState& x) { x.transcripts.push_back(std::move(t)); });

  if (auto reason = reason_for(outcome)) {
    recommend(*reason, {});
    return;
  }
  if (final->value("no_plan", false)) {
    recommend(RecommendationReason::no_viable_plan, {});
    return;
  }

  const Json& steps = final->at("steps");
  ActionPlan plan = plan_from_steps("PLAN-" + st.incident_id, st.incident_id, steps);
  auto violations = validate_plan(steps, registry_);
  if (!violations.empty()) {
    mutate(s, [&](IncidentState& x) {
      x.plan = plan;
      set_plan_status(x, PlanStatus::failed);
    });
    recommend(RecommendationReason::plan_validation_failed, std::move(violations));
    return;
  }
  mutate(s, [&](IncidentState& x) {
    x.plan = plan;
    set_plan_status(x, PlanStatus::validated);
  });
  transition(s, Phase::planned, plan.plan_id + " validated, " + std::to_string(plan.steps.size()) + " steps");

  std::vector<ran::PlanStepView> view;
  for (const auto& step : plan.steps) view.push_back({step.tool_name, step.params});
  ran::ConfigTuningWorkflow wf(*sim_);
  ran::WorkflowResult r = wf.start(plan.plan_id, st.incident_id, view);
  mutate(s, [&](IncidentState& x) {
    x.workflow = r;
    x.approval_id = r.approval_id;
    set_plan_status(x, r.status == ran::WorkflowStatus::suspended ? PlanStatus::awaiting_approval
                                                                  : PlanStatus::failed);
    x.suspended_at_ms = wall_ms();
  });
  done();
  if (r.status == ran::WorkflowStatus::suspended) {
    transition(s, Phase::awaiting_approval, "approval " + *r.approval_id);
  } else {
    transition(s, Phase::failed, "workflow failed: " + r.reason.value_or("unknown"));
  }
}

void Pipeline::run_execution(Slot& s) {
  const IncidentState st = snapshot(s);
  const ran::ApprovalRequest a = sim_->get_approval(*st.approval_id);
  if (a.status == ran::ApprovalStatus::pending) {
    throw Error(ErrorCode::NotApproved, a.approval_id + " is still pending");
  }
  const double waited = static_cast<double>(std::max<std::int64_t>(0, wall_ms() - st.suspended_at_ms));
  mutate(s, [&](IncidentState& x) { x.latency.approval_wait_ms = waited; });

  if (a.status == ran::ApprovalStatus::expired) {
    mutate(s, [&](IncidentState& x) { set_plan_status(x, PlanStatus::escalated); });
    escalate(s, "approval_expired");
    return;
  }
  if (a.status == ran::ApprovalStatus::rejected) {
    mutate(s, [&](IncidentState& x) {
      set_plan_status(x, PlanStatus::rejected);
      x.workflow->status = ran::WorkflowStatus::rejected;
    });
    transition(s, Phase::failed, "plan rejected by " + a.decided_by.value_or("operator"));
    return;
  }

  Stopwatch watch;
  mutate(s, [&](IncidentState& x) { set_plan_status(x, PlanStatus::executing); });
  transition(s, Phase::executing, "approved by " + a.decided_by.value_or("operator"));
  ran::ConfigTuningWorkflow wf(*sim_);
  ran::WorkflowResult r = wf.resume(*st.workflow);
  const bool ok = r.status == ran::WorkflowStatus::completed;
  mutate(s, [&](IncidentState& x) {
    x.workflow = r;
    set_plan_status(x, ok ? PlanStatus::completed : PlanStatus::failed);
    x.latency.execution_ms = watch.elapsed_ms();
  });
  if (ok) {
    transition(s, Phase::mitigated,
               "config v" + std::to_string(r.ran_state->active_config_version) + " active");
  } else {
    transition(s, Phase::failed, "workflow failed: " + r.reason.value_or("unknown"));
  }
}

IncidentState Pipeline::process(const std::string& incident_id) {
  auto s = slot(incident_id);
  std::lock_guard run(s->run_mu);
  if (snapshot(*s).phase == Phase::received) run_analysis(*s);
  if (snapshot(*s).phase == Phase::analyzed) run_classification(*s);
  if (snapshot(*s).phase == Phase::classified) run_planning(*s);
  return snapshot(*s);
}

IncidentState Pipeline::resume(const std::string& incident_id) {
  auto s = slot(incident_id);
  std::lock_guard run(s->run_mu);
  const Phase phase = snapshot(*s).phase;
  if (phase != Phase::awaiting_approval) {
    throw Error(ErrorCode::IllegalTransition,
                incident_id + " is " + std::string(to_string(phase)) + ", not awaiting approval");
  }
  run_execution(*s);
  return snapshot(*s);
}

IncidentState Pipeline::decide(const std::string& approval_id, ran::Decision decision,
                               const std::string& operator_id) {
  auto incident = incident_for_approval(approval_id);
  if (!incident) throw Error(ErrorCode::UnknownApprovalId, "unknown approval " + approval_id);
  sim_->decide(approval_id, decision, operator_id);
  return resume(*incident);
}

std::vector<IncidentState> Pipeline::expire_stale() {
  std::vector<IncidentState> out;
  for (const auto& a : sim_->expire_stale()) {
    if (auto id = incident_for_approval(a.approval_id)) out.push_back(resume(*id));
  }
  return out;
}

IncidentState Pipeline::handle_incident(
    const telemetry::EventInput& input, const std::string& scenario_id,
    const std::function<ran::Decision(const ran::ApprovalRequest&)>& decider) {
  const std::string id = submit(input, scenario_id);
  IncidentState st = process(id);
  if (st.phase == Phase::awaiting_approval && decider) {
    const auto a = sim_->get_approval(*st.approval_id);
    st = decide(a.approval_id, decider(a), "auto");
  }
  return st;
}

IncidentState Pipeline::get(const std::string& incident_id) const { return snapshot(*slot(incident_id)); }

std::vector<IncidentState> Pipeline::list() const {
  std::vector<std::shared_ptr<Slot>> slots;
  {
    std::shared_lock lock(map_mu_);
    for (const auto& id : order_) slots.push_back(incidents_.at(id));
  }
  std::vector<IncidentState> out;
  for (const auto& s : slots) out.push_back(snapshot(*s));
  return out;
}

std::optional<std::string> Pipeline::incident_for_approval(const std::string& approval_id) const {
  std::shared_lock lock(map_mu_);
  for (const auto& [id, s] : incidents_) {
    std::lock_guard g(s->state_mu);
    if (s->state.approval_id == approval_id) return id;
  }
  return std::nullopt;
}

std::vector<PipelineAuditEntry> Pipeline::audit_log(const std::optional<std::string>& incident_id) const {
  std::lock_guard lock(audit_mu_);
  if (!incident_id) return audit_;
  std::vector<PipelineAuditEntry> out;
  for (const auto& e : audit_) {
    if (e.incident_id == *incident_id) out.push_back(e);
  }
  return out;
}

Json Pipeline::to_json() const {
  Json incidents = Json::array();
  for (const auto& st : list()) incidents.push_back(pipeline::to_json(st));
  Json audit = Json::array();
  for (const auto& e : audit_log()) audit.push_back(pipeline::to_json(e));
  std::shared_lock lock(map_mu_);
  return Json{{"incidents", incidents}, {"audit", audit}, {"next_seq", next_seq_}};
}

void Pipeline::restore(const Json& j) {
  std::map<std::string, std::shared_ptr<Slot>> incidents;
  std::vector<std::string> order;
  for (const auto& x : j.at("incidents")) {
    auto s = std::make_shared<Slot>();
    s->state = incident_from_json(x);
    order.push_back(s->state.incident_id);
    incidents.emplace(s->state.incident_id, s);
  }
  std::vector<PipelineAuditEntry> audit;
  for (const auto& e : j.at("audit")) {
    audit.push_back({e.at("ts").get<TimestampUs>(), e.at("incident_id").get<std::string>(),
                     e.at("phase_from").is_null() ? "" : e.at("phase_from").get<std::string>(),
                     e.at("phase_to").get<std::string>(), e.at("detail").get<std::string>()});
  }
  {
    std::unique_lock lock(map_mu_);
    incidents_ = std::move(incidents);
    order_ = std::move(order);
    next_seq_ = j.at("next_seq").get<std::size_t>();
  }
  std::lock_guard lock(audit_mu_);
  audit_ = std::move(audit);
}

}  // namespace oransec::pipeline
