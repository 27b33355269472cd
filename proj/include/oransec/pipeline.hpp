#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "oransec/agent.hpp"
#include "oransec/kb.hpp"
#include "oransec/ran_control.hpp"
#include "oransec/telemetry.hpp"
#include "oransec/util.hpp"

namespace oransec::pipeline {

enum class Verdict { threat, benign, false_positive };
enum class Risk { low, medium, high };

std::string_view to_string(Verdict v) noexcept;
std::string_view to_string(Risk r) noexcept;

struct EvidenceRef {
  std::string trace_id;
  TimestampUs ts_from = 0;
  TimestampUs ts_to = 0;
};

struct ThreatReport {
  std::string incident_id;
  Verdict verdict = Verdict::threat;
  std::string event_summary;
  std::vector<std::string> affected_components;
  Risk risk = Risk::medium;
  std::vector<EvidenceRef> evidence_refs;
  std::string produced_by;
};

Json to_json(const ThreatReport& r);
ThreatReport report_from_json(const Json& j);

struct Classification {
  std::string incident_id;
  std::vector<kb::RetrievalResult> candidates;
  std::vector<std::string> selected_technique_ids;
  std::vector<kb::Mitigation> mitigation_guidance;
  double confidence = 0.0;
  std::string produced_by;
};

Json to_json(const Classification& c);
Classification classification_from_json(const Json& j);

enum class PlanStatus {
  draft,
  validated,
  awaiting_approval,
  executing,
  completed,
  rejected,
  failed,
  escalated
};

std::string_view to_string(PlanStatus s) noexcept;
bool plan_transition_allowed(PlanStatus from, PlanStatus to) noexcept;

struct PlanStep {
  int step_no = 1;
  std::string tool_name;
  Json params = Json::object();
  std::string rationale;
};

struct ActionPlan {
  std::string plan_id;
  std::string incident_id;
  std::vector<PlanStep> steps;
  PlanStatus status = PlanStatus::draft;
};

Json to_json(const ActionPlan& p);
ActionPlan plan_from_json(const Json& j);

enum class RecommendationReason {
  no_viable_plan,
  plan_validation_failed,
  guardrail_abort,
  iteration_limit,
  provider_failure
};

std::string_view to_string(RecommendationReason r) noexcept;

struct Recommendation {
  std::string incident_id;
  std::vector<kb::Mitigation> guidance;  // copied verbatim from the classification
  RecommendationReason reason = RecommendationReason::no_viable_plan;
  std::vector<std::string> violations;
};

Json to_json(const Recommendation& r);
Recommendation recommendation_from_json(const Json& j);

enum class Phase {
  received,
  analyzed,
  classified,
  planned,
  awaiting_approval,
  executing,
  mitigated,
  closed_benign,
  escalated,
  failed
};

std::string_view to_string(Phase p) noexcept;
std::optional<Phase> parse_phase(std::string_view s) noexcept;
bool is_terminal(Phase p) noexcept;
bool phase_transition_allowed(Phase from, Phase to) noexcept;

struct PhaseStamp {
  Phase phase = Phase::received;
  TimestampUs ts = 0;
};

struct StageLatency {
  double analysis_ms = 0.0;
  double classification_ms = 0.0;
  double planning_ms = 0.0;
  double approval_wait_ms = 0.0;
  double execution_ms = 0.0;
  double total_ms() const {
    return analysis_ms + classification_ms + planning_ms + approval_wait_ms + execution_ms;
  }
};

struct IncidentState {
  std::string incident_id;
  std::string scenario_id;
  telemetry::ThreatEvent event;
  Phase phase = Phase::received;
  std::vector<PhaseStamp> history;
  std::optional<ThreatReport> report;
  std::optional<Classification> classification;
  std::optional<ActionPlan> plan;
  std::optional<Recommendation> recommendation;
  std::vector<agent::AgentTranscript> transcripts;
  std::optional<std::string> approval_id;
  std::optional<ran::WorkflowResult> workflow;
  std::optional<std::string> escalation_reason;
  StageLatency latency;
  TimestampUs suspended_at_ms = 0;  // wall clock, for approval wait

  // Catalog tools run for this incident: agent tool calls plus the tools the
  // Config Tuning workflow executed, in order of execution.
  std::vector<std::string> tool_calls() const;
};

Json to_json(const IncidentState& s, bool include_transcripts = true);
IncidentState incident_from_json(const Json& j);

// Registers the read-only network data and knowledge-base tools. A null
// knowledge base leaves the kb tools registered but failing with EmptyIndex.
void register_read_tools(agent::ToolRegistry& registry,
                         std::shared_ptr<telemetry::TelemetryStore> store,
                         std::shared_ptr<const kb::KnowledgeBase> knowledge);

// Validates a plan draft (the `steps` array of a response final answer).
// Returns every violation found, in step order; empty means valid.
std::vector<std::string> validate_plan(const Json& steps, const agent::ToolRegistry& registry);
ActionPlan plan_from_steps(const std::string& plan_id, const std::string& incident_id,
                           const Json& steps);

agent::FinalSchema analysis_schema();
agent::FinalSchema classification_schema(std::vector<std::string> candidate_ids);
agent::FinalSchema response_schema();

struct PipelineConfig {
  std::size_t top_k = 3;
  double confidence_threshold = 0.05;
  std::optional<std::filesystem::path> audit_path;  // JSONL, appended
};

struct PipelineAuditEntry {
  TimestampUs ts = 0;
  std::string incident_id;
  std::string phase_from;  // empty for the creation entry
  std::string phase_to;
  std::string detail;
};

Json to_json(const PipelineAuditEntry& e);

// Drives incidents through analysis, classification and response planning.
// Incidents progress independently; all transitions of one incident are
// serialized. A plan awaiting approval suspends the incident without holding
// any lock; decide() resumes it.
class Pipeline {
 public:
  Pipeline(std::shared_ptr<const kb::KnowledgeBase> knowledge,
           std::shared_ptr<telemetry::TelemetryStore> store, std::shared_ptr<ran::RanSimulator> sim,
           std::shared_ptr<agent::CompletionProvider> provider, PipelineConfig config = {},
           std::shared_ptr<Clock> clock = system_clock(),
           agent::PromptLibrary prompts = agent::PromptLibrary::builtin());

  const agent::ToolRegistry& registry() const noexcept { return registry_; }
  ran::RanSimulator& simulator() noexcept { return *sim_; }
  telemetry::TelemetryStore& telemetry() noexcept { return *store_; }

  // Stores the event and opens an incident in phase received.
  std::string submit(const telemetry::EventInput& input, const std::string& scenario_id);

  // Runs the stages until a terminal phase or the approval gate.
  IncidentState process(const std::string& incident_id);

  // Records a decision for a pending approval and resumes its incident.
  IncidentState decide(const std::string& approval_id, ran::Decision decision,
                       const std::string& operator_id);

  // Resumes an incident suspended at the approval gate once its request is no
  // longer pending (decided elsewhere or expired).
  IncidentState resume(const std::string& incident_id);

  // Expires stale approvals in the simulator and resumes their incidents.
  std::vector<IncidentState> expire_stale();

  // submit + process, then, if suspended and `decider` is set, the decider
  // decides the approval and the incident resumes.
  IncidentState handle_incident(
      const telemetry::EventInput& input, const std::string& scenario_id,
      const std::function<ran::Decision(const ran::ApprovalRequest&)>& decider = {});

  IncidentState get(const std::string& incident_id) const;
  std::vector<IncidentState> list() const;
  std::optional<std::string> incident_for_approval(const std::string& approval_id) const;
  std::vector<PipelineAuditEntry> audit_log(const std::optional<std::string>& incident_id = {}) const;

  // Incidents, audit trail and id sequence (not the simulator or telemetry).
  Json to_json() const;
  void restore(const Json& j);

 private:
  struct Slot {
    std::mutex run_mu;            // serializes stage execution
    mutable std::mutex state_mu;  // guards `state` snapshots
    IncidentState state;
  };

  std::shared_ptr<Slot> slot(const std::string& incident_id) const;
  IncidentState snapshot(const Slot& s) const;
  template <typename F>
  void mutate(Slot& s, F&& f);
  void transition(Slot& s, Phase to, const std::string& detail);
  void escalate(Slot& s, const std::string& reason);
  void record_audit(const std::string& incident_id, std::optional<Phase> from, Phase to,
                    const std::string& detail);

  void run_analysis(Slot& s);
  void run_classification(Slot& s);
  void run_planning(Slot& s);
  void run_execution(Slot& s);

  std::shared_ptr<const kb::KnowledgeBase> kb_;
  std::shared_ptr<telemetry::TelemetryStore> store_;
  std::shared_ptr<ran::RanSimulator> sim_;
  std::shared_ptr<agent::CompletionProvider> provider_;
  PipelineConfig config_;
  std::shared_ptr<Clock> clock_;
  agent::PromptLibrary prompts_;
  agent::ToolRegistry registry_;

  mutable std::shared_mutex map_mu_;
  std::map<std::string, std::shared_ptr<Slot>> incidents_;
  std::vector<std::string> order_;
  std::size_t next_seq_ = 1;

  mutable std::mutex audit_mu_;
  std::vector<PipelineAuditEntry> audit_;
};

}  // namespace oransec::pipeline
