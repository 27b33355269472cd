#pragma once

#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oransec/tools.hpp"
#include "oransec/util.hpp"

namespace oransec::ran {

struct SecurityConfig {
  std::vector<std::string> ciphering_algorithms;
  std::vector<std::string> integrity_algorithms;
  bool operator==(const SecurityConfig&) const = default;
};

struct CellConfig {
  std::string plmn;
  std::string cell_id;
  bool operator==(const CellConfig&) const = default;
};

struct CUConfig {
  std::int64_t version = 1;
  SecurityConfig security;
  CellConfig cell;
  std::map<std::string, std::string> other_params;
  bool operator==(const CUConfig&) const = default;
};

Json to_json(const CUConfig& c);
CUConfig config_from_json(const Json& j);
CUConfig load_config(const std::filesystem::path& path);

// Both algorithm lists non-empty and drawn from their closed sets.
std::optional<std::string> config_invariant_violation(const CUConfig& c);

enum class ChangeOp { set, remove_list_item, add_list_item };

std::string_view to_string(ChangeOp op) noexcept;
std::optional<ChangeOp> parse_change_op(std::string_view s) noexcept;

struct ConfigChange {
  std::string path;
  ChangeOp op = ChangeOp::set;
  std::string value;
  bool operator==(const ConfigChange&) const = default;
};

Json to_json(const ConfigChange& c);
// Throws InvalidToolParams.
ConfigChange change_from_json(const Json& j);
std::vector<ConfigChange> changes_from_json(const Json& list);

struct ConfigDiff {
  std::int64_t base_version = 0;
  std::vector<ConfigChange> changes;
};

Json to_json(const ConfigDiff& d);

enum class PathKind { String, StringList };

struct PathSpec {
  std::string path;
  PathKind kind = PathKind::String;
  std::vector<std::string> allowed_values;  // empty: any value
  std::string description;
};

// Typed table of mutable config paths. New controllable parameters (for
// example E2SM-RC style knobs under other_params.*) are added in the data
// file, not in code.
class PathTable {
 public:
  PathTable() = default;
  explicit PathTable(std::vector<PathSpec> entries);
  static PathTable from_json(const Json& doc);
  static PathTable load(const std::filesystem::path& path);

  const PathSpec* find(std::string_view path) const;
  const std::vector<PathSpec>& entries() const noexcept { return entries_; }

  // Violation text for one change against this table, if any.
  std::optional<std::string> check_change(const ConfigChange& change) const;

 private:
  std::vector<PathSpec> entries_;
};

// Applies `changes` to a copy of `base` (version unchanged). Throws
// UnknownPath or InvariantViolation. `on_change` runs before each change and
// may throw to simulate a mid-apply fault.
CUConfig apply_changes(const CUConfig& base, const std::vector<ConfigChange>& changes,
                       const PathTable& paths,
                       const std::function<void(std::size_t)>& on_change = {});

enum class ApprovalStatus { pending, approved, rejected, expired };
enum class Decision { approve, reject };

std::string_view to_string(ApprovalStatus s) noexcept;
std::optional<Decision> parse_decision(std::string_view s) noexcept;

struct PathDelta {
  std::string path;
  Json before;
  Json after;
};

struct ApprovalRequest {
  std::string approval_id;
  std::string incident_id;
  std::string plan_id;
  ConfigDiff diff;
  CUConfig proposed;
  std::vector<PathDelta> deltas;
  std::string rendered_summary;
  ApprovalStatus status = ApprovalStatus::pending;
  std::optional<std::string> decided_by;
  std::optional<TimestampUs> decided_at;
  TimestampUs created_at = 0;
  bool applied = false;
};

Json to_json(const ApprovalRequest& a);
ApprovalRequest approval_from_json(const Json& j);

struct RANState {
  bool running = true;
  std::int64_t boot_count = 1;
  std::int64_t active_config_version = 1;
  std::set<std::string> ue_contexts;
};

Json to_json(const RANState& s);

enum class AuditKind { proposed, approved, rejected, expired, applied, apply_failed, rebooted };

std::string_view to_string(AuditKind k) noexcept;
std::optional<AuditKind> parse_audit_kind(std::string_view s) noexcept;

struct AuditEntry {
  std::int64_t seq = 0;
  TimestampUs ts = 0;
  AuditKind kind = AuditKind::proposed;
  std::string approval_id;
  std::string incident_id;
  std::optional<std::int64_t> from_version;
  std::optional<std::int64_t> to_version;
  std::string detail;
};

Json to_json(const AuditEntry& e);

struct AuditFilter {
  std::optional<std::string> incident_id;
  std::optional<std::string> approval_id;
  std::optional<AuditKind> kind;
};

// Simulated CU control plane. All mutations are serialized; decisions may
// arrive from any thread. Approval waits never hold the internal lock.
class RanSimulator {
 public:
  RanSimulator(CUConfig seed, PathTable paths, std::shared_ptr<Clock> clock = system_clock(),
               std::optional<TimestampUs> approval_ttl_us = std::nullopt);

  CUConfig get_ran_cu_config() const;
  RANState get_ran_state() const;
  const PathTable& paths() const noexcept { return paths_; }

  ApprovalRequest propose_update(const std::string& plan_id, const std::string& incident_id,
                                 const std::vector<ConfigChange>& changes);
  ApprovalRequest decide(const std::string& approval_id, Decision decision,
                         const std::string& operator_id);
  RANState apply_and_reboot(const std::string& approval_id);

  ApprovalRequest get_approval(const std::string& approval_id) const;
  std::vector<ApprovalRequest> list_approvals(std::optional<ApprovalStatus> status = {}) const;
  // Marks pending requests older than the TTL as expired.
  std::vector<ApprovalRequest> expire_stale();

  std::vector<AuditEntry> get_audit_log(const AuditFilter& filter = {}) const;

  void attach_ue(const std::string& ue_id);

  // Blocks until any approval changes after `seen_seq` or the timeout
  // elapses; returns the current change sequence.
  std::uint64_t change_seq() const;
  std::uint64_t wait_for_change(std::uint64_t seen_seq, std::chrono::milliseconds timeout) const;

  // Test hook: called before each change during apply.
  void set_apply_fault(std::function<void(std::size_t)> hook);

  Json to_json() const;
  void restore(const Json& j);

 private:
  void audit_locked(AuditKind kind, const ApprovalRequest& a, std::optional<std::int64_t> from,
                    std::optional<std::int64_t> to, std::string detail);
  ApprovalRequest& approval_locked(const std::string& approval_id);
  void notify_locked();

  PathTable paths_;
  std::shared_ptr<Clock> clock_;
  std::optional<TimestampUs> approval_ttl_us_;

  mutable std::mutex mu_;
  mutable std::condition_variable changed_;
  CUConfig config_;
  RANState state_;
  std::map<std::string, ApprovalRequest> approvals_;
  std::vector<std::string> approval_order_;
  std::vector<AuditEntry> audit_;
  std::size_t next_approval_seq_ = 1;
  std::uint64_t change_seq_ = 0;
  std::function<void(std::size_t)> apply_fault_;
};

// A plan step as the workflow sees it: a catalog tool plus parameters.
struct PlanStepView {
  std::string tool_name;
  Json params = Json::object();
};

enum class WorkflowStep {
  fetch_config,
  materialize_changes,
  propose_update,
  await_decision,
  apply_and_reboot,
  verify,
  record
};

std::string_view to_string(WorkflowStep s) noexcept;

enum class WorkflowStatus { suspended, completed, rejected, failed };

std::string_view to_string(WorkflowStatus s) noexcept;

struct WorkflowResult {
  WorkflowStatus status = WorkflowStatus::failed;
  std::optional<std::string> reason;  // machine code on failure
  std::optional<std::string> approval_id;
  std::vector<WorkflowStep> executed;
  std::vector<std::string> tools_executed;  // catalog tools the workflow ran
  std::optional<RANState> ran_state;
};

Json to_json(const WorkflowResult& r);
WorkflowResult workflow_result_from_json(const Json& j);

// Collects the change lists of every update_ran_cu_config step. Throws
// InvalidToolParams on malformed change objects.
std::vector<ConfigChange> materialize_changes(const std::vector<PlanStepView>& plan);

// Post-reboot config must equal the approved proposal.
std::optional<std::string> verify_applied(const RanSimulator& sim, const ApprovalRequest& approval);

// The fixed Config Tuning sequence: fetch → materialize → propose → await
// decision → apply and reboot → verify → record. The plan contributes change
// values only; no plan content can reorder or skip these steps.
class ConfigTuningWorkflow {
 public:
  explicit ConfigTuningWorkflow(RanSimulator& sim) : sim_(sim) {}

  // Runs up to the approval gate. Returns suspended with the approval id, or
  // failed when a step before the gate errors (no request is left pending).
  WorkflowResult start(const std::string& plan_id, const std::string& incident_id,
                       const std::vector<PlanStepView>& plan);

  // Continues a suspended run once the approval has been decided.
  WorkflowResult resume(const WorkflowResult& suspended);

  // start → decider(approval_id) → resume, for callers that decide inline.
  WorkflowResult run(const std::string& plan_id, const std::string& incident_id,
                     const std::vector<PlanStepView>& plan,
                     const std::function<void(const ApprovalRequest&)>& decider);

 private:
  RanSimulator& sim_;
};

// Registers get_ran_cu_config (read-only, response agent) and the two
// mutating catalog entries whose only executor is ConfigTuningWorkflow.
void register_control_tools(agent::ToolRegistry& registry, RanSimulator& sim);

}  // namespace oransec::ran
