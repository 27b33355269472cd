#include "oransec/ran_control.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

#include "oransec/error.hpp"

namespace oransec::ran {

namespace {

const std::vector<std::string> kCiphering{"nea0", "nea1", "nea2", "nea3"};
const std::vector<std::string> kIntegrity{"nia0", "nia1", "nia2", "nia3"};

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

std::string fmt_list(const std::vector<std::string>& v) { return "[" + join(v, ", ") + "]"; }

}  // namespace

Json to_json(const CUConfig& c) {
  return Json{{"version", c.version},
              {"security",
               {{"ciphering_algorithms", c.security.ciphering_algorithms},
                {"integrity_algorithms", c.security.integrity_algorithms}}},
              {"cell", {{"plmn", c.cell.plmn}, {"cell_id", c.cell.cell_id}}},
              {"other_params", c.other_params}};
}

CUConfig config_from_json(const Json& j) {
  try {
    CUConfig c;
    c.version = j.at("version").get<std::int64_t>();
    const auto& sec = j.at("security");
    c.security.ciphering_algorithms = sec.at("ciphering_algorithms").get<std::vector<std::string>>();
    c.security.integrity_algorithms = sec.at("integrity_algorithms").get<std::vector<std::string>>();
    c.cell.plmn = j.at("cell").at("plmn").get<std::string>();
    c.cell.cell_id = j.at("cell").at("cell_id").get<std::string>();
    if (j.contains("other_params")) {
      c.other_params = j.at("other_params").get<std::map<std::string, std::string>>();
    }
    if (auto v = config_invariant_violation(c)) throw Error(ErrorCode::InvariantViolation, *v);
    return c;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("CU config: ") + e.what());
  }
}

CUConfig load_config(const std::filesystem::path& path) { return config_from_json(read_json_file(path)); }

std::optional<std::string> config_invariant_violation(const CUConfig& c) {
  if (c.security.ciphering_algorithms.empty()) return "ciphering_algorithms must not be empty";
  if (c.security.integrity_algorithms.empty()) return "integrity_algorithms must not be empty";
  for (const auto& a : c.security.ciphering_algorithms) {
    if (!contains(kCiphering, a)) return "unsupported ciphering algorithm " + a;
  }
  for (const auto& a : c.security.integrity_algorithms) {
    if (!contains(kIntegrity, a)) return "unsupported integrity algorithm " + a;
  }
  return std::nullopt;
}

std::string_view to_string(ChangeOp op) noexcept {
  switch (op) {
    case ChangeOp::set: return "set";
    case ChangeOp::remove_list_item: return "remove_list_item";
    case ChangeOp::add_list_item: return "add_list_item";
  }
  return "set";
}

std::optional<ChangeOp> parse_change_op(std::string_view s) noexcept {
  if (s == "set") return ChangeOp::set;
  if (s == "remove_list_item") return ChangeOp::remove_list_item;
  if (s == "add_list_item") return ChangeOp::add_list_item;
  return std::nullopt;
}

Json to_json(const ConfigChange& c) {
  return Json{{"path", c.path}, {"op", to_string(c.op)}, {"value", c.value}};
}

ConfigChange change_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidToolParams, "change must be an object");
  auto str = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
      throw Error(ErrorCode::InvalidToolParams, std::string("change.") + key + " must be a string");
    }
    return it->get<std::string>();
  };
  ConfigChange c;
  c.path = str("path");
  auto op = parse_change_op(str("op"));
  if (!op) throw Error(ErrorCode::InvalidToolParams, "change.op must be set|remove_list_item|add_list_item");
  c.op = *op;
  c.value = str("value");
  return c;
}

std::vector<ConfigChange> changes_from_json(const Json& list) {
  if (!list.is_array()) throw Error(ErrorCode::InvalidToolParams, "changes must be an array");
  std::vector<ConfigChange> out;
  for (const auto& c : list) out.push_back(change_from_json(c));
  return out;
}

Json to_json(const ConfigDiff& d) {
  Json changes = Json::array();
  for (const auto& c : d.changes) changes.push_back(to_json(c));
  return Json{{"base_version", d.base_version}, {"changes", changes}};
}

PathTable::PathTable(std::vector<PathSpec> entries) : entries_(std::move(entries)) {}

PathTable PathTable::from_json(const Json& doc) {
  try {
    std::vector<PathSpec> entries;
    for (const auto& e : doc.at("paths")) {
      PathSpec p;
      p.path = e.at("path").get<std::string>();
      const auto kind = e.at("kind").get<std::string>();
      if (kind == "string") {
        p.kind = PathKind::String;
      } else if (kind == "string_list") {
        p.kind = PathKind::StringList;
      } else {
        throw Error(ErrorCode::SchemaViolation, "path " + p.path + ": unknown kind " + kind);
      }
      if (e.contains("allowed_values")) {
        p.allowed_values = e.at("allowed_values").get<std::vector<std::string>>();
      }
      p.description = e.value("description", "");
      entries.push_back(std::move(p));
    }
    return PathTable(std::move(entries));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("path table: ") + e.what());
  }
}

PathTable PathTable::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

const PathSpec* PathTable::find(std::string_view path) const {
  for (const auto& e : entries_) {
    if (e.path == path) return &e;
  }
  return nullptr;
}

std::optional<std::string> PathTable::check_change(const ConfigChange& change) const {
  const PathSpec* spec = find(change.path);
  if (!spec) return "unknown config path '" + change.path + "'";
  const bool list_op = change.op != ChangeOp::set;
  if (list_op && spec->kind != PathKind::StringList) {
    return std::string(to_string(change.op)) + " is not valid on scalar path " + change.path;
  }
  if (!list_op && spec->kind != PathKind::String) {
    return "set is not valid on list path " + change.path;
  }
  if (!spec->allowed_values.empty() && !contains(spec->allowed_values, change.value)) {
    return "value '" + change.value + "' not allowed for " + change.path;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string>* list_slot(CUConfig& c, const std::string& path) {
  if (path == "security.ciphering_algorithms") return &c.security.ciphering_algorithms;
  if (path == "security.integrity_algorithms") return &c.security.integrity_algorithms;
  return nullptr;
}

std::string* scalar_slot(CUConfig& c, const std::string& path) {
  if (path == "cell.plmn") return &c.cell.plmn;
  if (path == "cell.cell_id") return &c.cell.cell_id;
  static const std::string kOther = "other_params.";
  if (path.rfind(kOther, 0) == 0 && path.size() > kOther.size()) {
    return &c.other_params[path.substr(kOther.size())];
  }
  return nullptr;
}

Json path_value(const CUConfig& c, const std::string& path) {
  CUConfig copy = c;
  if (auto* l = list_slot(copy, path)) return *l;
  if (path.rfind("other_params.", 0) == 0) {
    auto it = c.other_params.find(path.substr(13));
    return it == c.other_params.end() ? Json(nullptr) : Json(it->second);
  }
  if (auto* s = scalar_slot(copy, path)) return *s;
  return nullptr;
}

std::string render_value(const Json& v) {
  if (v.is_null()) return "(unset)";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) return fmt_list(v.get<std::vector<std::string>>());
  return v.dump();
}

}  // namespace

CUConfig apply_changes(const CUConfig& base, const std::vector<ConfigChange>& changes,
                       const PathTable& paths, const std::function<void(std::size_t)>& on_change) {
  CUConfig next = base;
  for (std::size_t i = 0; i < changes.size(); ++i) {
    if (on_change) on_change(i);
    const auto& ch = changes[i];
    if (!paths.find(ch.path)) throw Error(ErrorCode::UnknownPath, "unknown config path '" + ch.path + "'");
    if (auto v = paths.check_change(ch)) throw Error(ErrorCode::InvariantViolation, *v);
    if (ch.op == ChangeOp::set) {
      std::string* slot = scalar_slot(next, ch.path);
      if (!slot) throw Error(ErrorCode::UnknownPath, "path '" + ch.path + "' is not addressable");
      *slot = ch.value;
      continue;
    }
    std::vector<std::string>* list = list_slot(next, ch.path);
    if (!list) throw Error(ErrorCode::UnknownPath, "path '" + ch.path + "' is not addressable");
    auto it = std::find(list->begin(), list->end(), ch.value);
    if (ch.op == ChangeOp::remove_list_item) {
      if (it == list->end()) {
        throw Error(ErrorCode::InvariantViolation, ch.value + " is not in " + ch.path);
      }
      list->erase(it);
    } else {
      if (it != list->end()) {
        throw Error(ErrorCode::InvariantViolation, ch.value + " is already in " + ch.path);
      }
      list->push_back(ch.value);
    }
  }
  if (auto v = config_invariant_violation(next)) throw Error(ErrorCode::InvariantViolation, *v);
  return next;
}

std::string_view to_string(ApprovalStatus s) noexcept {
  switch (s) {
    case ApprovalStatus::pending: return "pending";
    case ApprovalStatus::approved: return "approved";
    case ApprovalStatus::rejected: return "rejected";
    case ApprovalStatus::expired: return "expired";
  }
  return "pending";
}

namespace {

ApprovalStatus parse_status(std::string_view s) {
  if (s == "pending") return ApprovalStatus::pending;
  if (s == "approved") return ApprovalStatus::approved;
  if (s == "rejected") return ApprovalStatus::rejected;
  if (s == "expired") return ApprovalStatus::expired;
  throw Error(ErrorCode::SchemaViolation, "unknown approval status " + std::string(s));
}

}  // namespace

std::optional<Decision> parse_decision(std::string_view s) noexcept {
  if (s == "approve" || s == "approved") return Decision::approve;
  if (s == "reject" || s == "rejected") return Decision::reject;
  return std::nullopt;
}

Json to_json(const ApprovalRequest& a) {
  Json deltas = Json::array();
  for (const auto& d : a.deltas) {
    deltas.push_back(Json{{"path", d.path}, {"before", d.before}, {"after", d.after}});
  }
  Json j{{"approval_id", a.approval_id},
         {"incident_id", a.incident_id},
         {"plan_id", a.plan_id},
         {"diff", to_json(a.diff)},
         {"proposed", to_json(a.proposed)},
         {"path_deltas", deltas},
         {"rendered_summary", a.rendered_summary},
         {"status", to_string(a.status)},
         {"created_at", a.created_at},
         {"applied", a.applied}};
  j["decided_by"] = a.decided_by ? Json(*a.decided_by) : Json(nullptr);
  j["decided_at"] = a.decided_at ? Json(*a.decided_at) : Json(nullptr);
  return j;
}

ApprovalRequest approval_from_json(const Json& j) {
  ApprovalRequest a;
  a.approval_id = j.at("approval_id").get<std::string>();
  a.incident_id = j.at("incident_id").get<std::string>();
  a.plan_id = j.at("plan_id").get<std::string>();
  a.diff.base_version = j.at("diff").at("base_version").get<std::int64_t>();
  a.diff.changes = changes_from_json(j.at("diff").at("changes"));
  a.proposed = config_from_json(j.at("proposed"));
  for (const auto& d : j.at("path_deltas")) {
    a.deltas.push_back({d.at("path").get<std::string>(), d.at("before"), d.at("after")});
  }
  a.rendered_summary = j.at("rendered_summary").get<std::string>();
  a.status = parse_status(j.at("status").get<std::string>());
  a.created_at = j.at("created_at").get<TimestampUs>();
  a.applied = j.at("applied").get<bool>();
  if (!j.at("decided_by").is_null()) a.decided_by = j.at("decided_by").get<std::string>();
  if (!j.at("decided_at").is_null()) a.decided_at = j.at("decided_at").get<TimestampUs>();
  return a;
}

Json to_json(const RANState& s) {
  return Json{{"running", s.running},
              {"boot_count", s.boot_count},
              {"active_config_version", s.active_config_version},
              {"ue_contexts", s.ue_contexts}};
}

std::string_view to_string(AuditKind k) noexcept {
  switch (k) {
    case AuditKind::proposed: return "proposed";
    case AuditKind::approved: return "approved";
    case AuditKind::rejected: return "rejected";
    case AuditKind::expired: return "expired";
    case AuditKind::applied: return "applied";
    case AuditKind::apply_failed: return "apply_failed";
    case AuditKind::rebooted: return "rebooted";
  }
  return "proposed";
}

std::optional<AuditKind> parse_audit_kind(std::string_view s) noexcept {
  for (auto k : {AuditKind::proposed, AuditKind::approved, AuditKind::rejected, AuditKind::expired,
                 AuditKind::applied, AuditKind::apply_failed, AuditKind::rebooted}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

Json to_json(const AuditEntry& e) {
  Json j{{"seq", e.seq},
         {"ts", e.ts},
         {"kind", to_string(e.kind)},
         {"approval_id", e.approval_id},
         {"incident_id", e.incident_id},
         {"detail", e.detail}};
  j["from_version"] = e.from_version ? Json(*e.from_version) : Json(nullptr);
  j["to_version"] = e.to_version ? Json(*e.to_version) : Json(nullptr);
  return j;
}

namespace {

AuditEntry audit_from_json(const Json& j) {
  AuditEntry e;
  e.seq = j.at("seq").get<std::int64_t>();
  e.ts = j.at("ts").get<TimestampUs>();
  auto kind = parse_audit_kind(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::SchemaViolation, "unknown audit kind");
  e.kind = *kind;
  e.approval_id = j.at("approval_id").get<std::string>();
  e.incident_id = j.at("incident_id").get<std::string>();
  e.detail = j.at("detail").get<std::string>();
  if (!j.at("from_version").is_null()) e.from_version = j.at("from_version").get<std::int64_t>();
  if (!j.at("to_version").is_null()) e.to_version = j.at("to_version").get<std::int64_t>();
  return e;
}

}  // namespace

RanSimulator::RanSimulator(CUConfig seed, PathTable paths, std::shared_ptr<Clock> clock,
                           std::optional<TimestampUs> approval_ttl_us)
    : paths_(std::move(paths)),
      clock_(std::move(clock)),
      approval_ttl_us_(approval_ttl_us),
      config_(std::move(seed)) {
  if (auto v = config_invariant_violation(config_)) throw Error(ErrorCode::InvariantViolation, *v);
  state_.active_config_version = config_.version;
}

CUConfig RanSimulator::get_ran_cu_config() const {
  std::lock_guard lock(mu_);
  return config_;
}

RANState RanSimulator::get_ran_state() const {
  std::lock_guard lock(mu_);
  return state_;
}

void RanSimulator::audit_locked(AuditKind kind, const ApprovalRequest& a,
                                std::optional<std::int64_t> from, std::optional<std::int64_t> to,
                                std::string detail) {
  AuditEntry e;
  e.seq = static_cast<std::int64_t>(audit_.size()) + 1;
  e.ts = clock_->now_us();
  e.kind = kind;
  e.approval_id = a.approval_id;
  e.incident_id = a.incident_id;
  e.from_version = from;
  e.to_version = to;
  e.detail = std::move(detail);
  audit_.push_back(std::move(e));
}

void RanSimulator::notify_locked() {
  ++change_seq_;
  changed_.notify_all();
}

ApprovalRequest& RanSimulator::approval_locked(const std::string& approval_id) {
  auto it = approvals_.find(approval_id);
  if (it == approvals_.end()) throw Error(ErrorCode::UnknownApprovalId, "unknown approval " + approval_id);
  return it->second;
}

ApprovalRequest RanSimulator::propose_update(const std::string& plan_id, const std::string& incident_id,
                                             const std::vector<ConfigChange>& changes) {
  if (changes.empty()) throw Error(ErrorCode::EmptyChangeSet, "no changes proposed");
  std::lock_guard lock(mu_);
  CUConfig proposed = apply_changes(config_, changes, paths_);
  proposed.version = config_.version + 1;

  ApprovalRequest a;
  std::ostringstream id;
  id << "APR-" << std::setw(4) << std::setfill('0') << next_approval_seq_++;
  a.approval_id = id.str();
  a.incident_id = incident_id;
  a.plan_id = plan_id;
  a.diff = {config_.version, changes};
  a.proposed = proposed;
  a.created_at = clock_->now_us();

  std::vector<std::string> seen;
  for (const auto& c : changes) {
    if (contains(seen, c.path)) continue;
    seen.push_back(c.path);
    a.deltas.push_back({c.path, path_value(config_, c.path), path_value(proposed, c.path)});
  }

  std::ostringstream summary;
  summary << "CU config v" << config_.version << " -> v" << proposed.version << " (incident "
          << incident_id << ", plan " << plan_id << ")\n";
  for (const auto& c : changes) {
    summary << "- " << to_string(c.op) << " " << c.path << ": " << c.value << "\n";
  }
  for (const auto& d : a.deltas) {
    summary << "  " << d.path << ": " << render_value(d.before) << " -> " << render_value(d.after)
            << "\n";
  }
  a.rendered_summary = summary.str();

  approvals_.emplace(a.approval_id, a);
  approval_order_.push_back(a.approval_id);
  audit_locked(AuditKind::proposed, a, config_.version, proposed.version,
               std::to_string(changes.size()) + " change(s)");
  notify_locked();
  return a;
}

ApprovalRequest RanSimulator::decide(const std::string& approval_id, Decision decision,
                                     const std::string& operator_id) {
  std::lock_guard lock(mu_);
  ApprovalRequest& a = approval_locked(approval_id);
  if (a.status != ApprovalStatus::pending) {
    throw Error(ErrorCode::AlreadyDecided,
                approval_id + " already " + std::string(to_string(a.status)));
  }
  a.status = decision == Decision::approve ? ApprovalStatus::approved : ApprovalStatus::rejected;
  a.decided_by = operator_id;
  a.decided_at = clock_->now_us();
  audit_locked(decision == Decision::approve ? AuditKind::approved : AuditKind::rejected, a,
               std::nullopt, std::nullopt, "by " + operator_id);
  notify_locked();
  return a;
}

RANState RanSimulator::apply_and_reboot(const std::string& approval_id) {
  std::lock_guard lock(mu_);
  ApprovalRequest& a = approval_locked(approval_id);
  if (a.status != ApprovalStatus::approved) {
    throw Error(ErrorCode::NotApproved,
                approval_id + " is " + std::string(to_string(a.status)) + ", not approved");
  }
  if (a.applied) throw Error(ErrorCode::VersionConflict, approval_id + " was already applied");
  if (a.diff.base_version != config_.version) {
    throw Error(ErrorCode::VersionConflict,
                approval_id + " targets v" + std::to_string(a.diff.base_version) +
                    " but config is at v" + std::to_string(config_.version));
  }
  const std::int64_t from = config_.version;
  CUConfig next;
  try {
    next = apply_changes(config_, a.diff.changes, paths_, apply_fault_);
  } catch (const std::exception& e) {
    // config_ is untouched: changes were applied to a copy.
    audit_locked(AuditKind::apply_failed, a, from, std::nullopt, e.what());
    notify_locked();
    throw Error(ErrorCode::ApplyFailed, std::string("apply failed, config kept at v") +
                                            std::to_string(from) + ": " + e.what());
  }
  next.version = from + 1;
  config_ = std::move(next);
  a.applied = true;
  audit_locked(AuditKind::applied, a, from, config_.version, "");

  state_.running = false;
  state_.ue_contexts.clear();
  state_.active_config_version = config_.version;
  ++state_.boot_count;
  state_.running = true;
  audit_locked(AuditKind::rebooted, a, std::nullopt, config_.version,
               "boot_count=" + std::to_string(state_.boot_count));
  notify_locked();
  return state_;
}

ApprovalRequest RanSimulator::get_approval(const std::string& approval_id) const {
  std::lock_guard lock(mu_);
  auto it = approvals_.find(approval_id);
  if (it == approvals_.end()) throw Error(ErrorCode::UnknownApprovalId, "unknown approval " + approval_id);
  return it->second;
}

std::vector<ApprovalRequest> RanSimulator::list_approvals(std::optional<ApprovalStatus> status) const {
  std::lock_guard lock(mu_);
  std::vector<ApprovalRequest> out;
  for (const auto& id : approval_order_) {
    const auto& a = approvals_.at(id);
    if (!status || a.status == *status) out.push_back(a);
  }
  return out;
}

std::vector<ApprovalRequest> RanSimulator::expire_stale() {
  std::lock_guard lock(mu_);
  std::vector<ApprovalRequest> out;
  if (!approval_ttl_us_) return out;
  const TimestampUs now = clock_->now_us();
  for (const auto& id : approval_order_) {
    auto& a = approvals_.at(id);
    if (a.status == ApprovalStatus::pending && now - a.created_at >= *approval_ttl_us_) {
      a.status = ApprovalStatus::expired;
      a.decided_at = now;
      audit_locked(AuditKind::expired, a, std::nullopt, std::nullopt, "ttl elapsed");
      out.push_back(a);
    }
  }
  if (!out.empty()) notify_locked();
  return out;
}

std::vector<AuditEntry> RanSimulator::get_audit_log(const AuditFilter& filter) const {
  std::lock_guard lock(mu_);
  std::vector<AuditEntry> out;
  for (const auto& e : audit_) {
    if (filter.incident_id && e.incident_id != *filter.incident_id) continue;
    if (filter.approval_id && e.approval_id != *filter.approval_id) continue;
    if (filter.kind && e.kind != *filter.kind) continue;
    out.push_back(e);
  }
  return out;
}

void RanSimulator::attach_ue(const std::string& ue_id) {
  std::lock_guard lock(mu_);
  state_.ue_contexts.insert(ue_id);
}

std::uint64_t RanSimulator::change_seq() const {
  std::lock_guard lock(mu_);
  return change_seq_;
}

std::uint64_t RanSimulator::wait_for_change(std::uint64_t seen_seq,
                                            std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mu_);
  changed_.wait_for(lock, timeout, [&] { return change_seq_ != seen_seq; });
  return change_seq_;
}

void RanSimulator::set_apply_fault(std::function<void(std::size_t)> hook) {
  std::lock_guard lock(mu_);
  apply_fault_ = std::move(hook);
}

Json RanSimulator::to_json() const {
  std::lock_guard lock(mu_);
  Json approvals = Json::array();
  for (const auto& id : approval_order_) approvals.push_back(ran::to_json(approvals_.at(id)));
  Json audit = Json::array();
  for (const auto& e : audit_) audit.push_back(ran::to_json(e));
  return Json{{"config", ran::to_json(config_)},
              {"state", ran::to_json(state_)},
              {"approvals", approvals},
              {"audit", audit},
              {"next_approval_seq", next_approval_seq_}};
}

void RanSimulator::restore(const Json& j) {
  std::lock_guard lock(mu_);
  config_ = config_from_json(j.at("config"));
  const auto& s = j.at("state");
  state_.running = s.at("running").get<bool>();
  state_.boot_count = s.at("boot_count").get<std::int64_t>();
  state_.active_config_version = s.at("active_config_version").get<std::int64_t>();
  state_.ue_contexts = s.at("ue_contexts").get<std::set<std::string>>();
  approvals_.clear();
  approval_order_.clear();
  for (const auto& a : j.at("approvals")) {
    auto req = approval_from_json(a);
    approval_order_.push_back(req.approval_id);
    approvals_.emplace(req.approval_id, std::move(req));
  }
  audit_.clear();
  for (const auto& e : j.at("audit")) audit_.push_back(audit_from_json(e));
  next_approval_seq_ = j.at("next_approval_seq").get<std::size_t>();
  notify_locked();
}

std::string_view to_string(WorkflowStep s) noexcept {
  switch (s) {
    case WorkflowStep::fetch_config: return "fetch_config";
    case WorkflowStep::materialize_changes: return "materialize_changes";
    case WorkflowStep::propose_update: return "propose_update";
    case WorkflowStep::await_decision: return "await_decision";
    case WorkflowStep::apply_and_reboot: return "apply_and_reboot";
    case WorkflowStep::verify: return "verify";
    case WorkflowStep::record: return "record";
  }
  return "record";
}

std::string_view to_string(WorkflowStatus s) noexcept {
  switch (s) {
    case WorkflowStatus::suspended: return "suspended";
    case WorkflowStatus::completed: return "completed";
    case WorkflowStatus::rejected: return "rejected";
    case WorkflowStatus::failed: return "failed";
  }
  return "failed";
}

Json to_json(const WorkflowResult& r) {
  Json steps = Json::array();
  for (auto s : r.executed) steps.push_back(to_string(s));
  Json j{{"status", to_string(r.status)}, {"executed", steps}, {"tools_executed", r.tools_executed}};
  j["reason"] = r.reason ? Json(*r.reason) : Json(nullptr);
  j["approval_id"] = r.approval_id ? Json(*r.approval_id) : Json(nullptr);
  j["ran_state"] = r.ran_state ? to_json(*r.ran_state) : Json(nullptr);
  return j;
}

WorkflowResult workflow_result_from_json(const Json& j) {
  WorkflowResult r;
  const auto status = j.at("status").get<std::string>();
  bool found = false;
  for (auto st : {WorkflowStatus::suspended, WorkflowStatus::completed, WorkflowStatus::rejected,
                  WorkflowStatus::failed}) {
    if (to_string(st) == status) {
      r.status = st;
      found = true;
    }
  }
  if (!found) throw Error(ErrorCode::SchemaViolation, "unknown workflow status " + status);
  for (const auto& s : j.at("executed")) {
    const auto name = s.get<std::string>();
    for (int i = 0; i <= static_cast<int>(WorkflowStep::record); ++i) {
      if (to_string(static_cast<WorkflowStep>(i)) == name) r.executed.push_back(static_cast<WorkflowStep>(i));
    }
  }
  r.tools_executed = j.at("tools_executed").get<std::vector<std::string>>();
  if (!j.at("reason").is_null()) r.reason = j.at("reason").get<std::string>();
  if (!j.at("approval_id").is_null()) r.approval_id = j.at("approval_id").get<std::string>();
  if (!j.at("ran_state").is_null()) {
    const auto& s = j.at("ran_state");
    RANState st;
    st.running = s.at("running").get<bool>();
    st.boot_count = s.at("boot_count").get<std::int64_t>();
    st.active_config_version = s.at("active_config_version").get<std::int64_t>();
    st.ue_contexts = s.at("ue_contexts").get<std::set<std::string>>();
    r.ran_state = st;
  }
  return r;
}

std::vector<ConfigChange> materialize_changes(const std::vector<PlanStepView>& plan) {
  std::vector<ConfigChange> out;
  for (const auto& step : plan) {
    if (step.tool_name != "update_ran_cu_config") continue;
    auto it = step.params.find("changes");
    if (it == step.params.end()) {
      throw Error(ErrorCode::InvalidToolParams, "update_ran_cu_config step without changes");
    }
    auto changes = changes_from_json(*it);
    out.insert(out.end(), changes.begin(), changes.end());
  }
  return out;
}

std::optional<std::string> verify_applied(const RanSimulator& sim, const ApprovalRequest& approval) {
  const CUConfig now = sim.get_ran_cu_config();
  if (!(now == approval.proposed)) {
    return "post-reboot config v" + std::to_string(now.version) + " differs from approved proposal v" +
           std::to_string(approval.proposed.version);
  }
  const RANState state = sim.get_ran_state();
  if (state.active_config_version != approval.proposed.version) {
    return "active config version " + std::to_string(state.active_config_version) +
           " is not the approved version";
  }
  return std::nullopt;
}

WorkflowResult ConfigTuningWorkflow::start(const std::string& plan_id, const std::string& incident_id,
                                           const std::vector<PlanStepView>& plan) {
  WorkflowResult r;
  auto failed = [&](const Error& e) {
    r.status = WorkflowStatus::failed;
    r.reason = std::string(to_string(e.code()));
    return r;
  };

  r.executed.push_back(WorkflowStep::fetch_config);
  (void)sim_.get_ran_cu_config();
  r.tools_executed.push_back("get_ran_cu_config");

  r.executed.push_back(WorkflowStep::materialize_changes);
  std::vector<ConfigChange> changes;
  try {
    changes = materialize_changes(plan);
  } catch (const Error& e) {
    return failed(e);
  }

  r.executed.push_back(WorkflowStep::propose_update);
  try {
    r.approval_id = sim_.propose_update(plan_id, incident_id, changes).approval_id;
  } catch (const Error& e) {
    return failed(e);
  }
  r.executed.push_back(WorkflowStep::await_decision);
  r.status = WorkflowStatus::suspended;
  return r;
}

WorkflowResult ConfigTuningWorkflow::resume(const WorkflowResult& suspended) {
  WorkflowResult r = suspended;
  if (suspended.status != WorkflowStatus::suspended || !suspended.approval_id) {
    throw Error(ErrorCode::IllegalTransition, "workflow is not suspended at the approval gate");
  }
  const ApprovalRequest a = sim_.get_approval(*suspended.approval_id);
  if (a.status == ApprovalStatus::pending) {
    throw Error(ErrorCode::NotApproved, a.approval_id + " is still pending");
  }
  if (a.status == ApprovalStatus::rejected) {
    r.status = WorkflowStatus::rejected;
    return r;
  }
  if (a.status == ApprovalStatus::expired) {
    r.status = WorkflowStatus::failed;
    r.reason = "APPROVAL_EXPIRED";
    return r;
  }

  r.executed.push_back(WorkflowStep::apply_and_reboot);
  try {
    r.ran_state = sim_.apply_and_reboot(a.approval_id);
    r.tools_executed.push_back("update_ran_cu_config");
    r.tools_executed.push_back("reboot_ran");
  } catch (const Error& e) {
    r.status = WorkflowStatus::failed;
    r.reason = std::string(to_string(e.code()));
    return r;
  }

  r.executed.push_back(WorkflowStep::verify);
  if (auto mismatch = verify_applied(sim_, a)) {
    r.status = WorkflowStatus::failed;
    r.reason = std::string(to_string(ErrorCode::VerificationMismatch));
    return r;
  }
  r.executed.push_back(WorkflowStep::record);
  r.status = WorkflowStatus::completed;
  return r;
}

WorkflowResult ConfigTuningWorkflow::run(const std::string& plan_id, const std::string& incident_id,
                                         const std::vector<PlanStepView>& plan,
                                         const std::function<void(const ApprovalRequest&)>& decider) {
  WorkflowResult r = start(plan_id, incident_id, plan);
  if (r.status != WorkflowStatus::suspended) return r;
  decider(sim_.get_approval(*r.approval_id));
  return resume(r);
}

void register_control_tools(agent::ToolRegistry& registry, RanSimulator& sim) {
  using agent::AgentRole;
  using agent::ParamSpec;
  using agent::ParamType;

  registry.add({"get_ran_cu_config", "Fetch the committed O-CU configuration (read-only).", {}, false,
                {AgentRole::response}},
               [&sim](const Json&) { return to_json(sim.get_ran_cu_config()); });

  const PathTable* paths = &sim.paths();
  ParamSpec changes{"changes", ParamType::Array, true,
                    "list of {path, op: set|remove_list_item|add_list_item, value}",
                    [paths](const Json& v) -> std::optional<std::string> {
                      if (v.empty()) return "must contain at least one change";
                      for (const auto& item : v) {
                        ConfigChange c;
                        try {
                          c = change_from_json(item);
                        } catch (const Error& e) {
                          return std::string(e.what());
                        }
                        if (auto why = paths->check_change(c)) return why;
                      }
                      return std::nullopt;
                    }};
  registry.add({"update_ran_cu_config",
                "Propose CU configuration changes; applied only after human approval by the "
                "Config Tuning workflow.",
                {changes},
                true,
                {AgentRole::response}});
  registry.add({"reboot_ran", "Reboot the RAN so the approved configuration takes effect.", {}, true,
                {AgentRole::response}});
}

}  // namespace oransec::ran
