#include <gtest/gtest.h>

#include "oransec/error.hpp"
#include "oransec/pipeline.hpp"
#include "support.hpp"

using namespace oransec;
using namespace oransec::pipeline;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no oransec::Error thrown";
  return ErrorCode::Internal;
}

class SettableClock final : public Clock {
 public:
  TimestampUs now_us() override { return now.load(); }
  std::atomic<TimestampUs> now{1'000'000};
};

// One scenario wired to a fresh store, simulator and pipeline, with optional
// overrides of individual scripted completions.
struct Harness {
  evalkit::Scenario sc;
  std::shared_ptr<telemetry::TelemetryStore> store;
  std::shared_ptr<ran::RanSimulator> sim;
  std::shared_ptr<agent::ScriptedProvider> provider;
  std::unique_ptr<Pipeline> p;

  explicit Harness(const std::string& slug, const std::map<std::string, std::string>& overrides = {},
                   PipelineConfig cfg = {}, std::optional<TimestampUs> ttl = std::nullopt,
                   std::shared_ptr<Clock> sim_clock = nullptr,
                   std::shared_ptr<const kb::KnowledgeBase> knowledge = testsupport::fixture_kb())
      : sc(testsupport::fixture_scenario(slug)) {
    auto clock = std::make_shared<ManualClock>();
    store = std::make_shared<telemetry::TelemetryStore>(clock);
    store->ingest_trace_file(sc.trace_id, sc.trace_path);
    sim = std::make_shared<ran::RanSimulator>(testsupport::seed_config(), testsupport::path_table(),
                                              sim_clock ? sim_clock : clock, ttl);
    for (const auto& ue : store->ue_ids()) sim->attach_ue(ue);
    provider = std::make_shared<agent::ScriptedProvider>(agent::ScriptedProvider::load(sc.script_path));
    for (const auto& [k, v] : overrides) provider->set(sc.scenario_id + "/" + k, v);
    p = std::make_unique<Pipeline>(knowledge, store, sim, provider, cfg, clock);
  }

  IncidentState run() { return p->handle_incident(sc.event, sc.scenario_id); }
};

void expect_history_legal(const IncidentState& s) {
  ASSERT_FALSE(s.history.empty());
  EXPECT_EQ(s.history.front().phase, Phase::received);
  for (std::size_t i = 1; i < s.history.size(); ++i) {
    EXPECT_TRUE(phase_transition_allowed(s.history[i - 1].phase, s.history[i].phase))
        << to_string(s.history[i - 1].phase) << " -> " << to_string(s.history[i].phase);
    EXPECT_LE(s.history[i - 1].ts, s.history[i].ts);
  }
  EXPECT_EQ(s.history.back().phase, s.phase);
}

Json step(const std::string& tool, const Json& params = Json::object()) {
  return Json{{"tool", tool}, {"params", params}, {"rationale", "r"}};
}

Json remove_nea0() {
  return Json{{"changes", Json::array({Json{{"path", "security.ciphering_algorithms"},
                                             {"op", "remove_list_item"},
                                             {"value", "nea0"}}})}};
}

std::string final_plan(const Json& steps) {
  return Json{{"thought", "plan"}, {"final", {{"steps", steps}}}}.dump();
}

}  // namespace

TEST(PhaseGraph, MatchesLifecycleTable) {
  const std::vector<Phase> all = {Phase::received,  Phase::analyzed,  Phase::classified,    Phase::planned,
                                  Phase::awaiting_approval, Phase::executing, Phase::mitigated,
                                  Phase::closed_benign, Phase::escalated, Phase::failed};
  const std::set<std::pair<Phase, Phase>> legal = {
      {Phase::received, Phase::analyzed},          {Phase::received, Phase::escalated},
      {Phase::analyzed, Phase::classified},        {Phase::analyzed, Phase::closed_benign},
      {Phase::analyzed, Phase::escalated},         {Phase::classified, Phase::planned},
      {Phase::classified, Phase::escalated},       {Phase::planned, Phase::awaiting_approval},
      {Phase::planned, Phase::failed},             {Phase::planned, Phase::escalated},
      {Phase::awaiting_approval, Phase::executing}, {Phase::awaiting_approval, Phase::failed},
      {Phase::awaiting_approval, Phase::escalated}, {Phase::executing, Phase::mitigated},
      {Phase::executing, Phase::failed}};
  for (auto a : all) {
    for (auto b : all) {
      EXPECT_EQ(phase_transition_allowed(a, b), legal.count({a, b}) == 1) << to_string(a) << "->" << to_string(b);
    }
    EXPECT_EQ(parse_phase(to_string(a)), a);
  }
  for (auto t : {Phase::mitigated, Phase::closed_benign, Phase::escalated, Phase::failed}) EXPECT_TRUE(is_terminal(t));
}

TEST(PlanGraph, Transitions) {
  EXPECT_TRUE(plan_transition_allowed(PlanStatus::draft, PlanStatus::validated));
  EXPECT_TRUE(plan_transition_allowed(PlanStatus::awaiting_approval, PlanStatus::rejected));
  EXPECT_TRUE(plan_transition_allowed(PlanStatus::executing, PlanStatus::completed));
  EXPECT_FALSE(plan_transition_allowed(PlanStatus::draft, PlanStatus::executing));
  EXPECT_FALSE(plan_transition_allowed(PlanStatus::validated, PlanStatus::executing));
  EXPECT_FALSE(plan_transition_allowed(PlanStatus::completed, PlanStatus::executing));
  EXPECT_FALSE(plan_transition_allowed(PlanStatus::rejected, PlanStatus::executing));
}

TEST(ValidatePlan, ReportsEveryViolation) {
  Harness h("null-cipher-integrity");
  const auto& reg = h.p->registry();
  EXPECT_TRUE(validate_plan(Json::array({step("get_ran_cu_config"), step("update_ran_cu_config", remove_nea0()),
                                         step("reboot_ran")}),
                            reg)
                  .empty());
  auto v = validate_plan(Json::array({step("update_ran_cu_config", remove_nea0()), step("get_ran_cu_config")}), reg);
  EXPECT_EQ(v.size(), 2u);
  v = validate_plan(Json::array({step("format_disk")}), reg);
  ASSERT_FALSE(v.empty());
  v = validate_plan(Json::array({step("get_ran_cu_config")}), reg);
  EXPECT_EQ(v, std::vector<std::string>{"plan makes no configuration change"});
  v = validate_plan(Json::array(), reg);
  EXPECT_EQ(v, std::vector<std::string>{"plan must contain at least one step"});
  v = validate_plan(Json::array({step("get_ran_cu_config"),
                                 step("update_ran_cu_config", Json{{"changes", Json::array({Json{{"path", "x.y"}, {"op", "set"}, {"value", "1"}}})}}),
                                 step("reboot_ran")}),
                    reg);
  EXPECT_EQ(v.size(), 1u);
}

TEST(Pipeline, NullCipherApprovedIsMitigated) {
  Harness h("null-cipher-integrity");
  auto s = h.run();
  ASSERT_EQ(s.phase, Phase::awaiting_approval);
  EXPECT_EQ(s.report->verdict, Verdict::threat);
  EXPECT_EQ(s.classification->selected_technique_ids, std::vector<std::string>{"FGT1600.501"});
  EXPECT_EQ(s.plan->steps.size(), 3u);
  EXPECT_EQ(s.plan->status, PlanStatus::awaiting_approval);
  ASSERT_TRUE(s.approval_id);
  EXPECT_EQ(h.p->incident_for_approval(*s.approval_id), s.incident_id);

  s = h.p->decide(*s.approval_id, ran::Decision::approve, "alice");
  EXPECT_EQ(s.phase, Phase::mitigated);
  EXPECT_EQ(s.plan->status, PlanStatus::completed);
  const auto cfg = h.sim->get_ran_cu_config();
  EXPECT_EQ(cfg.version, 2);
  EXPECT_EQ(cfg.security.ciphering_algorithms, std::vector<std::string>{"nea2"});
  EXPECT_EQ(cfg.security.integrity_algorithms, std::vector<std::string>{"nia2"});
  expect_history_legal(s);
  const auto tools = s.tool_calls();
  EXPECT_EQ(std::set<std::string>(tools.begin(), tools.end()),
            std::set<std::string>(h.sc.expected_tool_set.begin(), h.sc.expected_tool_set.end()));
  EXPECT_EQ(code_of([&] { h.p->decide(*s.approval_id, ran::Decision::approve, "bob"); }), ErrorCode::AlreadyDecided);
}

TEST(Pipeline, RejectionFailsWithoutMutation) {
  Harness h("null-cipher-integrity");
  auto s = h.run();
  s = h.p->decide(*s.approval_id, ran::Decision::reject, "alice");
  EXPECT_EQ(s.phase, Phase::failed);
  EXPECT_EQ(s.plan->status, PlanStatus::rejected);
  EXPECT_EQ(h.sim->get_ran_cu_config(), testsupport::seed_config());
  for (const auto& e : h.sim->get_audit_log()) EXPECT_NE(e.kind, ran::AuditKind::applied);
  expect_history_legal(s);
}

TEST(Pipeline, ApprovalExpiryEscalates) {
  auto sim_clock = std::make_shared<SettableClock>();
  Harness h("null-cipher-integrity", {}, {}, 60'000'000, sim_clock);
  auto s = h.run();
  ASSERT_EQ(s.phase, Phase::awaiting_approval);
  EXPECT_TRUE(h.p->expire_stale().empty());
  sim_clock->now += 61'000'000;
  const auto expired = h.p->expire_stale();
  ASSERT_EQ(expired.size(), 1u);
  EXPECT_EQ(expired[0].phase, Phase::escalated);
  EXPECT_EQ(expired[0].escalation_reason, "approval_expired");
  EXPECT_EQ(h.sim->get_ran_cu_config().version, 1);
}

TEST(Pipeline, BtsAttackTunesRateLimit) {
  Harness h("bts-attack-1");
  auto s = h.p->handle_incident(h.sc.event, h.sc.scenario_id,
                                [](const ran::ApprovalRequest&) { return ran::Decision::approve; });
  EXPECT_EQ(s.phase, Phase::mitigated);
  EXPECT_EQ(h.sim->get_ran_cu_config().other_params.at("rrc_setup_rate_limit"), "20");
}

TEST(Pipeline, NoViablePlanRecommends) {
  Harness h("downlink-imsi");
  const auto s = h.run();
  EXPECT_EQ(s.phase, Phase::escalated);
  ASSERT_TRUE(s.recommendation);
  EXPECT_EQ(s.recommendation->reason, RecommendationReason::no_viable_plan);
  const auto& expected = testsupport::fixture_kb()->get_mitigations("FGT5012.004");
  ASSERT_EQ(s.recommendation->guidance.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(s.recommendation->guidance[i].guidance, expected[i].guidance);
  }
  EXPECT_TRUE(h.sim->get_audit_log().empty());
  EXPECT_FALSE(s.plan);
  expect_history_legal(s);
}

TEST(Pipeline, FalsePositiveClosesBenign) {
  Harness h("null-cipher-integrity",
            {{"analysis/1", R"({"thought":"benign","final":{"verdict":"false_positive","event_summary":"test UE in lab",)"
                            R"("affected_components":["UE:ue-001"],"risk":"low"}})"}});
  const auto s = h.run();
  EXPECT_EQ(s.phase, Phase::closed_benign);
  EXPECT_FALSE(s.classification);
  expect_history_legal(s);
}

TEST(Pipeline, ThreatWithoutComponentsRepairsThenAborts) {
  Harness h("null-cipher-integrity",
            {{"analysis/3", R"({"thought":"x","final":{"verdict":"threat","event_summary":"s","affected_components":[],"risk":"high"}})"},
             {"analysis/4", "still not valid"}});
  const auto s = h.run();
  EXPECT_EQ(s.phase, Phase::escalated);
  EXPECT_NE(s.escalation_reason->find("guardrail_abort"), std::string::npos);
}

TEST(Pipeline, SelectionOutsideCandidatesAborts) {
  Harness h("null-cipher-integrity",
            {{"classification/2", R"({"thought":"x","final":{"selected_technique_ids":["FGT1485"]}})"},
             {"classification/3", R"({"thought":"x","final":{"selected_technique_ids":["FGT9999"]}})"}});
  const auto s = h.run();
  EXPECT_EQ(s.phase, Phase::escalated);
  EXPECT_NE(s.escalation_reason->find("classification: guardrail_abort"), std::string::npos);
}

TEST(Pipeline, SelectionRepairedWithinCandidates) {
  Harness h("null-cipher-integrity",
            {{"classification/2", R"({"thought":"x","final":{"selected_technique_ids":["FGT1485"]}})"},
             {"classification/3", R"({"thought":"x","final":{"selected_technique_ids":["FGT1600.501"]}})"},
             {"response/1", R"({"thought":"x","action":"get_ran_cu_config","action_input":{}})"}});
  // Repair consumed step 3, so later classification keys are unaffected and
  // the response loop still starts at step 1.
  const auto s = h.run();
  EXPECT_EQ(s.classification->selected_technique_ids, std::vector<std::string>{"FGT1600.501"});
}

TEST(Pipeline, InvalidPlanRecommendsWithViolations) {
  Harness h("null-cipher-integrity",
            {{"response/3", final_plan(Json::array({step("get_ran_cu_config"), step("update_ran_cu_config", remove_nea0())}))}});
  const auto s = h.run();
  EXPECT_EQ(s.phase, Phase::escalated);
  ASSERT_TRUE(s.recommendation);
  EXPECT_EQ(s.recommendation->reason, RecommendationReason::plan_validation_failed);
  EXPECT_EQ(s.recommendation->violations,
            std::vector<std::string>{"ordering: update_ran_cu_config must be followed by reboot_ran"});
  EXPECT_EQ(s.plan->status, PlanStatus::failed);
  EXPECT_TRUE(h.sim->get_audit_log().empty());
}

TEST(Pipeline, InvariantBreakingPlanFailsAtWorkflowStart) {
  // Removing every integrity algorithm is a valid plan shape but breaks the
  // config invariant when materialized.
  Json changes{{"changes", Json::array({Json{{"path", "security.integrity_algorithms"}, {"op", "remove_list_item"}, {"value", "nia0"}},
                                        Json{{"path", "security.integrity_algorithms"}, {"op", "remove_list_item"}, {"value", "nia2"}}})}};
  Harness h("null-cipher-integrity",
            {{"response/3", final_plan(Json::array({step("get_ran_cu_config"), step("update_ran_cu_config", changes), step("reboot_ran")}))}});
  const auto s = h.run();
  EXPECT_EQ(s.phase, Phase::failed);
  EXPECT_TRUE(h.sim->list_approvals(ran::ApprovalStatus::pending).empty());
  EXPECT_EQ(h.sim->get_ran_cu_config(), testsupport::seed_config());
}

TEST(Pipeline, IterationLimitEscalates) {
  std::map<std::string, std::string> o;
  for (int i = 1; i <= 10; ++i) {
    o["analysis/" + std::to_string(i)] = R"({"thought":"more","action":"get_ue_description","action_input":{"ue_id":"ue-001"}})";
  }
  Harness h("null-cipher-integrity", o);
  const auto s = h.run();
  EXPECT_EQ(s.phase, Phase::escalated);
  EXPECT_EQ(s.escalation_reason, "analysis: iteration_limit");
  EXPECT_EQ(s.transcripts.at(0).steps.size(), 5u);
}

TEST(Pipeline, ResponseIterationLimitRecommends) {
  std::map<std::string, std::string> o;
  for (int i = 1; i <= 10; ++i) {
    o["response/" + std::to_string(i)] = R"({"thought":"more","action":"get_ran_cu_config","action_input":{}})";
  }
  Harness h("null-cipher-integrity", o);
  const auto s = h.run();
  EXPECT_EQ(s.phase, Phase::escalated);
  ASSERT_TRUE(s.recommendation);
  EXPECT_EQ(s.recommendation->reason, RecommendationReason::iteration_limit);
}

TEST(Pipeline, LowConfidenceEscalates) {
  PipelineConfig cfg;
  cfg.confidence_threshold = 0.99;
  Harness h("null-cipher-integrity", {}, cfg);
  const auto s = h.run();
  EXPECT_EQ(s.phase, Phase::escalated);
  EXPECT_NE(s.escalation_reason->find("low_confidence"), std::string::npos);
}

TEST(Pipeline, MissingIndexEscalatesAsConfigurationError) {
  Harness h("null-cipher-integrity", {}, {}, std::nullopt, nullptr, nullptr);
  const auto s = h.run();
  EXPECT_EQ(s.phase, Phase::escalated);
  EXPECT_NE(s.escalation_reason->find("ESCALATED_CONFIGURATION_ERROR"), std::string::npos);
}

TEST(Pipeline, Lookups) {
  Harness h("null-cipher-integrity");
  EXPECT_EQ(code_of([&] { h.p->get("INC-999999"); }), ErrorCode::UnknownIncident);
  EXPECT_EQ(code_of([&] { h.p->decide("APR-9999", ran::Decision::approve, "x"); }), ErrorCode::UnknownApprovalId);
  const auto s = h.run();
  EXPECT_EQ(s.incident_id, "INC-000001");
  EXPECT_EQ(h.p->list().size(), 1u);
  EXPECT_EQ(code_of([&] { h.p->resume(s.incident_id); }), ErrorCode::NotApproved);
}

TEST(Pipeline, AuditChainsPhases) {
  Harness h("null-cipher-integrity");
  auto s = h.run();
  s = h.p->decide(*s.approval_id, ran::Decision::approve, "alice");
  const auto log = h.p->audit_log(s.incident_id);
  ASSERT_EQ(log.size(), s.history.size());
  EXPECT_TRUE(log.front().phase_from.empty());
  for (std::size_t i = 1; i < log.size(); ++i) {
    EXPECT_EQ(log[i].phase_from, log[i - 1].phase_to);
    EXPECT_EQ(log[i].phase_to, pipeline::to_string(s.history[i].phase));
  }
}

TEST(Pipeline, PersistedStateResumes) {
  Harness h("null-cipher-integrity");
  const auto s = h.run();
  const Json snapshot = h.p->to_json();
  const Json sim_snapshot = h.sim->to_json();

  Harness fresh("null-cipher-integrity");
  fresh.sim->restore(sim_snapshot);
  fresh.p->restore(snapshot);
  EXPECT_EQ(pipeline::to_json(fresh.p->get(s.incident_id)), pipeline::to_json(h.p->get(s.incident_id)));
  const auto done = fresh.p->decide(*s.approval_id, ran::Decision::approve, "alice");
  EXPECT_EQ(done.phase, Phase::mitigated);
  EXPECT_EQ(fresh.p->to_json().at("incidents").size(), 1u);
}

TEST(Pipeline, IncidentJsonRoundTrip) {
  Harness h("bts-attack-2");
  const auto s = h.run();
  const auto back = incident_from_json(pipeline::to_json(s));
  EXPECT_EQ(pipeline::to_json(back), pipeline::to_json(s));
}
