#include <gtest/gtest.h>

#include "oransec/error.hpp"
#include "oransec/evalkit.hpp"
#include "support.hpp"

using namespace oransec;
using namespace oransec::evalkit;

namespace {

Scenario scenario(const std::string& id, std::vector<std::string> gt, std::set<std::string> tools) {
  Scenario s;
  s.scenario_id = id;
  s.ground_truth_technique_ids = std::move(gt);
  s.expected_tool_set = std::move(tools);
  return s;
}

RunRecord record(const std::string& id, std::vector<std::string> top3, std::vector<std::string> tools,
                 double total = 1.0) {
  RunRecord r;
  r.scenario_id = id;
  r.retrieved_top3 = std::move(top3);
  r.tool_calls_made = std::move(tools);
  r.terminal_phase = "mitigated";
  r.latency_ms.total = total;
  return r;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no oransec::Error thrown";
  return ErrorCode::Internal;
}

}  // namespace

TEST(Metrics, CountsHitsPerScenario) {
  const std::vector<Scenario> sc{scenario("A", {"FGT1"}, {"get_traffic", "search_fight"}),
                                 scenario("B", {"FGT9"}, {"get_traffic"})};
  const std::vector<RunRecord> recs{
      record("A", {"FGT1", "FGT2", "FGT3"}, {"get_traffic", "search_fight"}),
      record("A", {"FGT2", "FGT1", "FGT3"}, {"get_traffic", "search_fight", "get_traffic"}),
      record("A", {"FGT2", "FGT3", "FGT4"}, {"get_traffic"}),
      record("A", {"FGT2", "FGT3", "FGT4", "FGT1"}, {"get_traffic", "search_fight", "not_a_catalog_tool"}),
      record("B", {}, {"get_traffic"}),
  };
  const auto m = compute_metrics(recs, sc);
  ASSERT_EQ(m.rows.size(), 2u);
  EXPECT_EQ(m.rows[0].runs, 4);
  EXPECT_DOUBLE_EQ(m.rows[0].top3, 0.5);  // the fourth hit is beyond rank 3
  EXPECT_DOUBLE_EQ(m.rows[0].top1, 0.25);
  EXPECT_DOUBLE_EQ(m.rows[0].ccr, 0.75);  // duplicates and non-catalog tools do not matter
  EXPECT_DOUBLE_EQ(m.rows[1].top3, 0.0);
  EXPECT_DOUBLE_EQ(m.rows[1].ccr, 1.0);
  EXPECT_DOUBLE_EQ(m.mean_top3, 0.25);
  EXPECT_DOUBLE_EQ(m.mean_ccr, 0.875);
  EXPECT_EQ(m.latency_total_ms.count, 5u);
}

TEST(Metrics, RowsFollowScenarioOrderAndSkipUnrun) {
  const std::vector<Scenario> sc{scenario("Z", {"FGT1"}, {}), scenario("Y", {"FGT1"}, {}),
                                 scenario("X", {"FGT1"}, {})};
  const auto m = compute_metrics({record("X", {"FGT1"}, {}), record("Z", {"FGT1"}, {})}, sc);
  ASSERT_EQ(m.rows.size(), 2u);
  EXPECT_EQ(m.rows[0].scenario_id, "Z");
  EXPECT_EQ(m.rows[1].scenario_id, "X");
}

TEST(Metrics, LatencyNearestRank) {
  std::vector<RunRecord> recs;
  for (int i = 1; i <= 10; ++i) recs.push_back(record("A", {}, {}, i * 10.0));
  const auto m = compute_metrics(recs, {scenario("A", {"FGT1"}, {})});
  EXPECT_DOUBLE_EQ(m.latency_total_ms.p50, 50.0);
  EXPECT_DOUBLE_EQ(m.latency_total_ms.p90, 90.0);
  EXPECT_DOUBLE_EQ(m.latency_total_ms.max, 100.0);
  EXPECT_DOUBLE_EQ(m.latency_total_ms.mean, 55.0);
}

TEST(Metrics, Errors) {
  EXPECT_EQ(code_of([] { compute_metrics({}, {scenario("A", {}, {})}); }), ErrorCode::EmptyRecords);
  EXPECT_EQ(code_of([] { compute_metrics({record("Q", {}, {})}, {scenario("A", {}, {})}); }),
            ErrorCode::MissingScenarioDefinition);
}

TEST(Metrics, JsonRoundTripAndTable) {
  const auto m = compute_metrics({record("A", {"FGT1"}, {"get_traffic"})}, {scenario("A", {"FGT1"}, {"get_traffic"})});
  const auto back = metrics_from_json(to_json(m));
  ASSERT_EQ(back.rows.size(), 1u);
  EXPECT_DOUBLE_EQ(back.mean_top1, 1.0);
  const auto table = render_table(m);
  EXPECT_NE(table.find("Top-3"), std::string::npos);
  EXPECT_NE(table.find("Mean"), std::string::npos);
  EXPECT_NE(table.find("1.00"), std::string::npos);
  EXPECT_FALSE(to_json(m, false).contains("latency_total_ms"));
}

TEST(RunRecords, JsonRoundTrip) {
  auto r = record("A", {"FGT1", "FGT2"}, {"get_traffic"}, 12.5);
  r.run_index = 3;
  r.latency_ms.analysis = 2.5;
  const auto back = run_record_from_json(to_json(r));
  EXPECT_EQ(back.scenario_id, "A");
  EXPECT_EQ(back.run_index, 3);
  EXPECT_EQ(back.retrieved_top3, r.retrieved_top3);
  EXPECT_DOUBLE_EQ(back.latency_ms.analysis, 2.5);
  EXPECT_DOUBLE_EQ(back.latency_ms.total, 12.5);
}

TEST(Scenarios, FixtureManifestsLoad) {
  const auto all = load_scenarios(testsupport::data_dir() / "scenarios");
  ASSERT_EQ(all.size(), table_scenario_ids().size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    EXPECT_EQ(all[i].scenario_id, table_scenario_ids()[i]);
    EXPECT_TRUE(std::filesystem::exists(all[i].trace_path));
    EXPECT_TRUE(std::filesystem::exists(all[i].script_path));
    EXPECT_TRUE(unknown_ground_truth(all[i], testsupport::fixture_kb()->corpus()).empty());
  }
}

TEST(Scenarios, MissingManifest) {
  EXPECT_EQ(code_of([] { load_scenario("/nonexistent/x.json"); }), ErrorCode::ScenarioFixtureMissing);
}

TEST(Suite, NullCipherRunMitigates) {
  const auto env = testsupport::fixture_env();
  const auto r = run_scenario_once(testsupport::fixture_scenario("null-cipher-integrity"), 1, env);
  EXPECT_EQ(r.record.terminal_phase, "mitigated");
  ASSERT_FALSE(r.record.retrieved_top3.empty());
  EXPECT_EQ(r.record.retrieved_top3.front(), "FGT1600.501");
  EXPECT_EQ(r.final_config.version, 2);
}

TEST(Suite, WriteResults) {
  testsupport::TempDir dir("results");
  const std::vector<RunRecord> recs{record("A", {"FGT1"}, {})};
  const auto m = compute_metrics(recs, {scenario("A", {"FGT1"}, {})});
  write_results(dir.path(), m, recs);
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "metrics.json"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "metrics.txt"));
}
