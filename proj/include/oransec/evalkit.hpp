#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "oransec/agent.hpp"
#include "oransec/kb.hpp"
#include "oransec/pipeline.hpp"
#include "oransec/ran_control.hpp"
#include "oransec/telemetry.hpp"
#include "oransec/util.hpp"

namespace oransec::evalkit {

// Row labels of the evaluation table, in table order.
const std::vector<std::string>& table_scenario_ids();

struct Scenario {
  std::string scenario_id;
  std::string description;
  std::string trace_id;
  std::filesystem::path trace_path;
  std::vector<std::string> ground_truth_technique_ids;
  bool ground_truth_published = false;
  std::set<std::string> expected_tool_set;
  std::string expected_terminal;
  std::filesystem::path script_path;
  telemetry::EventInput event;
};

// Paths inside the manifest are resolved against the manifest's directory.
// Throws ScenarioFixtureMissing or SchemaViolation.
Scenario load_scenario(const std::filesystem::path& manifest);
// Every *.json manifest in `dir`, sorted by table order then by id.
std::vector<Scenario> load_scenarios(const std::filesystem::path& dir);
// Ground-truth ids must exist in the corpus; returns the offending ids.
std::vector<std::string> unknown_ground_truth(const Scenario& s, const kb::Corpus& corpus);

struct StageLatencyMs {
  double analysis = 0, classification = 0, planning = 0, approval_wait = 0, execution = 0, total = 0;
};

struct RunRecord {
  std::string scenario_id;
  int run_index = 1;
  std::vector<std::string> retrieved_top3;
  std::vector<std::string> tool_calls_made;
  std::string terminal_phase;
  StageLatencyMs latency_ms;
};

Json to_json(const RunRecord& r);
RunRecord run_record_from_json(const Json& j);

struct ScenarioMetrics {
  std::string scenario_id;
  int runs = 0;
  double top3 = 0, top1 = 0, ccr = 0;
};

struct LatencySummary {
  std::size_t count = 0;
  double p50 = 0, p90 = 0, max = 0, mean = 0;
};

struct MetricsReport {
  std::vector<ScenarioMetrics> rows;
  double mean_top3 = 0, mean_top1 = 0, mean_ccr = 0;
  LatencySummary latency_total_ms;
};

// Tools counted by CCR: the catalog the pipeline exposes.
const std::set<std::string>& catalog_tools();

// Rows follow the order of `scenarios`; scenarios without records are
// omitted. Throws EmptyRecords or MissingScenarioDefinition.
MetricsReport compute_metrics(const std::vector<RunRecord>& records,
                              const std::vector<Scenario>& scenarios);

Json to_json(const MetricsReport& m, bool include_latency = true);
MetricsReport metrics_from_json(const Json& j);
std::string render_table(const MetricsReport& m);

// Everything a suite run shares across scenarios. Each run builds a fresh
// simulator, telemetry store and pipeline.
struct SuiteEnvironment {
  std::shared_ptr<const kb::KnowledgeBase> knowledge;
  ran::CUConfig seed_config;
  ran::PathTable paths;
  // Provider for one scenario; defaults to the scenario's script.
  std::function<std::shared_ptr<agent::CompletionProvider>(const Scenario&)> provider_for;
  // Operator stand-in; defaults to approving every request.
  std::function<ran::Decision(const ran::ApprovalRequest&)> decider;
  pipeline::PipelineConfig pipeline_config;
  bool deterministic_clock = true;
};

struct RunResult {
  RunRecord record;
  pipeline::IncidentState incident;
  std::vector<ran::AuditEntry> ran_audit;
  ran::CUConfig final_config;
  ran::RANState final_state;
};

RunResult run_scenario_once(const Scenario& s, int run_index, const SuiteEnvironment& env);
std::vector<RunRecord> run_suite(const std::vector<Scenario>& scenarios, int runs,
                                 const SuiteEnvironment& env);

// metrics.json and metrics.txt.
void write_results(const std::filesystem::path& dir, const MetricsReport& m,
                   const std::vector<RunRecord>& records);

}  // namespace oransec::evalkit
