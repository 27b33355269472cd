#include "oransec/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

#include "oransec/error.hpp"

namespace oransec::evalkit {

const std::vector<std::string>& table_scenario_ids() {
  static const std::vector<std::string> ids{
      "BTS-Attack-1", "BTS-Attack-2", "BTS-Attack-3",  "Blind-DoS-1",           "Blind-DoS-2",
      "Blind-DoS-3",  "Downlink-DoS", "Downlink-IMSI", "Null-Cipher-Integrity", "Uplink-IMSI"};
  return ids;
}

namespace {

std::size_t table_position(const std::string& id) {
  const auto& ids = table_scenario_ids();
  return static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
}

}  // namespace

Scenario load_scenario(const std::filesystem::path& manifest) {
  if (!std::filesystem::exists(manifest)) {
    throw Error(ErrorCode::ScenarioFixtureMissing, "scenario manifest not found: " + manifest.string());
  }
  const Json j = read_json_file(manifest);
  const auto base = manifest.parent_path();
  Scenario s;
  try {
    s.scenario_id = j.at("scenario_id").get<std::string>();
    s.description = j.at("description").get<std::string>();
    s.trace_id = j.at("trace").at("trace_id").get<std::string>();
    s.trace_path = base / j.at("trace").at("path").get<std::string>();
    s.ground_truth_technique_ids = j.at("ground_truth_technique_ids").get<std::vector<std::string>>();
    s.ground_truth_published = j.value("ground_truth_source", "fixture") == "published";
    s.expected_tool_set = j.at("expected_tool_set").get<std::set<std::string>>();
    s.expected_terminal = j.at("expected_terminal").get<std::string>();
    s.script_path = base / j.at("script_path").get<std::string>();
    s.event = telemetry::parse_event_input(j.at("event"));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, manifest.string() + ": " + e.what());
  }
  if (s.ground_truth_technique_ids.empty()) {
    throw Error(ErrorCode::SchemaViolation, s.scenario_id + ": ground_truth_technique_ids is empty");
  }
  for (const auto* p : {&s.trace_path, &s.script_path}) {
    if (!std::filesystem::exists(*p)) {
      throw Error(ErrorCode::ScenarioFixtureMissing, s.scenario_id + ": missing fixture " + p->string());
    }
  }
  return s;
}

std::vector<Scenario> load_scenarios(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::ScenarioFixtureMissing, "scenario directory not found: " + dir.string());
  }
  std::vector<Scenario> out;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.path().extension() == ".json") out.push_back(load_scenario(e.path()));
  }
  std::sort(out.begin(), out.end(), [](const Scenario& a, const Scenario& b) {
    const auto pa = table_position(a.scenario_id), pb = table_position(b.scenario_id);
    return pa != pb ? pa < pb : a.scenario_id < b.scenario_id;
  });
  return out;
}

std::vector<std::string> unknown_ground_truth(const Scenario& s, const kb::Corpus& corpus) {
  std::vector<std::string> out;
  for (const auto& id : s.ground_truth_technique_ids) {
    if (!corpus.contains(id)) out.push_back(id);
  }
  return out;
}

Json to_json(const RunRecord& r) {
  return Json{{"scenario_id", r.scenario_id},
              {"run_index", r.run_index},
              {"retrieved_top3", r.retrieved_top3},
              {"tool_calls_made", r.tool_calls_made},
              {"terminal_phase", r.terminal_phase},
              {"latency_ms",
               {{"analysis", r.latency_ms.analysis},
                {"classification", r.latency_ms.classification},
                {"planning", r.latency_ms.planning},
                {"approval_wait", r.latency_ms.approval_wait},
                {"execution", r.latency_ms.execution},
                {"total", r.latency_ms.total}}}};
}

RunRecord run_record_from_json(const Json& j) {
  RunRecord r;
  r.scenario_id = j.at("scenario_id").get<std::string>();
  r.run_index = j.at("run_index").get<int>();
  r.retrieved_top3 = j.at("retrieved_top3").get<std::vector<std::string>>();
  r.tool_calls_made = j.at("tool_calls_made").get<std::vector<std::string>>();
  r.terminal_phase = j.at("terminal_phase").get<std::string>();
  if (j.contains("latency_ms")) {
    const auto& l = j.at("latency_ms");
    r.latency_ms = {l.value("analysis", 0.0),      l.value("classification", 0.0),
                    l.value("planning", 0.0),      l.value("approval_wait", 0.0),
                    l.value("execution", 0.0),     l.value("total", 0.0)};
  }
  return r;
}

const std::set<std::string>& catalog_tools() {
  static const std::set<std::string> tools{
      "get_traffic",   "get_network_events", "get_ue_description",   "search_fight",
      "get_technique", "get_mitigations",    "get_ran_cu_config",    "update_ran_cu_config",
      "reboot_ran"};
  return tools;
}

namespace {

double nearest_rank(std::vector<double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

}  // namespace

MetricsReport compute_metrics(const std::vector<RunRecord>& records,
                              const std::vector<Scenario>& scenarios) {
  if (records.empty()) throw Error(ErrorCode::EmptyRecords, "no run records");
  std::map<std::string, const Scenario*> by_id;
  for (const auto& s : scenarios) by_id[s.scenario_id] = &s;
  std::map<std::string, std::vector<const RunRecord*>> grouped;
  for (const auto& r : records) {
    if (!by_id.count(r.scenario_id)) {
      throw Error(ErrorCode::MissingScenarioDefinition, "no scenario definition for " + r.scenario_id);
    }
    grouped[r.scenario_id].push_back(&r);
  }

  MetricsReport m;
  for (const auto& s : scenarios) {
    auto it = grouped.find(s.scenario_id);
    if (it == grouped.end()) continue;
    const auto& gt = s.ground_truth_technique_ids;
    auto is_gt = [&](const std::string& id) { return std::find(gt.begin(), gt.end(), id) != gt.end(); };
    int hit3 = 0, hit1 = 0, ccr = 0;
    for (const RunRecord* r : it->second) {
      const auto n = std::min<std::size_t>(3, r->retrieved_top3.size());
      if (std::any_of(r->retrieved_top3.begin(), r->retrieved_top3.begin() + static_cast<long>(n), is_gt)) ++hit3;
      if (n > 0 && is_gt(r->retrieved_top3.front())) ++hit1;
      std::set<std::string> called;
      for (const auto& t : r->tool_calls_made) {
        if (catalog_tools().count(t)) called.insert(t);
      }
      if (called == s.expected_tool_set) ++ccr;
    }
    const int runs = static_cast<int>(it->second.size());
    m.rows.push_back({s.scenario_id, runs, static_cast<double>(hit3) / runs,
                      static_cast<double>(hit1) / runs, static_cast<double>(ccr) / runs});
  }
  for (const auto& row : m.rows) {
    m.mean_top3 += row.top3;
    m.mean_top1 += row.top1;
    m.mean_ccr += row.ccr;
  }
  if (!m.rows.empty()) {
    const double n = static_cast<double>(m.rows.size());
    m.mean_top3 /= n;
    m.mean_top1 /= n;
    m.mean_ccr /= n;
  }

  std::vector<double> totals;
  for (const auto& r : records) totals.push_back(r.latency_ms.total);
  std::sort(totals.begin(), totals.end());
  m.latency_total_ms.count = totals.size();
  m.latency_total_ms.p50 = nearest_rank(totals, 0.5);
  m.latency_total_ms.p90 = nearest_rank(totals, 0.9);
  m.latency_total_ms.max = totals.back();
  double sum = 0;
  for (double t : totals) sum += t;
  m.latency_total_ms.mean = sum / static_cast<double>(totals.size());
  return m;
}

Json to_json(const MetricsReport& m, bool include_latency) {
  Json rows = Json::array();
  for (const auto& r : m.rows) {
    rows.push_back(Json{{"scenario_id", r.scenario_id},
                        {"runs", r.runs},
                        {"top3", r.top3},
                        {"top1", r.top1},
                        {"ccr", r.ccr}});
  }
  Json j{{"format", "oransec-metrics/1"},
         {"rows", rows},
         {"mean", {{"top3", m.mean_top3}, {"top1", m.mean_top1}, {"ccr", m.mean_ccr}}}};
  if (include_latency) {
    j["latency_total_ms"] = Json{{"count", m.latency_total_ms.count},
                                 {"p50", m.latency_total_ms.p50},
                                 {"p90", m.latency_total_ms.p90},
                                 {"max", m.latency_total_ms.max},
                                 {"mean", m.latency_total_ms.mean}};
  }
  return j;
}

MetricsReport metrics_from_json(const Json& j) {
  MetricsReport m;
  for (const auto& r : j.at("rows")) {
    m.rows.push_back({r.at("scenario_id").get<std::string>(), r.at("runs").get<int>(),
                      r.at("top3").get<double>(), r.at("top1").get<double>(), r.at("ccr").get<double>()});
  }
  m.mean_top3 = j.at("mean").at("top3").get<double>();
  m.mean_top1 = j.at("mean").at("top1").get<double>();
  m.mean_ccr = j.at("mean").at("ccr").get<double>();
  if (j.contains("latency_total_ms")) {
    const auto& l = j.at("latency_total_ms");
    m.latency_total_ms = {l.at("count").get<std::size_t>(), l.at("p50").get<double>(),
                          l.at("p90").get<double>(), l.at("max").get<double>(),
                          l.at("mean").get<double>()};
  }
  return m;
}

std::string render_table(const MetricsReport& m) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "Threat" << std::right << std::setw(7) << "Top-3"
     << std::setw(7) << "Top-1" << std::setw(7) << "CCR" << "\n";
  if (m.rows.empty()) return os.str();
  os << std::fixed << std::setprecision(2);
  for (const auto& r : m.rows) {
    os << std::left << std::setw(24) << r.scenario_id << std::right << std::setw(7) << r.top3
       << std::setw(7) << r.top1 << std::setw(7) << r.ccr << "\n";
  }
  os << std::left << std::setw(24) << "Mean" << std::right << std::setw(7) << m.mean_top3
     << std::setw(7) << m.mean_top1 << std::setw(7) << m.mean_ccr << "\n";
  return os.str();
}

RunResult run_scenario_once(const Scenario& s, int run_index, const SuiteEnvironment& env) {
  std::shared_ptr<Clock> clock =
      env.deterministic_clock ? std::shared_ptr<Clock>(std::make_shared<ManualClock>()) : system_clock();
  auto store = std::make_shared<telemetry::TelemetryStore>(clock);
  store->ingest_trace_file(s.trace_id, s.trace_path);
  auto sim = std::make_shared<ran::RanSimulator>(env.seed_config, env.paths, clock);
  for (const auto& ue : store->ue_ids()) sim->attach_ue(ue);

  std::shared_ptr<agent::CompletionProvider> provider =
      env.provider_for ? env.provider_for(s)
                       : std::make_shared<agent::ScriptedProvider>(agent::ScriptedProvider::load(s.script_path));
  pipeline::Pipeline p(env.knowledge, store, sim, provider, env.pipeline_config, clock);
  auto decider = env.decider ? env.decider
                             : std::function<ran::Decision(const ran::ApprovalRequest&)>(
                                   [](const ran::ApprovalRequest&) { return ran::Decision::approve; });
  pipeline::IncidentState st = p.handle_incident(s.event, s.scenario_id, decider);

  RunResult out;
  out.record.scenario_id = s.scenario_id;
  out.record.run_index = run_index;
  if (st.classification) {
    for (std::size_t i = 0; i < st.classification->candidates.size() && i < 3; ++i) {
      out.record.retrieved_top3.push_back(st.classification->candidates[i].technique_id);
    }
  }
  out.record.tool_calls_made = st.tool_calls();
  out.record.terminal_phase = std::string(pipeline::to_string(st.phase));
  out.record.latency_ms = {st.latency.analysis_ms,      st.latency.classification_ms,
                           st.latency.planning_ms,      st.latency.approval_wait_ms,
                           st.latency.execution_ms,     st.latency.total_ms()};
  out.incident = std::move(st);
  out.ran_audit = sim->get_audit_log();
  out.final_config = sim->get_ran_cu_config();
  out.final_state = sim->get_ran_state();
  return out;
}

std::vector<RunRecord> run_suite(const std::vector<Scenario>& scenarios, int runs,
                                 const SuiteEnvironment& env) {
  std::vector<RunRecord> out;
  for (const auto& s : scenarios) {
    for (int r = 1; r <= runs; ++r) out.push_back(run_scenario_once(s, r, env).record);
  }
  return out;
}

void write_results(const std::filesystem::path& dir, const MetricsReport& m,
                   const std::vector<RunRecord>& records) {
  Json j = to_json(m);
  Json recs = Json::array();
  for (const auto& r : records) recs.push_back(to_json(r));
  j["records"] = recs;
  write_text_file(dir / "metrics.json", j.dump(2) + "\n");
  write_text_file(dir / "metrics.txt", render_table(m));
}

}  // namespace oransec::evalkit
