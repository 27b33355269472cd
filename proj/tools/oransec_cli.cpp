// oransec: corpus ingestion, scenario runs, evaluation, the HTTP service and
// headless approval handling.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "oransec/app.hpp"
#include "oransec/error.hpp"
#include "oransec/evalkit.hpp"
#include "oransec/service.hpp"

namespace fs = std::filesystem;
using namespace oransec;

namespace {

struct Common {
  std::string config_path;
  std::string state_dir;
  std::string scenario_dir;
  std::string provider;
  std::string server;
  bool verbose = false;
};

app::ServiceConfig resolve_config(const Common& c) {
  app::ServiceConfig cfg = c.config_path.empty() ? app::default_config() : app::load_service_config(c.config_path);
  if (!c.scenario_dir.empty()) cfg.scenario_dir = c.scenario_dir;
  if (!c.state_dir.empty()) cfg.state_dir = fs::path(c.state_dir);
  if (!c.provider.empty()) {
    if (c.provider != "scripted" && c.provider != "remote") {
      throw Error(ErrorCode::InvalidRequest, "--provider must be scripted or remote");
    }
    if (c.provider != cfg.provider.kind) {
      cfg.provider = app::ProviderSettings{};
      cfg.provider.kind = c.provider;
    }
  }
  return cfg;
}

evalkit::Scenario find_scenario(const app::ServiceConfig& cfg, const std::string& id) {
  for (auto& s : evalkit::load_scenarios(cfg.scenario_dir)) {
    if (s.scenario_id == id) return s;
  }
  throw Error(ErrorCode::MissingScenarioDefinition, "no scenario '" + id + "' in " + cfg.scenario_dir.string());
}

evalkit::SuiteEnvironment suite_env(const app::ServiceConfig& cfg) {
  evalkit::SuiteEnvironment env;
  env.knowledge = app::load_knowledge(cfg);
  env.seed_config = ran::load_config(cfg.cu_config_path);
  env.paths = ran::PathTable::load(cfg.paths_path);
  if (cfg.provider.kind == "remote") {
    auto provider = app::make_provider(cfg.provider, cfg.scenario_dir);
    env.provider_for = [provider](const evalkit::Scenario&) { return provider; };
  } else if (!cfg.provider.script_paths.empty()) {
    auto provider = app::make_provider(cfg.provider, cfg.scenario_dir);
    env.provider_for = [provider](const evalkit::Scenario&) { return provider; };
  }
  return env;
}

// Runtime for commands that only touch persisted state; the provider is never
// called when resuming at the approval gate. Defaults to ./oransec-state like
// `scenario run`.
std::shared_ptr<app::Runtime> open_state(app::ServiceConfig cfg) {
  if (!cfg.state_dir) cfg.state_dir = fs::path("oransec-state");
  return std::make_shared<app::Runtime>(cfg, app::load_knowledge(cfg), std::make_shared<agent::ScriptedProvider>());
}

void print_json(const Json& j) { std::cout << j.dump(2) << "\n"; }

// Prints an API response; non-2xx becomes an operational failure.
int print_api(const service::ApiResponse& r) {
  if (r.status >= 200 && r.status < 300) {
    print_json(r.body);
    return 0;
  }
  std::cerr << "error: " << r.body.value("code", "HTTP_" + std::to_string(r.status)) << ": "
            << r.body.value("message", r.body.dump()) << "\n";
  return 1;
}

void print_incident_line(const pipeline::IncidentState& s) {
  std::cout << s.incident_id << " " << s.scenario_id << " " << pipeline::to_string(s.phase);
  if (s.escalation_reason) std::cout << " (" << *s.escalation_reason << ")";
  std::cout << "\n";
}

int cmd_kb_ingest(const std::string& corpus_path, const std::string& stopwords, const std::string& out) {
  const auto corpus = kb::load_corpus(corpus_path);
  const auto index = kb::build_index(corpus, kb::StopwordList::load(stopwords));
  write_text_file(out, kb::index_to_json(index).dump() + "\n");
  std::cout << "indexed " << index.size() << " techniques (corpus " << corpus.version() << ", dim "
            << index.dimension() << ") -> " << out << "\n";
  return 0;
}

int cmd_kb_search(const app::ServiceConfig& cfg, const std::string& query, int k) {
  const auto knowledge = app::load_knowledge(cfg);
  for (const auto& r : knowledge->search(query, static_cast<std::size_t>(k))) {
    std::cout << r.rank << "\t" << r.technique_id << "\t" << fmt::format("{:.4f}", r.score) << "\t"
              << knowledge->get_technique(r.technique_id).name << "\n";
  }
  return 0;
}

int cmd_trace_ingest(const app::ServiceConfig& cfg, const std::string& id, const std::string& file) {
  if (cfg.state_dir) {
    auto rt = open_state(cfg);
    const auto summary = rt->telemetry().ingest_trace_file(id, file);
    for (const auto& ue : rt->telemetry().ue_ids()) rt->simulator().attach_ue(ue);
    rt->save();
    print_json(telemetry::to_json(summary));
  } else {
    telemetry::TelemetryStore store;
    print_json(telemetry::to_json(store.ingest_trace_file(id, file)));
  }
  return 0;
}

int cmd_scenario_run(const app::ServiceConfig& cfg, const std::string& id, int runs, bool auto_approve) {
  const auto scenario = find_scenario(cfg, id);
  if (auto_approve) {
    const auto env = suite_env(cfg);
    for (int r = 1; r <= runs; ++r) {
      const auto result = evalkit::run_scenario_once(scenario, r, env);
      std::cout << "run " << r << ": ";
      print_incident_line(result.incident);
      std::cout << "  top3: " << join(result.record.retrieved_top3, ", ") << "\n"
                << "  tools: " << join(result.record.tool_calls_made, ", ") << "\n";
    }
    return 0;
  }
  if (runs != 1) throw Error(ErrorCode::InvalidRequest, "--runs > 1 requires --auto-approve");
  app::ServiceConfig c = cfg;
  if (!c.state_dir) c.state_dir = fs::path("oransec-state");
  auto rt = std::make_shared<app::Runtime>(c, app::load_knowledge(c), app::make_provider(c.provider, c.scenario_dir));
  rt->ensure_trace(scenario);
  const auto s = rt->pipeline().handle_incident(scenario.event, scenario.scenario_id);
  rt->save();
  print_incident_line(s);
  if (s.approval_id && s.phase == pipeline::Phase::awaiting_approval) {
    const auto a = rt->simulator().get_approval(*s.approval_id);
    std::cout << "approval " << a.approval_id << " pending: " << a.rendered_summary << "\n"
              << "decide with: oransec approvals decide " << a.approval_id
              << " approve|reject --state-dir " << c.state_dir->string() << "\n";
  }
  return 0;
}

int cmd_eval(const app::ServiceConfig& cfg, int runs, const std::string& results_dir) {
  const auto scenarios = evalkit::load_scenarios(cfg.scenario_dir);
  const auto env = suite_env(cfg);
  const auto records = evalkit::run_suite(scenarios, runs, env);
  const auto metrics = evalkit::compute_metrics(records, scenarios);
  const fs::path dir = results_dir.empty() ? cfg.results_dir : fs::path(results_dir);
  evalkit::write_results(dir, metrics, records);
  std::cout << evalkit::render_table(metrics) << "results written to " << dir.string() << "\n";
  return 0;
}

std::atomic<service::Service*> g_service{nullptr};

int cmd_serve(const app::ServiceConfig& cfg) {
  // Signals are taken synchronously by a dedicated thread.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  auto runtime = std::make_shared<app::Runtime>(cfg, app::load_knowledge(cfg),
                                                app::make_provider(cfg.provider, cfg.scenario_dir));
  for (const auto& s : evalkit::load_scenarios(cfg.scenario_dir)) runtime->ensure_trace(s);
  service::Service svc(cfg, runtime);
  const int port = svc.bind();
  g_service = &svc;
  std::thread waiter([&set] {
    int sig = 0;
    sigwait(&set, &sig);
    if (auto* s = g_service.load()) s->stop();
  });
  spdlog::info("listening on {}:{}", cfg.host, port);
  std::cout << "listening on " << cfg.host << ":" << port << std::endl;
  svc.listen();
  svc.stop();
  g_service = nullptr;
  if (waiter.joinable()) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
  }
  return 0;
}

int cmd_approvals_list(const Common& c, const std::string& status) {
  if (!c.server.empty()) {
    return print_api(service::api_call(c.server, "GET", status.empty() ? "/approvals" : "/approvals?status=" + status));
  }
  std::optional<ran::ApprovalStatus> filter;
  if (!status.empty()) {
    for (auto st : {ran::ApprovalStatus::pending, ran::ApprovalStatus::approved, ran::ApprovalStatus::rejected,
                    ran::ApprovalStatus::expired}) {
      if (ran::to_string(st) == status) filter = st;
    }
    if (!filter) throw Error(ErrorCode::InvalidRequest, "unknown status '" + status + "'");
  }
  auto rt = open_state(resolve_config(c));
  Json out = Json::array();
  for (const auto& a : rt->simulator().list_approvals(filter)) out.push_back(ran::to_json(a));
  print_json(Json{{"approvals", out}});
  return 0;
}

int cmd_approvals_decide(const Common& c, const std::string& id, const std::string& decision,
                         const std::string& operator_id) {
  const auto d = ran::parse_decision(decision);
  if (!d) throw Error(ErrorCode::InvalidRequest, "decision must be approve or reject");
  if (!c.server.empty()) {
    const Json body{{"decision", decision}};
    return print_api(service::api_call(c.server, "POST", "/approvals/" + id + "/decision", &body, operator_id));
  }
  auto rt = open_state(resolve_config(c));
  const auto s = rt->pipeline().decide(id, *d, operator_id);
  rt->save();
  print_incident_line(s);
  return 0;
}

int cmd_incidents(const Common& c, const std::string& id) {
  if (!c.server.empty()) {
    return print_api(service::api_call(c.server, "GET", id.empty() ? "/incidents" : "/incidents/" + id));
  }
  auto rt = open_state(resolve_config(c));
  if (!id.empty()) {
    print_json(pipeline::to_json(rt->pipeline().get(id)));
    return 0;
  }
  for (const auto& s : rt->pipeline().list()) print_incident_line(s);
  return 0;
}

int cmd_audit(const Common& c) {
  if (!c.server.empty()) return print_api(service::api_call(c.server, "GET", "/audit"));
  auto rt = open_state(resolve_config(c));
  for (const auto& e : rt->simulator().get_audit_log()) print_json(ran::to_json(e));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"O-RAN threat triage and mitigation"};
  cli.require_subcommand(1);
  Common c;
  cli.add_flag("-v,--verbose", c.verbose, "Debug logging");

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", c.config_path, "Service config JSON"); };
  auto add_state = [&](CLI::App* sub) {
    sub->add_option("--state-dir", c.state_dir, "Directory holding persisted runtime state");
  };
  auto add_server = [&](CLI::App* sub) {
    sub->add_option("--server", c.server, "Talk to a running service (http://host:port)");
  };

  int result = 0;
  const fs::path data = ORANSEC_DATA_DIR;

  auto* kb_cmd = cli.add_subcommand("kb", "Knowledge base");
  kb_cmd->require_subcommand(1);
  std::string corpus_path, stopwords = (data / "stopwords-v1.txt").string(), index_out = "fight-index.json";
  auto* kb_ingest = kb_cmd->add_subcommand("ingest", "Build and persist the technique index");
  kb_ingest->add_option("corpus", corpus_path, "Corpus JSON")->required();
  kb_ingest->add_option("--stopwords", stopwords, "Stopword list");
  kb_ingest->add_option("--out", index_out, "Index output path");
  kb_ingest->callback([&] { result = cmd_kb_ingest(corpus_path, stopwords, index_out); });

  std::string query;
  int k = 3;
  auto* kb_search = kb_cmd->add_subcommand("search", "Query the index");
  kb_search->add_option("query", query, "Free-text query")->required();
  kb_search->add_option("-k", k, "Results")->check(CLI::Range(1, 100));
  add_config(kb_search);
  kb_search->callback([&] { result = cmd_kb_search(resolve_config(c), query, k); });

  auto* trace_cmd = cli.add_subcommand("trace", "Telemetry traces");
  trace_cmd->require_subcommand(1);
  std::string trace_id, trace_file;
  auto* trace_ingest = trace_cmd->add_subcommand("ingest", "Validate and ingest a JSONL trace");
  trace_ingest->add_option("id", trace_id)->required();
  trace_ingest->add_option("file", trace_file)->required();
  add_config(trace_ingest);
  add_state(trace_ingest);
  trace_ingest->callback([&] { result = cmd_trace_ingest(resolve_config(c), trace_id, trace_file); });

  auto* scenario_cmd = cli.add_subcommand("scenario", "Scenario runs");
  scenario_cmd->require_subcommand(1);
  std::string scenario_id;
  int runs = 1;
  bool auto_approve = false;
  auto* scenario_run = scenario_cmd->add_subcommand("run", "Run one scenario");
  scenario_run->add_option("id", scenario_id)->required();
  scenario_run->add_option("--runs", runs)->check(CLI::PositiveNumber);
  scenario_run->add_option("--provider", c.provider, "scripted|remote");
  scenario_run->add_flag("--auto-approve", auto_approve, "Approve every request (fresh state per run)");
  scenario_run->add_option("--scenario-dir", c.scenario_dir);
  add_config(scenario_run);
  add_state(scenario_run);
  scenario_run->callback([&] { result = cmd_scenario_run(resolve_config(c), scenario_id, runs, auto_approve); });

  int eval_runs = 5;
  std::string results_dir;
  auto* eval_cmd = cli.add_subcommand("eval", "Run every scenario and write metrics");
  eval_cmd->add_option("--runs", eval_runs)->check(CLI::PositiveNumber);
  eval_cmd->add_option("--provider", c.provider, "scripted|remote");
  eval_cmd->add_option("--results-dir", results_dir);
  eval_cmd->add_option("--scenario-dir", c.scenario_dir);
  add_config(eval_cmd);
  eval_cmd->callback([&] { result = cmd_eval(resolve_config(c), eval_runs, results_dir); });

  auto* serve_cmd = cli.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--config", c.config_path, "Service config JSON")->required();
  serve_cmd->callback([&] { result = cmd_serve(resolve_config(c)); });

  auto* approvals_cmd = cli.add_subcommand("approvals", "Approval queue");
  approvals_cmd->require_subcommand(1);
  std::string status, approval_id, decision, operator_id = "cli";
  auto* ap_list = approvals_cmd->add_subcommand("list", "List approval requests");
  ap_list->add_option("--status", status, "pending|approved|rejected|expired");
  add_config(ap_list);
  add_state(ap_list);
  add_server(ap_list);
  ap_list->callback([&] { result = cmd_approvals_list(c, status); });
  auto* ap_decide = approvals_cmd->add_subcommand("decide", "Approve or reject a request");
  ap_decide->add_option("id", approval_id)->required();
  ap_decide->add_option("decision", decision)->required()->check(CLI::IsMember({"approve", "reject"}));
  ap_decide->add_option("--operator", operator_id);
  add_config(ap_decide);
  add_state(ap_decide);
  add_server(ap_decide);
  ap_decide->callback([&] { result = cmd_approvals_decide(c, approval_id, decision, operator_id); });

  auto* inc_cmd = cli.add_subcommand("incidents", "Incident state");
  inc_cmd->require_subcommand(1);
  std::string incident_id;
  auto* inc_list = inc_cmd->add_subcommand("list", "List incidents");
  auto* inc_show = inc_cmd->add_subcommand("show", "Full incident state");
  inc_show->add_option("id", incident_id)->required();
  for (auto* sub : {inc_list, inc_show}) {
    add_config(sub);
    add_state(sub);
    add_server(sub);
  }
  inc_list->callback([&] { result = cmd_incidents(c, ""); });
  inc_show->callback([&] { result = cmd_incidents(c, incident_id); });

  auto* audit_cmd = cli.add_subcommand("audit", "Control-plane audit log");
  add_config(audit_cmd);
  add_state(audit_cmd);
  add_server(audit_cmd);
  audit_cmd->callback([&] { result = cmd_audit(c); });

  cli.parse_complete_callback([&] { spdlog::set_level(c.verbose ? spdlog::level::debug : spdlog::level::warn); });

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    cli.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return result;
}
