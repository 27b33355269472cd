#include "oransec/app.hpp"

#include <chrono>

#include "oransec/error.hpp"

namespace oransec::app {

namespace fs = std::filesystem;

ServiceConfig default_config() {
  const fs::path data = ORANSEC_DATA_DIR;
  ServiceConfig c;
  c.corpus_path = data / "fight-corpus.json";
  c.stopwords_path = data / "stopwords-v1.txt";
  c.scenario_dir = data / "scenarios";
  c.cu_config_path = data / "seed-cu-config.json";
  c.paths_path = data / "cu-config-paths.json";
  return c;
}

ServiceConfig service_config_from_json(const Json& j, const fs::path& base) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, "config must be a JSON object");
  ServiceConfig c = default_config();
  auto resolve = [&](const Json& v) {
    fs::path p = v.get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  try {
    if (j.contains("listen")) {
      c.host = j.at("listen").value("host", c.host);
      c.port = j.at("listen").value("port", c.port);
    }
    if (j.contains("corpus_path")) c.corpus_path = resolve(j.at("corpus_path"));
    if (j.contains("stopwords_path")) c.stopwords_path = resolve(j.at("stopwords_path"));
    if (j.contains("index_path") && !j.at("index_path").is_null()) c.index_path = resolve(j.at("index_path"));
    if (j.contains("scenario_dir")) c.scenario_dir = resolve(j.at("scenario_dir"));
    if (j.contains("cu_config_path")) c.cu_config_path = resolve(j.at("cu_config_path"));
    if (j.contains("paths_path")) c.paths_path = resolve(j.at("paths_path"));
    if (j.contains("results_dir")) c.results_dir = resolve(j.at("results_dir"));
    if (j.contains("state_dir") && !j.at("state_dir").is_null()) c.state_dir = resolve(j.at("state_dir"));
    if (j.contains("approval_ttl_s") && !j.at("approval_ttl_s").is_null()) {
      c.approval_ttl_s = j.at("approval_ttl_s").get<std::int64_t>();
      if (*c.approval_ttl_s <= 0) throw Error(ErrorCode::InvalidConfig, "approval_ttl_s must be positive");
    }
    if (j.contains("provider")) {
      const auto& p = j.at("provider");
      c.provider.kind = p.value("kind", "scripted");
      if (c.provider.kind == "scripted") {
        if (p.contains("script_paths")) {
          for (const auto& s : p.at("script_paths")) c.provider.script_paths.push_back(resolve(s));
        }
      } else if (c.provider.kind == "remote") {
        c.provider.remote.endpoint = p.value("endpoint", "");
        c.provider.remote.model = p.value("model", "");
        c.provider.remote.api_key = p.value("api_key", "");
        c.provider.remote.timeout = std::chrono::milliseconds(
            static_cast<std::int64_t>(p.value("timeout_s", 30.0) * 1000.0));
        c.provider.remote = remote::with_env_overrides(c.provider.remote);
      } else {
        throw Error(ErrorCode::InvalidConfig, "provider.kind must be scripted or remote");
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  if (c.port <= 0 || c.port > 65535) throw Error(ErrorCode::InvalidConfig, "listen.port out of range");
  return c;
}

ServiceConfig load_service_config(const fs::path& path) {
  Json j;
  try {
    j = read_json_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return service_config_from_json(j, fs::absolute(path).parent_path());
}

std::shared_ptr<agent::CompletionProvider> make_provider(const ProviderSettings& settings,
                                                         const fs::path& scenario_dir) {
  if (settings.kind == "remote") {
    return std::make_shared<remote::RemoteProvider>(remote::with_env_overrides(settings.remote));
  }
  if (settings.kind != "scripted") {
    throw Error(ErrorCode::InvalidConfig, "unknown provider kind '" + settings.kind + "'");
  }
  auto provider = std::make_shared<agent::ScriptedProvider>();
  std::vector<fs::path> paths = settings.script_paths;
  if (paths.empty()) {
    for (const auto& s : evalkit::load_scenarios(scenario_dir)) paths.push_back(s.script_path);
  }
  if (paths.empty()) throw Error(ErrorCode::InvalidConfig, "scripted provider requires script paths");
  for (const auto& p : paths) provider->merge(agent::ScriptedProvider::load(p));
  return provider;
}

std::shared_ptr<const kb::KnowledgeBase> load_knowledge(const ServiceConfig& cfg) {
  kb::Corpus corpus = kb::load_corpus(cfg.corpus_path);
  if (cfg.index_path && fs::exists(*cfg.index_path)) {
    kb::VectorIndex index = kb::index_from_json(read_json_file(*cfg.index_path));
    if (index.corpus_version() != corpus.version()) {
      throw Error(ErrorCode::InvalidConfig, "index was built for corpus " + index.corpus_version() +
                                                ", not " + corpus.version());
    }
    return std::make_shared<const kb::KnowledgeBase>(std::move(corpus), std::move(index));
  }
  return std::make_shared<const kb::KnowledgeBase>(std::move(corpus),
                                                   kb::StopwordList::load(cfg.stopwords_path));
}

Runtime::Runtime(const ServiceConfig& cfg, std::shared_ptr<const kb::KnowledgeBase> knowledge,
                 std::shared_ptr<agent::CompletionProvider> provider)
    : kb_(std::move(knowledge)) {
  auto clock = system_clock();
  store_ = std::make_shared<telemetry::TelemetryStore>(clock);
  std::optional<TimestampUs> ttl;
  if (cfg.approval_ttl_s) ttl = *cfg.approval_ttl_s * 1'000'000;
  sim_ = std::make_shared<ran::RanSimulator>(ran::load_config(cfg.cu_config_path),
                                             ran::PathTable::load(cfg.paths_path), clock, ttl);
  pipeline::PipelineConfig pc;
  if (cfg.state_dir) {
    fs::create_directories(*cfg.state_dir);
    state_file_ = *cfg.state_dir / "state.json";
    pc.audit_path = *cfg.state_dir / "incident-audit.jsonl";
  }
  pipeline_ = std::make_shared<pipeline::Pipeline>(kb_, store_, sim_, std::move(provider), pc, clock);
  if (state_file_ && fs::exists(*state_file_)) {
    const Json j = read_json_file(*state_file_);
    store_->restore(j.at("telemetry"));
    sim_->restore(j.at("ran"));
    pipeline_->restore(j.at("pipeline"));
  }
}

void Runtime::ensure_trace(const evalkit::Scenario& s) {
  if (!store_->has_trace(s.trace_id)) store_->ingest_trace_file(s.trace_id, s.trace_path);
  for (const auto& ue : store_->ue_ids()) sim_->attach_ue(ue);
}

void Runtime::save() const {
  if (!state_file_) return;
  Json j{{"format", "oransec-state/1"},
         {"telemetry", store_->to_json()},
         {"ran", sim_->to_json()},
         {"pipeline", pipeline_->to_json()}};
  const fs::path tmp = state_file_->string() + ".tmp";
  write_text_file(tmp, j.dump() + "\n");
  fs::rename(tmp, *state_file_);
}

Json incident_summary(const pipeline::IncidentState& s) {
  Json j{{"incident_id", s.incident_id},
         {"scenario_id", s.scenario_id},
         {"phase", std::string(pipeline::to_string(s.phase))},
         {"received_at", s.event.received_at},
         {"approval_id", s.approval_id ? Json(*s.approval_id) : Json(nullptr)},
         {"escalation_reason", s.escalation_reason ? Json(*s.escalation_reason) : Json(nullptr)}};
  j["risk"] = s.report ? Json(std::string(pipeline::to_string(s.report->risk))) : Json(nullptr);
  j["verdict"] = s.report ? Json(std::string(pipeline::to_string(s.report->verdict))) : Json(nullptr);
  j["selected_technique_ids"] =
      s.classification ? Json(s.classification->selected_technique_ids) : Json::array();
  return j;
}

}  // namespace oransec::app
