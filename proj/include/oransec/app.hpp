#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "oransec/agent.hpp"
#include "oransec/evalkit.hpp"
#include "oransec/kb.hpp"
#include "oransec/pipeline.hpp"
#include "oransec/ran_control.hpp"
#include "oransec/remote.hpp"
#include "oransec/telemetry.hpp"

namespace oransec::app {

struct ProviderSettings {
  std::string kind = "scripted";  // scripted | remote
  // Scripted: explicit script files; empty means every script referenced by
  // the scenario manifests.
  std::vector<std::filesystem::path> script_paths;
  remote::RemoteConfig remote;
};

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path corpus_path;
  std::filesystem::path stopwords_path;
  std::optional<std::filesystem::path> index_path;  // prebuilt index from `kb ingest`
  std::filesystem::path scenario_dir;
  std::filesystem::path cu_config_path;
  std::filesystem::path paths_path;
  std::filesystem::path results_dir = "results";
  std::optional<std::filesystem::path> state_dir;
  ProviderSettings provider;
  std::optional<std::int64_t> approval_ttl_s;
};

// Defaults point at the bundled data directory.
ServiceConfig default_config();
// JSON mirroring ServiceConfig; relative paths resolve against the file's
// directory. Throws InvalidConfig.
ServiceConfig load_service_config(const std::filesystem::path& path);
ServiceConfig service_config_from_json(const Json& j, const std::filesystem::path& base);

std::shared_ptr<agent::CompletionProvider> make_provider(const ProviderSettings& settings,
                                                         const std::filesystem::path& scenario_dir);
std::shared_ptr<const kb::KnowledgeBase> load_knowledge(const ServiceConfig& cfg);

// Store, simulator and pipeline sharing one clock, optionally persisted as
// <state_dir>/state.json so separate processes can continue the same session.
class Runtime {
 public:
  Runtime(const ServiceConfig& cfg, std::shared_ptr<const kb::KnowledgeBase> knowledge,
          std::shared_ptr<agent::CompletionProvider> provider);

  pipeline::Pipeline& pipeline() noexcept { return *pipeline_; }
  ran::RanSimulator& simulator() noexcept { return *sim_; }
  telemetry::TelemetryStore& telemetry() noexcept { return *store_; }
  const kb::KnowledgeBase* knowledge() const noexcept { return kb_.get(); }

  // Ingests the scenario trace unless already present, then attaches its UEs.
  void ensure_trace(const evalkit::Scenario& s);

  bool persistent() const noexcept { return state_file_.has_value(); }
  void save() const;

 private:
  std::shared_ptr<const kb::KnowledgeBase> kb_;
  std::shared_ptr<telemetry::TelemetryStore> store_;
  std::shared_ptr<ran::RanSimulator> sim_;
  std::shared_ptr<pipeline::Pipeline> pipeline_;
  std::optional<std::filesystem::path> state_file_;
};

// One-line and JSON views shared by the CLI and the service.
Json incident_summary(const pipeline::IncidentState& s);

}  // namespace oransec::app
