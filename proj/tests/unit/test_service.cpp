#include <gtest/gtest.h>

#include <cctype>
#include <chrono>
#include <fstream>
#include <thread>

#include "oransec/app.hpp"
#include "oransec/error.hpp"
#include "oransec/service.hpp"
#include "support.hpp"

using namespace oransec;

namespace {

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

std::string url_encode(const std::string& s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

// In-process service on an ephemeral port.
class ServiceFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    cfg_ = app::default_config();
    cfg_.port = 0;
    cfg_.state_dir = dir_.path();
    runtime_ = std::make_shared<app::Runtime>(cfg_, testsupport::fixture_kb(),
                                              app::make_provider(cfg_.provider, cfg_.scenario_dir));
    runtime_->ensure_trace(testsupport::fixture_scenario("null-cipher-integrity"));
    service_ = std::make_unique<service::Service>(cfg_, runtime_);
    const int port = service_->bind();
    base_ = "http://127.0.0.1:" + std::to_string(port);
    thread_ = std::thread([this] { service_->listen(); });
  }

  void TearDown() override {
    service_->stop();
    thread_.join();
  }

  service::ApiResponse get(const std::string& path) { return service::api_call(base_, "GET", path); }

  // Polls until the incident leaves its transient phases.
  Json wait_for_phase(const std::string& id, const std::string& phase) {
    Json last;
    for (int i = 0; i < 200; ++i) {
      last = get("/incidents/" + id).body;
      if (last.value("phase", "") == phase) return last;
      std::this_thread::sleep_for(std::chrono::milliseconds(25));
    }
    ADD_FAILURE() << "incident " << id << " stuck in " << last.value("phase", "?");
    return last;
  }

  testsupport::TempDir dir_{"service"};
  app::ServiceConfig cfg_;
  std::shared_ptr<app::Runtime> runtime_;
  std::unique_ptr<service::Service> service_;
  std::thread thread_;
  std::string base_;
};

}  // namespace

TEST(HttpStatus, Mapping) {
  EXPECT_EQ(service::http_status(ErrorCode::UnknownIncident), 404);
  EXPECT_EQ(service::http_status(ErrorCode::AlreadyDecided), 409);
  EXPECT_EQ(service::http_status(ErrorCode::SchemaViolation), 400);
  EXPECT_EQ(service::http_status(ErrorCode::ProviderUnavailable), 502);
  EXPECT_EQ(service::http_status(ErrorCode::Internal), 500);
  const auto b = service::error_body(ErrorCode::NotFound, "x");
  EXPECT_EQ(b.at("status"), 404);
  EXPECT_EQ(b.at("code"), "NOT_FOUND");
}

TEST(Config, ParsesAndResolvesRelativePaths) {
  const auto cfg = app::service_config_from_json(
      Json{{"listen", {{"host", "0.0.0.0"}, {"port", 9000}}},
           {"corpus_path", "kb/corpus.json"},
           {"approval_ttl_s", 30},
           {"provider", {{"kind", "remote"}, {"endpoint", "http://localhost:1234"}, {"model", "m"}}}},
      "/etc/oransec");
  EXPECT_EQ(cfg.host, "0.0.0.0");
  EXPECT_EQ(cfg.port, 9000);
  EXPECT_EQ(cfg.corpus_path, std::filesystem::path("/etc/oransec/kb/corpus.json"));
  EXPECT_EQ(cfg.approval_ttl_s, 30);
  EXPECT_EQ(cfg.provider.kind, "remote");
}

TEST(Config, Errors) {
  EXPECT_EQ(code_of([] { app::service_config_from_json(Json{{"approval_ttl_s", 0}}, "/"); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { app::service_config_from_json(Json{{"provider", {{"kind", "oracle"}}}}, "/"); }),
            ErrorCode::InvalidConfig);
  EXPECT_EQ(code_of([] { app::service_config_from_json(Json{{"listen", {{"port", "x"}}}}, "/"); }),
            ErrorCode::InvalidConfig);
}

TEST(Runtime, PersistsAndRestoresState) {
  testsupport::TempDir dir("runtime");
  auto cfg = app::default_config();
  cfg.state_dir = dir.path();
  const auto provider = app::make_provider(cfg.provider, cfg.scenario_dir);
  const auto scenario = testsupport::fixture_scenario("null-cipher-integrity");
  std::string approval_id;
  {
    app::Runtime rt(cfg, testsupport::fixture_kb(), provider);
    rt.ensure_trace(scenario);
    const auto st = rt.pipeline().process(rt.pipeline().submit(scenario.event, scenario.scenario_id));
    ASSERT_EQ(pipeline::to_string(st.phase), "awaiting_approval");
    approval_id = *st.approval_id;
    rt.save();
  }
  app::Runtime again(cfg, testsupport::fixture_kb(), provider);
  EXPECT_TRUE(again.telemetry().has_trace(scenario.trace_id));
  const auto done = again.pipeline().decide(approval_id, ran::Decision::approve, "tester");
  EXPECT_EQ(pipeline::to_string(done.phase), "mitigated");
  EXPECT_EQ(again.simulator().get_ran_cu_config().version, 2);
}

TEST_F(ServiceFixture, HealthAndUnknownRoute) {
  EXPECT_EQ(get("/health").status, 200);
  const auto r = get("/no/such/route");
  EXPECT_EQ(r.status, 404);
  EXPECT_EQ(r.body.at("code"), "NOT_FOUND");
}

TEST_F(ServiceFixture, IncidentApprovalFlow) {
  const auto scenario = testsupport::fixture_scenario("null-cipher-integrity");
  const Json manifest = Json::parse(std::ifstream(testsupport::data_dir() / "scenarios" / "null-cipher-integrity.json"));
  const Json body{{"event", manifest.at("event")}, {"scenario_id", scenario.scenario_id}};
  const auto sub = service::api_call(base_, "POST", "/incidents", &body);
  ASSERT_EQ(sub.status, 202) << sub.body.dump();
  const std::string id = sub.body.at("incident_id");

  const auto waiting = wait_for_phase(id, "awaiting_approval");
  const std::string approval_id = waiting.at("approval_id");
  const auto pending = get("/approvals?status=pending");
  ASSERT_EQ(pending.status, 200);
  ASSERT_EQ(pending.body.at("approvals").size(), 1u);

  const Json approve{{"decision", "approve"}};
  const std::string path = "/approvals/" + approval_id + "/decision";
  EXPECT_EQ(service::api_call(base_, "POST", path, &approve).status, 400);  // no operator header
  const auto decided = service::api_call(base_, "POST", path, &approve, "alice");
  ASSERT_EQ(decided.status, 200) << decided.body.dump();
  EXPECT_EQ(decided.body.at("incident").at("phase"), "mitigated");
  EXPECT_EQ(decided.body.at("approval").at("decided_by"), "alice");

  const auto again = service::api_call(base_, "POST", path, &approve, "alice");
  EXPECT_EQ(again.status, 409);
  EXPECT_EQ(again.body.at("code"), "ALREADY_DECIDED");

  const auto audit = get("/audit?incident_id=" + id).body.at("ran");
  std::vector<std::string> kinds;
  for (const auto& e : audit) kinds.push_back(e.at("kind"));
  EXPECT_EQ(kinds, (std::vector<std::string>{"proposed", "approved", "applied", "rebooted"}));
  EXPECT_EQ(get("/incidents").body.at("incidents").size(), 1u);
}

TEST_F(ServiceFixture, BadRequests) {
  const Json bad{{"description", ""}};
  EXPECT_EQ(service::api_call(base_, "POST", "/incidents", &bad).status, 400);
  EXPECT_EQ(get("/incidents/INC-999999").status, 404);
  EXPECT_EQ(get("/approvals/APR-9999").status, 404);
  EXPECT_EQ(get("/approvals?status=bogus").status, 400);
  EXPECT_EQ(get("/approvals?wait=70000").status, 400);
  EXPECT_EQ(get("/kb/search?q=x&k=0").status, 400);
  EXPECT_EQ(get("/kb/techniques/FGT0000").status, 404);
}

TEST_F(ServiceFixture, KnowledgeEndpoints) {
  const auto t = get("/kb/techniques/FGT1600.501");
  ASSERT_EQ(t.status, 200);
  const std::string desc = t.body.at("description");
  const auto s = get("/kb/search?k=1&q=" + url_encode(desc));
  ASSERT_EQ(s.status, 200) << s.body.dump();
  ASSERT_EQ(s.body.at("results").size(), 1u);
  EXPECT_EQ(s.body.at("results")[0].at("technique_id"), "FGT1600.501");
  EXPECT_EQ(get("/kb/search?q=jamming").body.at("results").size(), 3u);
}
