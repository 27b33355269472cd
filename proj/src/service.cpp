#include "oransec/service.hpp"

#include <chrono>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace oransec::service {

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownIncident:
    case ErrorCode::UnknownApprovalId:
    case ErrorCode::UnknownTechniqueId:
    case ErrorCode::UnknownTraceId:
    case ErrorCode::UnknownUeId:
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::AlreadyDecided:
    case ErrorCode::VersionConflict:
    case ErrorCode::NotApproved:
    case ErrorCode::IllegalTransition:
    case ErrorCode::DuplicateTraceId:
      return 409;
    case ErrorCode::InvalidRequest:
    case ErrorCode::SchemaViolation:
    case ErrorCode::InvalidWindow:
    case ErrorCode::InvalidToolParams:
      return 400;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::RemoteBackendUnavailable:
      return 502;
    default:
      return 500;
  }
}

Json error_body(ErrorCode code, const std::string& message) {
  return Json{{"status", http_status(code)}, {"code", std::string(to_string(code))}, {"message", message}};
}

ApiResponse api_call(const std::string& base_url, const std::string& method, const std::string& path,
                     const Json* body, const std::string& operator_id) {
  const auto ep = remote::parse_endpoint(base_url);
  httplib::Client client(ep.host, ep.port);
  client.set_read_timeout(90, 0);
  httplib::Headers headers;
  if (!operator_id.empty()) headers.emplace("X-Operator-Id", operator_id);
  httplib::Result res = method == "POST"
                            ? client.Post(path, headers, body ? body->dump() : "{}", "application/json")
                            : client.Get(path, headers);
  if (!res) {
    throw Error(ErrorCode::InvalidRequest,
                "cannot reach " + base_url + ": " + httplib::to_string(res.error()));
  }
  ApiResponse out;
  out.status = res->status;
  out.body = Json::parse(res->body, nullptr, false);
  if (out.body.is_discarded()) out.body = Json{{"raw", res->body}};
  return out;
}

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  send_json(res, http_status(code), error_body(code, message));
}

Json parse_body(const httplib::Request& req) {
  try {
    return Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidRequest, std::string("body is not JSON: ") + e.what());
  }
}

std::optional<ran::ApprovalStatus> parse_status(const std::string& s) {
  for (auto st : {ran::ApprovalStatus::pending, ran::ApprovalStatus::approved, ran::ApprovalStatus::rejected,
                  ran::ApprovalStatus::expired}) {
    if (ran::to_string(st) == s) return st;
  }
  return std::nullopt;
}

std::int64_t int_param(const httplib::Request& req, const std::string& name, std::int64_t fallback) {
  if (!req.has_param(name)) return fallback;
  try {
    std::size_t used = 0;
    const std::string v = req.get_param_value(name);
    const auto n = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidRequest, "query parameter '" + name + "' must be an integer");
  }
}

// Wraps a handler so domain errors map to ApiError responses.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, ErrorCode::Internal, e.what());
    }
  };
}

}  // namespace

Service::Service(app::ServiceConfig config, std::shared_ptr<app::Runtime> runtime)
    : config_(std::move(config)), runtime_(std::move(runtime)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

Service::~Service() { stop(); }

int Service::bind() {
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
  } else {
    port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (port_ <= 0) {
    throw Error(ErrorCode::InvalidConfig,
                "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  if (config_.approval_ttl_s) {
    expiry_ = std::thread([this] {
      while (!stopping_) {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        try {
          if (!runtime_->pipeline().expire_stale().empty()) persist();
        } catch (const std::exception& e) {
          spdlog::warn("approval expiry sweep failed: {}", e.what());
        }
      }
    });
  }
  return port_;
}

void Service::listen() { server_->listen_after_bind(); }

void Service::stop() {
  if (stopping_.exchange(true)) return;
  server_->stop();
  std::vector<std::thread> workers;
  {
    std::lock_guard lk(workers_mu_);
    workers.swap(workers_);
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
  if (expiry_.joinable()) expiry_.join();
  persist();
}

void Service::persist() {
  std::lock_guard lk(persist_mu_);
  try {
    runtime_->save();
  } catch (const std::exception& e) {
    spdlog::error("state save failed: {}", e.what());
  }
}

void Service::spawn_worker(const std::string& incident_id) {
  std::lock_guard lk(workers_mu_);
  workers_.emplace_back([this, incident_id] {
    try {
      const auto s = runtime_->pipeline().process(incident_id);
      spdlog::info("{} reached {}", incident_id, pipeline::to_string(s.phase));
    } catch (const std::exception& e) {
      spdlog::error("{} processing failed: {}", incident_id, e.what());
    }
    persist();
  });
}

void Service::routes() {
  auto& s = *server_;
  auto& rt = *runtime_;

  s.Get("/health", guarded([](const httplib::Request&, httplib::Response& res) {
          send_json(res, 200, Json{{"status", "ok"}});
        }));

  s.Post("/incidents", guarded([this, &rt](const httplib::Request& req, httplib::Response& res) {
           if (stopping_) throw Error(ErrorCode::InvalidRequest, "service is shutting down");
           const Json body = parse_body(req);
           if (!body.is_object()) throw Error(ErrorCode::InvalidRequest, "body must be an object");
           // Either {"event": {...}, "scenario_id": "..."} or the bare event.
           const Json& ev = body.contains("event") ? body.at("event") : body;
           const std::string scenario = body.value("scenario_id", std::string("adhoc"));
           const auto input = telemetry::parse_event_input(ev);
           const std::string id = rt.pipeline().submit(input, scenario);
           spawn_worker(id);
           send_json(res, 202, Json{{"incident_id", id}});
         }));

  s.Get("/incidents", guarded([&rt](const httplib::Request&, httplib::Response& res) {
          Json out = Json::array();
          for (const auto& inc : rt.pipeline().list()) out.push_back(app::incident_summary(inc));
          send_json(res, 200, Json{{"incidents", out}});
        }));

  s.Get(R"(/incidents/([A-Za-z0-9_\-]+))",
        guarded([&rt](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, pipeline::to_json(rt.pipeline().get(req.matches[1])));
        }));

  s.Get("/approvals", guarded([&rt](const httplib::Request& req, httplib::Response& res) {
          std::optional<ran::ApprovalStatus> status;
          if (req.has_param("status")) {
            status = parse_status(req.get_param_value("status"));
            if (!status) throw Error(ErrorCode::InvalidRequest, "unknown status filter");
          }
          auto& sim = rt.simulator();
          const auto wait = int_param(req, "wait", 0);
          if (wait < 0 || wait > 60'000) throw Error(ErrorCode::InvalidRequest, "wait must be 0..60000 ms");
          auto seq = sim.change_seq();
          if (wait > 0) {
            const auto since = static_cast<std::uint64_t>(int_param(req, "since_seq", static_cast<std::int64_t>(seq)));
            seq = sim.wait_for_change(since, std::chrono::milliseconds(wait));
          }
          Json out = Json::array();
          for (const auto& a : sim.list_approvals(status)) out.push_back(ran::to_json(a));
          send_json(res, 200, Json{{"seq", seq}, {"approvals", out}});
        }));

  s.Get(R"(/approvals/([A-Za-z0-9_\-]+))",
        guarded([&rt](const httplib::Request& req, httplib::Response& res) {
          send_json(res, 200, ran::to_json(rt.simulator().get_approval(req.matches[1])));
        }));

  s.Post(R"(/approvals/([A-Za-z0-9_\-]+)/decision)",
         guarded([this, &rt](const httplib::Request& req, httplib::Response& res) {
           const std::string op = req.get_header_value("X-Operator-Id");
           if (op.empty()) throw Error(ErrorCode::InvalidRequest, "X-Operator-Id header is required");
           const Json body = parse_body(req);
           if (!body.is_object() || !body.contains("decision") || !body.at("decision").is_string()) {
             throw Error(ErrorCode::InvalidRequest, "body must be {\"decision\": \"approve\"|\"reject\"}");
           }
           const auto decision = ran::parse_decision(body.at("decision").get<std::string>());
           if (!decision) throw Error(ErrorCode::InvalidRequest, "decision must be approve or reject");
           const std::string approval_id = req.matches[1];
           const auto inc = rt.pipeline().decide(approval_id, *decision, op);
           persist();
           send_json(res, 200,
                     Json{{"approval", ran::to_json(rt.simulator().get_approval(approval_id))},
                          {"incident", app::incident_summary(inc)}});
         }));

  s.Get(R"(/kb/techniques/([A-Za-z0-9.\-]+))",
        guarded([&rt](const httplib::Request& req, httplib::Response& res) {
          if (!rt.knowledge()) throw Error(ErrorCode::EmptyIndex, "knowledge base not loaded");
          send_json(res, 200, kb::to_json(rt.knowledge()->get_technique(std::string(req.matches[1]))));
        }));

  s.Get("/kb/search", guarded([&rt](const httplib::Request& req, httplib::Response& res) {
          if (!rt.knowledge()) throw Error(ErrorCode::EmptyIndex, "knowledge base not loaded");
          const std::string q = req.get_param_value("q");
          if (q.empty()) throw Error(ErrorCode::InvalidRequest, "query parameter 'q' is required");
          const auto k = int_param(req, "k", 3);
          if (k < 1 || k > 100) throw Error(ErrorCode::InvalidRequest, "k must be 1..100");
          Json out = Json::array();
          for (const auto& r : rt.knowledge()->search(q, static_cast<std::size_t>(k))) out.push_back(kb::to_json(r));
          send_json(res, 200, Json{{"query", q}, {"results", out}});
        }));

  s.Get("/audit", guarded([&rt](const httplib::Request& req, httplib::Response& res) {
          std::optional<std::string> incident;
          if (req.has_param("incident_id")) incident = req.get_param_value("incident_id");
          ran::AuditFilter f;
          f.incident_id = incident;
          Json ran_log = Json::array();
          for (const auto& e : rt.simulator().get_audit_log(f)) ran_log.push_back(ran::to_json(e));
          Json pipe_log = Json::array();
          for (const auto& e : rt.pipeline().audit_log(incident)) pipe_log.push_back(pipeline::to_json(e));
          send_json(res, 200, Json{{"ran", ran_log}, {"incidents", pipe_log}});
        }));

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty() && res.status == 404) send_error(res, ErrorCode::NotFound, "no such route");
  });
}

}  // namespace oransec::service
