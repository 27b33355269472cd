#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "oransec/app.hpp"
#include "oransec/error.hpp"

namespace httplib {
class Server;
}

namespace oransec::service {

// HTTP status for an error code (404 for unknown ids, 409 for state
// conflicts, 400 for bad input, 502 for upstream failures, 500 otherwise).
int http_status(ErrorCode code) noexcept;
Json error_body(ErrorCode code, const std::string& message);

struct ApiResponse {
  int status = 0;
  Json body;
};

// Minimal client for the CLI's --server mode. `base_url` is http://host:port.
// Connection failures raise InvalidRequest.
ApiResponse api_call(const std::string& base_url, const std::string& method, const std::string& path,
                     const Json* body = nullptr, const std::string& operator_id = {});

// HTTP/JSON front end over a Runtime. Incidents submitted through
// POST /incidents run on worker threads; stop() waits for them to reach a
// terminal phase or the approval gate, then persists state.
class Service {
 public:
  Service(app::ServiceConfig config, std::shared_ptr<app::Runtime> runtime);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds to config.host:config.port (0 picks a free port); returns the port.
  int bind();
  // Serves until stop(); blocks the caller.
  void listen();
  void stop();

  int port() const noexcept { return port_; }

 private:
  void routes();
  void spawn_worker(const std::string& incident_id);
  void persist();

  app::ServiceConfig config_;
  std::shared_ptr<app::Runtime> runtime_;
  std::unique_ptr<httplib::Server> server_;
  int port_ = 0;

  std::mutex workers_mu_;
  std::vector<std::thread> workers_;
  std::mutex persist_mu_;
  std::atomic<bool> stopping_{false};
  std::thread expiry_;
};

}  // namespace oransec::service
