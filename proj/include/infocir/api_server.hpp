#pragma once

#include <memory>
#include <string>
#include <thread>

#include "infocir/error.hpp"
#include "infocir/workbench.hpp"

namespace httplib {
class Server;
}

namespace infocir {

struct ApiServerOptions {
  std::string cors_origin = "*";
};

/// HTTP status for an engine error: 400, 404, 409, 502 or 500.
int http_status(ErrorKind kind);

/// JSON API over a Workbench:
///   POST /api/query, /api/ideals, /api/enhance, /api/attribution
///   GET  /api/projection, /api/projection/status, /api/session/{id}, /api/health
/// Errors are returned as {"error": message} with the mapped status.
class ApiServer {
 public:
  explicit ApiServer(Workbench& workbench, ApiServerOptions options = {});
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  int start(const std::string& host, int port);  // background thread; port 0 = any
  bool listen(const std::string& host, int port);
  void stop();

 private:
  Workbench& wb_;
  ApiServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace infocir
