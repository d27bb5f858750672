#pragma once

#include <memory>
#include <string>
#include <thread>

#include "stella/central_server.hpp"

namespace httplib {
class Server;
}

namespace stella::server {

/// HTTP API of the central server. Every /api route takes a bearer token.
///   GET  /api/systems                    registry
///   POST /api/systems                    {"record": ..., "run": "..."}
///   GET  /api/systems/{id}/run           canonical run file
///   PUT  /api/systems/{id}/run           upload a run file
///   POST /api/systems/{id}/status        {"status": "live"}
///   POST /api/snapshots                  app snapshot; 202 when parked
///   GET  /api/report                     dashboard JSON
///   GET  /report.txt                     dashboard table
class ServerHttp {
 public:
  explicit ServerHttp(CentralServer& server);
  ~ServerHttp();

  ServerHttp(const ServerHttp&) = delete;
  ServerHttp& operator=(const ServerHttp&) = delete;

  int bind(const std::string& host, int port);
  void start();
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  CentralServer& server_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  int port_ = 0;
};

}  // namespace stella::server
