#pragma once

#include <map>
#include <memory>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "stella/site_app.hpp"

namespace httplib {
class Server;
}

namespace stella::app {

/// Public HTTP API of the site app:
///   GET  /ranking?query_id=&query=&session_id=&page_size=
///   GET  /recommendation/datasets?item_id=&session_id=&k=
///   POST /feedback
///   GET  /healthz
/// plus two operator endpoints, POST /admin/ship and POST /admin/reload.
class AppHttpServer {
 public:
  explicit AppHttpServer(SiteApp& app);
  ~AppHttpServer();

  AppHttpServer(const AppHttpServer&) = delete;
  AppHttpServer& operator=(const AppHttpServer&) = delete;

  /// Binds `host:port`; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves on a background thread until stop().
  void start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  SiteApp& app_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

struct LiveRegistry {
  std::vector<SystemRecord> systems;
  std::map<std::string, ingest::RunSet> runs;
};

/// Pulls the live systems and their run files from the central server.
LiveRegistry fetch_live_registry(const std::string& server_url, const std::string& token);

/// Snapshot sink posting to the central server's /api/snapshots.
SnapshotSink http_snapshot_sink(const std::string& server_url, const std::string& token);

/// Pulls the registry from the configured server into `app`, if any.
void reload_from_server(SiteApp& app);

/// HTTP status for an error code as seen by API clients.
int http_status_for(ErrorCode code) noexcept;

}  // namespace stella::app
