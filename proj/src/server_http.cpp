#include "stella/server_http.hpp"

#include <httplib.h>

#include "stella/app_http.hpp"

namespace stella::server {

namespace {

void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

std::string bearer_token(const httplib::Request& req) {
  const auto h = req.get_header_value("Authorization");
  constexpr std::string_view prefix = "Bearer ";
  if (h.size() > prefix.size() && h.compare(0, prefix.size(), prefix) == 0) return h.substr(prefix.size());
  return {};
}

template <class F>
auto guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      nlohmann::json body{{"error", to_string(e.code())}, {"detail", e.detail()}};
      if (e.line() > 0) body["line"] = e.line();
      send_json(res, body, app::http_status_for(e.code()));
    } catch (const nlohmann::json::exception& e) {
      send_json(res, {{"error", "BadRequest"}, {"detail", e.what()}}, 400);
    } catch (const std::exception& e) {
      send_json(res, {{"error", "Internal"}, {"detail", e.what()}}, 500);
    }
  };
}

}  // namespace

ServerHttp::ServerHttp(CentralServer& server) : server_(server), http_(std::make_unique<httplib::Server>()) {
  auto& srv = *http_;
  auto require = [this](const httplib::Request& req) {
    const auto token = bearer_token(req);
    if (!server_.authenticate(token)) throw Error(ErrorCode::AuthFailure, "missing or unknown token");
    return token;
  };

  srv.Get("/api/systems", guarded([this, require](const httplib::Request& req, httplib::Response& res) {
    require(req);
    send_json(res, {{"systems", server_.systems()}});
  }));

  srv.Post("/api/systems", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto body = nlohmann::json::parse(req.body);
    std::optional<std::string> run;
    if (body.contains("run")) run = body["run"].get<std::string>();
    auto entry = server_.register_system(body.at("record").get<SystemRecord>(), bearer_token(req), std::move(run));
    send_json(res, entry, 201);
  }));

  srv.Get(R"(/api/systems/([^/]+)/run)", guarded([this, require](const httplib::Request& req, httplib::Response& res) {
    require(req);
    auto text = server_.run_text(SystemId(req.matches[1].str()));
    if (!text) throw Error(ErrorCode::UnknownSystem, "no run for " + req.matches[1].str());
    res.set_content(*text, "text/plain");
  }));

  srv.Put(R"(/api/systems/([^/]+)/run)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto entry = server_.upload_run(SystemId(req.matches[1].str()), req.body, bearer_token(req));
    send_json(res, entry, entry.status == Status::validated ? 200 : 422);
  }));

  srv.Post(R"(/api/systems/([^/]+)/status)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto to = parse_status(nlohmann::json::parse(req.body).at("status").get<std::string>());
    send_json(res, server_.transition(SystemId(req.matches[1].str()), to, bearer_token(req)));
  }));

  srv.Post("/api/snapshots", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto snap = nlohmann::json::parse(req.body).get<Snapshot>();
    const auto r = server_.ingest_app_snapshot(snap, bearer_token(req));
    const char* status = r.status == IngestStatus::applied  ? "applied"
                         : r.status == IngestStatus::parked ? "parked"
                                                            : "duplicate";
    send_json(res, {{"status", status}, {"next_expected", r.next_expected}},
              r.status == IngestStatus::parked ? 202 : 200);
  }));

  srv.Get("/api/report", guarded([this, require](const httplib::Request& req, httplib::Response& res) {
    require(req);
    send_json(res, server_.build_dashboard_report());
  }));

  srv.Get("/report.txt", guarded([this](const httplib::Request&, httplib::Response& res) {
    res.set_content(server_.build_text_report(), "text/plain");
  }));
}

ServerHttp::~ServerHttp() { stop(); }

int ServerHttp::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = http_->bind_to_any_port(host);
  } else if (http_->bind_to_port(host, port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void ServerHttp::start() {
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
}

void ServerHttp::run() { http_->listen_after_bind(); }

void ServerHttp::stop() {
  http_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace stella::server
