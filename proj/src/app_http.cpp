#include "stella/app_http.hpp"

#include <httplib.h>

namespace stella::app {

namespace {

void send_error(httplib::Response& res, const Error& e) {
  res.status = http_status_for(e.code());
  res.set_content(nlohmann::json{{"error", to_string(e.code())}, {"detail", e.detail()}}.dump(), "application/json");
}

void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

std::optional<std::string> param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  auto v = req.get_param_value(name);
  if (v.empty()) return std::nullopt;
  return v;
}

long long int_param(const httplib::Request& req, const char* name, long long fallback) {
  auto v = param(req, name);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    const long long out = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument(*v);
    return out;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadRequest, std::string(name) + " is not an integer");
  }
}

template <class F>
auto guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const nlohmann::json::exception& e) {
      send_error(res, Error(ErrorCode::BadRequest, e.what()));
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(nlohmann::json{{"error", "Internal"}, {"detail", e.what()}}.dump(), "application/json");
    }
  };
}

httplib::Headers bearer(const std::string& token) { return {{"Authorization", "Bearer " + token}}; }

}  // namespace

int http_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NoBaseline: return 503;
    case ErrorCode::UnknownImpression:
    case ErrorCode::UnknownSystem: return 404;
    case ErrorCode::UnknownClickedDoc:
    case ErrorCode::OutOfCandidates: return 422;
    case ErrorCode::AuthFailure: return 401;
    case ErrorCode::DuplicateSystemId:
    case ErrorCode::BadTransition: return 409;
    case ErrorCode::Timeout: return 504;
    case ErrorCode::Io:
    case ErrorCode::Transport: return 500;
    default: return 400;
  }
}

AppHttpServer::AppHttpServer(SiteApp& app) : app_(app), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;

  srv.Get("/ranking", guarded([this](const httplib::Request& req, httplib::Response& res) {
    RankingRequest r;
    if (auto v = param(req, "query_id")) r.query_id = QueryId(*v);
    r.query_text = param(req, "query");
    r.session_id = param(req, "session_id").value_or("");
    r.page_size = static_cast<std::size_t>(
        std::max(1LL, int_param(req, "page_size", static_cast<long long>(app_.config().default_page_size))));
    if (req.has_param("at")) r.at = int_param(req, "at", 0);
    send_json(res, app_.handle_ranking(r));
  }));

  srv.Get("/recommendation/datasets", guarded([this](const httplib::Request& req, httplib::Response& res) {
    RecommendationRequest r;
    r.seed_id = SeedId(param(req, "item_id").value_or(""));
    r.session_id = param(req, "session_id").value_or("");
    r.requested_k = static_cast<int>(int_param(req, "k", 0));
    if (req.has_param("at")) r.at = int_param(req, "at", 0);
    auto served = app_.handle_recommendation(r);
    if (served) {
      send_json(res, *served);
    } else {
      send_json(res, {{"skip", true}, {"items", nlohmann::json::array()}});
    }
  }));

  srv.Post("/feedback", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto ev = nlohmann::json::parse(req.body).get<FeedbackEvent>();
    const auto ack = app_.record_feedback(ev);
    send_json(res, {{"ack", true}, {"duplicate", ack.duplicate}});
  }));

  srv.Get("/healthz", guarded([this](const httplib::Request&, httplib::Response& res) {
    const auto st = app_.stats();
    send_json(res, {{"status", "ok"},
                    {"app_id", app_.config().app_id},
                    {"impressions", st.impressions},
                    {"fallbacks", st.fallbacks},
                    {"skips", st.skips},
                    {"log_records", st.log_records},
                    {"shipped_seq", st.shipped_seq},
                    {"pending_snapshots", st.pending_snapshots}});
  }));

  srv.Post("/admin/ship", guarded([this](const httplib::Request&, httplib::Response& res) {
    const auto delivered = app_.ship();
    const auto st = app_.stats();
    send_json(res, {{"delivered", delivered}, {"pending", st.pending_snapshots}, {"shipped_seq", st.shipped_seq}});
  }));

  srv.Post("/admin/reload", guarded([this](const httplib::Request&, httplib::Response& res) {
    reload_from_server(app_);
    send_json(res, {{"arms", app_.experiment().arms}});
  }));
}

AppHttpServer::~AppHttpServer() { stop(); }

int AppHttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
  } else if (server_->bind_to_port(host, port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::Io, "cannot bind " + host + ":" + std::to_string(port));
  return port_;
}

void AppHttpServer::start() {
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void AppHttpServer::run() { server_->listen_after_bind(); }

void AppHttpServer::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

LiveRegistry fetch_live_registry(const std::string& server_url, const std::string& token) {
  httplib::Client cli(server_url);
  cli.set_connection_timeout(std::chrono::seconds(5));
  cli.set_read_timeout(std::chrono::seconds(30));
  auto res = cli.Get("/api/systems", bearer(token));
  if (!res) throw Error(ErrorCode::Transport, server_url + "/api/systems: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error(ErrorCode::Transport, "/api/systems answered " + std::to_string(res->status));

  LiveRegistry out;
  const auto body = nlohmann::json::parse(res->body);
  for (const auto& entry : body.at("systems")) {
    if (entry.at("status").get<std::string>() != "live") continue;
    auto rec = entry.at("record").get<SystemRecord>();
    if (rec.kind == SystemKind::run_backed) {
      auto run = cli.Get("/api/systems/" + rec.system_id.str() + "/run", bearer(token));
      if (!run || run->status != 200) {
        throw Error(ErrorCode::Transport, "cannot fetch run of " + rec.system_id.str());
      }
      out.runs.emplace(*rec.run_ref, ingest::parse_run_text(run->body));
    }
    out.systems.push_back(std::move(rec));
  }
  return out;
}

SnapshotSink http_snapshot_sink(const std::string& server_url, const std::string& token) {
  return [server_url, token](const Snapshot& snap) {
    httplib::Client cli(server_url);
    cli.set_connection_timeout(std::chrono::seconds(5));
    cli.set_read_timeout(std::chrono::seconds(30));
    auto res = cli.Post("/api/snapshots", bearer(token), nlohmann::json(snap).dump(), "application/json");
    // 202 means parked behind a gap; the server holds it, so it counts as delivered.
    return res && (res->status == 200 || res->status == 202);
  };
}

void reload_from_server(SiteApp& app) {
  const auto& cfg = app.config();
  if (!cfg.server_url) return;
  auto live = fetch_live_registry(*cfg.server_url, cfg.server_token);
  app.update_registry(std::move(live.systems), std::move(live.runs));
}

}  // namespace stella::app
