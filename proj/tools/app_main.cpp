#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <set>

#include "shutdown.hpp"
#include "stella/app_http.hpp"
#include "stella/metrics.hpp"

using namespace stella;

namespace {

int serve(const std::string& config_path) {
  auto cfg = app::load_app_config(config_path);
  app::ServingData data{ingest::load_candidates(cfg.candidates_path), {}};
  if (!cfg.queries_path.empty()) data.queries = ingest::load_queries(cfg.queries_path);

  app::SiteApp site(cfg, std::move(data), std::make_shared<app::HttpTransport>());
  if (cfg.server_url) {
    app::reload_from_server(site);
    site.set_sink(app::http_snapshot_sink(*cfg.server_url, cfg.server_token));
  }

  app::AppHttpServer http(site);
  const int port = http.bind(cfg.host, cfg.port);
  http.start();
  std::cout << "app " << cfg.app_id << " listening on " << cfg.host << ':' << port << std::endl;

  auto last_reload = std::chrono::steady_clock::now();
  tools::wait_for_signal(cfg.ship_interval, [&] {
    if (!cfg.server_url) return;
    site.ship();
    const auto now = std::chrono::steady_clock::now();
    if (cfg.reload_interval.count() > 0 && now - last_reload >= cfg.reload_interval) {
      last_reload = now;
      try {
        app::reload_from_server(site);
      } catch (const std::exception& e) {
        std::cerr << "app: registry reload failed: " << e.what() << '\n';
      }
    }
  });
  http.stop();
  if (cfg.server_url) site.ship();
  return 0;
}

int replay(const std::string& log_path, bool scorecards) {
  const auto records = EventLog::replay(log_path);
  if (!scorecards) {
    for (const auto& r : records) std::cout << nlohmann::json(r).dump() << '\n';
    return 0;
  }
  std::set<std::pair<SystemId, Task>> seen;
  for (const auto& r : records) {
    if (const auto* imp = std::get_if<ImpressionRecord>(&r)) {
      seen.emplace(imp->system, imp->task);
      if (imp->baseline) seen.emplace(*imp->baseline, imp->task);
      if (imp->fallback_from) seen.emplace(*imp->fallback_from, imp->task);
    }
  }
  std::vector<SystemRecord> registry;
  for (const auto& [id, task] : seen) registry.push_back({id, SystemKind::run_backed, task, std::nullopt, id.str()});
  const auto outcomes = metrics::derive_outcomes(records);
  std::cout << nlohmann::json(metrics::build_scorecards(records, outcomes, registry, {})).dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"STELLA site app"};
  cli.require_subcommand(1);

  std::string config_path;
  auto* serve_cmd = cli.add_subcommand("serve", "Serve the public API");
  serve_cmd->add_option("--config", config_path, "App config (JSON)")->required()->check(CLI::ExistingFile);

  std::string log_path;
  bool scorecards = false;
  auto* replay_cmd = cli.add_subcommand("replay", "Print the records of an event log");
  replay_cmd->add_option("--log", log_path, "Event log file")->required()->check(CLI::ExistingFile);
  replay_cmd->add_flag("--scorecards", scorecards, "Print scorecards computed from the log instead");

  CLI11_PARSE(cli, argc, argv);
  try {
    if (*serve_cmd) return serve(config_path);
    return replay(log_path, scorecards);
  } catch (const std::exception& e) {
    std::cerr << "app: " << e.what() << '\n';
    return 1;
  }
}
