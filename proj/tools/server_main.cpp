#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "shutdown.hpp"
#include "stella/server_http.hpp"

using namespace stella;

int main(int argc, char** argv) {
  CLI::App cli{"STELLA central server"};
  cli.require_subcommand(1);

  std::string config_path;
  auto* serve = cli.add_subcommand("serve", "Serve the registry and dashboard API");
  serve->add_option("--config", config_path, "Server config (JSON)")->required()->check(CLI::ExistingFile);

  std::string out_path;
  bool text = false;
  auto* report = cli.add_subcommand("report", "Write the dashboard report from the persisted state");
  report->add_option("--config", config_path, "Server config (JSON)")->required()->check(CLI::ExistingFile);
  report->add_option("--out", out_path, "Output file; '-' for stdout")->required();
  report->add_flag("--text", text, "Write the plain-text table instead of JSON");

  CLI11_PARSE(cli, argc, argv);
  try {
    const auto cfg = server::load_server_config(config_path);
    server::CentralServer srv(cfg, ingest::load_candidates(cfg.candidates_path));

    if (*report) {
      const std::string body = text ? srv.build_text_report() : srv.build_dashboard_report().dump(2) + "\n";
      if (out_path == "-") {
        std::cout << body;
      } else {
        std::ofstream out(out_path, std::ios::trunc);
        out << body;
        if (!out) throw Error(ErrorCode::Io, "cannot write " + out_path);
      }
      return 0;
    }

    server::ServerHttp http(srv);
    const int port = http.bind(cfg.host, cfg.port);
    http.start();
    std::cout << "server listening on " << cfg.host << ':' << port << std::endl;
    tools::wait_for_signal(std::chrono::milliseconds(1000));
    http.stop();
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "server: " << e.what() << '\n';
    return 1;
  }
}
