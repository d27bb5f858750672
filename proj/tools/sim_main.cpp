#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "shutdown.hpp"
#include "stella/user_sim.hpp"

using namespace stella;

int main(int argc, char** argv) {
  CLI::App cli{"STELLA traffic simulator"};
  cli.require_subcommand(1);

  std::string config_path, out_path = "-", mode;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> sessions;
  auto* run = cli.add_subcommand("run", "Run a simulated campaign and write its summary");
  run->add_option("--config", config_path, "Campaign config (JSON)")->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Campaign seed");
  run->add_option("--sessions", sessions, "Number of sessions");
  run->add_option("--mode", mode, "wire or inproc")->check(CLI::IsMember({"wire", "inproc"}));
  run->add_option("--out", out_path, "Summary file; '-' for stdout");

  std::size_t n_queries = 10, n_docs = 20;
  std::uint64_t world_seed = 42;
  std::string dir;
  auto* world = cli.add_subcommand("world", "Write a synthetic world as candidate, query and grade files");
  world->add_option("--queries", n_queries, "Number of queries");
  world->add_option("--docs", n_docs, "Candidates per query");
  world->add_option("--seed", world_seed, "World seed");
  world->add_option("--dir", dir, "Output directory")->required();

  std::string strategy = "ideal", host = "127.0.0.1";
  int port = 0;
  double timeout_rate = 0.0;
  auto* stub = cli.add_subcommand("stub", "Serve a stub system over a synthetic world");
  stub->add_option("--queries", n_queries, "Number of queries");
  stub->add_option("--docs", n_docs, "Candidates per query");
  stub->add_option("--seed", world_seed, "World seed");
  stub->add_option("--strategy", strategy, "ideal, candidate_order, reverse or shuffle");
  stub->add_option("--host", host, "Bind address");
  stub->add_option("--port", port, "Port; 0 picks one");
  stub->add_option("--timeout-rate", timeout_rate, "Share of calls answered too late");

  CLI11_PARSE(cli, argc, argv);
  try {
    if (*world) {
      const auto w = sim::generate_world(n_queries, n_docs, world_seed);
      std::filesystem::create_directories(dir);
      std::ofstream(std::filesystem::path(dir) / "candidates.tsv") << ingest::serialize_candidates(w.candidates);
      std::ofstream(std::filesystem::path(dir) / "queries.tsv") << ingest::serialize_queries(w.queries);
      std::ofstream grades(std::filesystem::path(dir) / "grades.tsv");
      for (const auto& [ctx, docs] : w.grades) {
        for (const auto& [doc, g] : docs) grades << ctx.str() << '\t' << doc.str() << '\t' << g << '\n';
      }
      return 0;
    }

    if (*stub) {
      const auto w = sim::generate_world(n_queries, n_docs, world_seed);
      auto system = std::make_shared<const sim::StubSystem>(w.candidates, w.grades, sim::parse_strategy(strategy),
                                                            world_seed);
      sim::StubServer srv(system, {timeout_rate, world_seed});
      const int bound = srv.bind(host, port);
      srv.start();
      std::cout << "stub " << strategy << " listening on " << host << ':' << bound << std::endl;
      tools::wait_for_signal(std::chrono::milliseconds(1000));
      srv.stop();
      return 0;
    }

    sim::CampaignConfig cfg = config_path.empty() ? sim::CampaignConfig{} : sim::load_campaign_config(config_path);
    if (seed) cfg.seed = *seed;
    if (sessions) cfg.sessions = *sessions;
    if (!mode.empty()) cfg.mode = mode == "wire" ? sim::Mode::wire : sim::Mode::inproc;
    const auto summary = sim::run_campaign(cfg).dump(2) + "\n";
    if (out_path == "-") {
      std::cout << summary;
    } else {
      std::ofstream out(out_path, std::ios::trunc);
      out << summary;
      if (!out) throw Error(ErrorCode::Io, "cannot write " + out_path);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "sim: " << e.what() << '\n';
    return 1;
  }
}
