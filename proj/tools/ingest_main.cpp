#include <CLI11.hpp>

#include <iostream>

#include "stella/run_ingest.hpp"

int main(int argc, char** argv) {
  CLI::App cli{"Run-file ingestion"};
  cli.require_subcommand(1);

  std::string run_path, candidates_path;
  bool json = false;
  auto* validate = cli.add_subcommand("validate", "Validate a run file against candidate lists");
  validate->add_option("run", run_path, "Run file")->required()->check(CLI::ExistingFile);
  validate->add_option("--candidates", candidates_path, "Candidate list file")->required()->check(CLI::ExistingFile);
  validate->add_flag("--json", json, "Print the report as JSON");

  auto* normalize = cli.add_subcommand("normalize", "Print the canonical form of a run file");
  normalize->add_option("run", run_path, "Run file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(cli, argc, argv);

  try {
    const auto rs = stella::ingest::load_run_file(run_path);
    if (*normalize) {
      std::cout << stella::ingest::serialize_run(rs);
      return 0;
    }
    const auto report = stella::ingest::validate_against_candidates(rs, stella::ingest::load_candidates(candidates_path));
    if (json) {
      std::cout << nlohmann::json(report).dump(2) << '\n';
    } else {
      std::cout << report.to_text();
    }
    return report.accepted ? 0 : 1;
  } catch (const stella::Error& e) {
    std::cout << "run " << run_path << " rejected\n" << e.what() << '\n';
    return 1;
  }
}
