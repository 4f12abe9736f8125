// trotterfx <command> --config <path> [--strict] [--out <dir>]
#include <iostream>

#include <CLI11.hpp>

#include "trotterfx/experiment.hpp"

int main(int argc, char** argv) {
  namespace cli = trotterfx::cli;
  CLI::App app{"Trotter error experiments on layered Pauli Hamiltonians"};
  app.set_version_flag("--version", cli::version);

  std::string command;
  std::string config_path;
  std::string out_dir = ".";
  bool strict = false;
  app.add_option("command", command, "experiment to run")
      ->required()
      ->check(CLI::IsMember(cli::commands()));
  app.add_option("--config", config_path, "YAML experiment file")->required();
  app.add_flag("--strict", strict, "treat violated bound preconditions as errors");
  app.add_option("--out", out_dir, "directory for the artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::exit_config;
  }

  cli::ExperimentConfig config;
  try {
    config = cli::load_config(config_path, command);
  } catch (const cli::ConfigError& e) {
    std::cerr << config_path << ": " << e.what() << "\n";
    return cli::exit_config;
  }
  config.strict = strict;
  return cli::run(config, out_dir, std::cerr);
}
