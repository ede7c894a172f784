// Command-line front end for the experiment harness.
//
//   cuefield_cli <experiment> --config <path.json> [--seed U64] [--workers INT] [--out DIR]

#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "cuefield/experiments.hpp"

int main(int argc, char** argv) {
  using namespace cuefield;
  CLI::App app{"Experiments on the CUE characteristic-polynomial field and its Gaussian analogue"};
  std::string experiment;
  std::string config_path;
  std::uint64_t seed = 1;
  unsigned workers = 1;
  std::string out_dir = "results";
  app.add_option("experiment", experiment, "Experiment to run")
      ->required()
      ->check(CLI::IsMember(experiment_names()));
  app.add_option("--config", config_path, "JSON configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out_dir, "Output directory");
  CLI11_PARSE(app, argc, argv);

  json config;
  try {
    std::ifstream f(config_path);
    config = json::parse(f);
    validate_config(config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }

  RunContext ctx{seed, workers};
  RunResult res;
  try {
    res = run_experiment(experiment, config, ctx);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    res.experiment = experiment;
    res.failed = true;
    res.error = e.what();
    res.add(json{{"seed", seed}}, "error", std::numeric_limits<double>::quiet_NaN());
    res.manifest = json{{"experiment", experiment}, {"config", config}, {"seed", seed},
                        {"workers", workers}, {"status", "failed"}, {"error", e.what()}};
  }
  write_outputs(res, out_dir);
  std::cout << to_csv(res);
  if (res.failed) {
    std::cerr << "error: " << res.error << '\n';
    return 1;
  }
  return 0;
}
