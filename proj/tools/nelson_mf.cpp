// nelson-mf: runs one experiment from a JSON config.
//
//   nelson-mf <experiment> --config <path> [--out <dir>] [--seed <u64>] [--threads <n>]
//
// Environment overrides (weaker than flags): NELSON_MF_OUT, NELSON_MF_THREADS.
// Exit codes: 0 success, 2 config error, 3 numerical failure, 4 budget exceeded.

#include "nelson/config.hpp"
#include "nelson/errors.hpp"
#include "nelson/experiments.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Mean-field vs many-body Nelson model experiments"};
  std::string experiment;
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("experiment", experiment,
                 "skg-run | free-compare | semiclassical-scan | fock-verify | theorem2-scaling | convergence-study")
      ->required();
  app.add_option("--config", config_path, "JSON config file")->required();
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides config and NELSON_MF_OUT)");
  auto* seed_opt = app.add_option("--seed", seed, "seed for randomized checks (overrides config)");
  auto* threads_opt = app.add_option("--threads", threads, "OpenMP thread count")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    nelson::ExperimentConfig config = nelson::load_config(config_path);
    if (nelson::experiment_from_name(experiment) != config.experiment)
      throw nelson::ConfigError("config describes '" + nelson::experiment_name(config.experiment) +
                                "' but '" + experiment + "' was requested");

    if (*out_opt)
      config.output_dir = out_dir;
    else if (const char* env = std::getenv("NELSON_MF_OUT"); env && *env)
      config.output_dir = env;
    if (*seed_opt) config.seed = seed;

    if (!*threads_opt)
      if (const char* env = std::getenv("NELSON_MF_THREADS"); env && *env) {
        threads = std::atoi(env);
        if (threads < 1) throw nelson::ConfigError("NELSON_MF_THREADS must be a positive integer");
      }
    if (threads > 0) omp_set_num_threads(threads);

    nelson::run_with_manifest(config, config.output_dir);
    std::cout << "wrote " << config.output_dir << "/manifest.json\n";
    return 0;
  } catch (const nelson::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const nelson::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const nelson::BudgetError& e) {
    std::cerr << "budget exceeded: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
