#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "gglab/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo checks of overlap identities on random measures"};
  app.set_version_flag("--version", gglab::kToolVersion);
  app.require_subcommand(1);

  gglab::RunOptions options;
  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir;
  unsigned jobs = 0;
  auto* run = app.add_subcommand("run", "run every suite of a config file");
  run->add_option("config", config, "TOML or JSON experiment config")->required();
  auto* seed_opt = run->add_option("--seed", seed, "master seed (overrides the config)");
  auto* out_opt = run->add_option("--out-dir", out_dir, "output directory (overrides the config)");
  auto* jobs_opt = run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  run->add_option("--budget-scale", options.budget_scale, "multiplies every realization budget")
      ->check(CLI::PositiveNumber);

  std::string manifest;
  auto* summarize = app.add_subcommand("summarize", "print the summary of a finished run");
  summarize->add_option("manifest", manifest, "manifest.json of a run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*run) {
    if (*seed_opt) options.seed = seed;
    if (*out_opt) options.out_dir = out_dir;
    if (*jobs_opt) options.jobs = jobs;
    try {
      return gglab::run_command(config, options, std::cout, std::cerr);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 1;
    }
  }
  return gglab::summarize_command(manifest, std::cout, std::cerr);
}
