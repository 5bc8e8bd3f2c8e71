#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mfpm/cli.hpp"

int main(int argc, char** argv)
{
  CLI::App app{"Particle solver for mean-field control via the stochastic maximum principle"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool quiet = false;

  for (const char* name : {"validate", "solve", "gradcheck", "oracle"}) {
    static const char* help[] = {"run derivative, convexity and monotonicity checks", "solve the control problem",
                                 "compare the adjoint gradient with finite differences", "dump LQ Riccati schedules"};
    const std::string n = name;
    const int idx = n == "validate" ? 0 : n == "solve" ? 1 : n == "gradcheck" ? 2 : 3;
    auto* sub = app.add_subcommand(n, help[idx]);
    sub->add_option("--config", config, "configuration file (JSON)")->required();
    sub->add_option("--out", out, "output directory (overrides outputs.directory)");
    sub->add_option("--seed", seed, "seed override (u64)");
    sub->add_flag("--quiet", quiet, "suppress the summary on stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mfpm::exit_config;
  }

  mfpm::CommandOptions opt;
  opt.quiet = quiet;
  const CLI::App* sub = app.get_subcommands().front();
  if (sub->count("--out") > 0) opt.out = out;
  if (sub->count("--seed") > 0) opt.seed = seed;
  return mfpm::run_command(sub->get_name(), config, opt);
}
