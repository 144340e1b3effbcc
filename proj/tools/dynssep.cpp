// Command-line front end: one subcommand per experiment stage.
//
//   dynssep <stage> --config FILE [--seed S] [--workers W] [--assert]
//                   [--out DIR]
//
// Stages: env, kernel, duality, mild, sigma, hydro, tightness, diagnose,
// plot. Exit codes: 0 ok, 1 usage error, 2 numerical failure, 3 a
// --assert threshold was violated.

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dynssep/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dynamic-conductance exclusion process toolkit"};
  app.require_subcommand(1);

  dynssep::CliOptions opts;
  uint64_t seed_arg = 0;
  std::string chosen;

  for (const auto& name : dynssep::subcommand_names()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", opts.config_path, "TOML or JSON config file")
        ->required();
    CLI::Option* seed_opt =
        sub->add_option("--seed", seed_arg, "override the config seed");
    sub->add_option("--workers", opts.workers,
                    "worker threads (default: DYNSSEP_WORKERS or 1)");
    sub->add_flag("--assert", opts.assert_mode,
                  "exit 3 when a result check fails");
    sub->add_option("--out", opts.out_dir, "output directory (default: out)");
    sub->callback([&chosen, name, seed_opt, &opts, &seed_arg] {
      chosen = name;
      if (seed_opt->count() > 0) opts.seed = seed_arg;
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  return dynssep::run_subcommand(chosen, opts);
}
