#pragma once
// Subcommand orchestration: load + validate config, run one experiment
// stage, persist CSV results, a JSON summary, and the run manifest.
//
// Stages: env, kernel, duality, mild, sigma, hydro, tightness, diagnose,
// plot. The sigma → hydro hand-off goes through the sigma.json artifact;
// running hydro on a dynamic environment without one is a usage error that
// names the missing stage.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dynssep {

struct CliOptions {
  std::string config_path;
  std::optional<uint64_t> seed;  // overrides the config's seed
  int workers = 0;               // 0 → default_worker_count()
  bool assert_mode = false;      // threshold violations → exit 3
  std::string out_dir = "out";
};

// DYNSSEP_WORKERS if set and positive, else 1.
int default_worker_count();

const std::vector<std::string>& subcommand_names();

// Exit status: 0 ok, 1 usage, 2 numerical failure, 3 assertion failure.
int run_subcommand(const std::string& name, const CliOptions&);

}  // namespace dynssep
