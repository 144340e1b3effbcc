#pragma once
// Artifact plumbing: deterministic CSV emission, config hashing, and the
// run manifest that ties every output file to the (config, seed, version)
// triple that produced it. Floating-point cells use %.17g so a fixed seed
// reproduces result tables byte for byte.

#include <cstdint>
#include "json.hpp"
#include <string>
#include <vector>

namespace dynssep {

std::string format_g17(double x);

// One row per entry; every cell already formatted. Overwrites `path`.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

uint64_t fnv1a64(const std::string& data);
std::string hex64(uint64_t value);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

struct RunManifest {
  int schema = 1;
  std::string subcommand;
  std::string version;      // library version baked in at build time
  std::string config_hash;  // FNV-1a of the canonical config dump
  uint64_t master_seed = 0;
  int workers = 1;
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;  // files written, traceability
  nlohmann::json config;             // canonical echo
};

nlohmann::json manifest_json(const RunManifest&);
void write_manifest(const std::string& path, const RunManifest&);

}  // namespace dynssep
