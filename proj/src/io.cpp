#include "dynssep/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dynssep/errors.hpp"

namespace dynssep {

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path);
  for (std::size_t i = 0; i < header.size(); ++i)
    out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw UsageError("csv row width mismatch in " + path);
    for (std::size_t i = 0; i < row.size(); ++i)
      out << (i ? "," : "") << row[i];
    out << '\n';
  }
  if (!out) throw UsageError("write failed: " + path);
}

uint64_t fnv1a64(const std::string& data) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(uint64_t value) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path);
  out << content;
  if (!out) throw UsageError("write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json j;
  j["schema"] = m.schema;
  j["subcommand"] = m.subcommand;
  j["version"] = m.version;
  j["config_hash"] = m.config_hash;
  j["master_seed"] = m.master_seed;
  j["workers"] = m.workers;
  j["wall_seconds"] = m.wall_seconds;
  j["outputs"] = m.outputs;
  j["config"] = m.config;
  return j;
}

void write_manifest(const std::string& path, const RunManifest& m) {
  write_text(path, manifest_json(m).dump(2) + "\n");
}

}  // namespace dynssep
