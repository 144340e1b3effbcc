#pragma once
// Experiment configuration: a minimal TOML reader (tables, dotted keys,
// strings, numbers, booleans, scalar and one-level nested arrays, comments)
// normalized into JSON, plus JSON configs accepted as-is. On top of that, a
// tiny expression grammar turns strings like
//
//   "0.5*const + 0.5*cos(1)"     "sin(2,1)"     "gauss(0.5,0.5; 0.08)"
//
// into trig test functions, so config files stay human-readable.

#include <cstdint>
#include "json.hpp"
#include <string>
#include <vector>

#include "dynssep/environment.hpp"
#include "dynssep/test_function.hpp"

namespace dynssep {

nlohmann::json parse_toml(const std::string& text);

// .json or leading '{' → JSON; anything else parsed as TOML.
nlohmann::json load_config_file(const std::string& path);

// Key-sorted compact dump — the hashing and determinism anchor.
std::string canonical_dump(const nlohmann::json&);

// Field access that names the offending key in the error.
const nlohmann::json& require_field(const nlohmann::json&, const std::string&);
double require_number(const nlohmann::json&, const std::string&);
double require_positive(const nlohmann::json&, const std::string&);
int64_t require_integer(const nlohmann::json&, const std::string&);
std::string require_string(const nlohmann::json&, const std::string&);
double number_or(const nlohmann::json&, const std::string&, double fallback);
int64_t integer_or(const nlohmann::json&, const std::string&, int64_t fallback);
std::string string_or(const nlohmann::json&, const std::string&,
                      const std::string& fallback);
bool bool_or(const nlohmann::json&, const std::string&, bool fallback);
std::vector<double> number_list(const nlohmann::json&, const std::string&);
std::vector<int> integer_list(const nlohmann::json&, const std::string&);

TestFunction parse_test_function(const std::string& spec, int dim);

// dictionary = "default" | [spec, ...]; names echo the specs.
void parse_dictionary(const nlohmann::json& cfg, int dim,
                      std::vector<TestFunction>* dictionary,
                      std::vector<std::string>* names);

// [environment] block → spec (kind, levels, flip_rate, period, alpha,
// horizon, seed), validated.
EnvironmentSpec environment_from_config(const nlohmann::json& block);

// d×d matrix from a nested array, validated SPD.
Eigen::MatrixXd matrix_from_config(const nlohmann::json& value, int dim,
                                   const std::string& name);

// Cross-cutting invariants: every key ending in "tol"/"tolerance" positive,
// every N at least 4, a seed present (either in the config or merged from
// the command line before this call).
void validate_experiment_config(const nlohmann::json& cfg);

}  // namespace dynssep
