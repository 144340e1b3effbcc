#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "dynssep/config.hpp"
#include "dynssep/environment.hpp"
#include "dynssep/errors.hpp"
#include "dynssep/io.hpp"
#include "dynssep/test_function.hpp"

using namespace dynssep;

TEST_CASE("toml parsing covers tables, types, arrays, and comments") {
  const std::string text = R"(
# experiment header
title = "demo run"   # trailing comment with # inside "quotes" is fine
count = 42
ratio = 0.75
flag = true
negative = -3
sci = 1.5e-3
names = ["a", "b"]
grid = [1, 2, 3]
matrix = [[2.0, 0.0], [0.0, 2.0]]

[environment]
kind = "markov_flip"
levels = [0.5, 2.0]

[environment.extra]
note = "nested"

[run]
seed = 7
times.first = 0.1
)";
  const nlohmann::json cfg = parse_toml(text);
  CHECK(cfg.at("title").get<std::string>() == "demo run");
  CHECK(cfg.at("count").get<int64_t>() == 42);
  CHECK(cfg.at("count").is_number_integer());
  CHECK(cfg.at("ratio").get<double>() == 0.75);
  CHECK(cfg.at("ratio").is_number_float());
  CHECK(cfg.at("flag").get<bool>() == true);
  CHECK(cfg.at("negative").get<int64_t>() == -3);
  CHECK(cfg.at("sci").get<double>() == doctest::Approx(1.5e-3));
  CHECK(cfg.at("names").at(1).get<std::string>() == "b");
  CHECK(cfg.at("grid").at(2).get<int64_t>() == 3);
  CHECK(cfg.at("matrix").at(1).at(1).get<double>() == 2.0);
  CHECK(cfg.at("environment").at("kind").get<std::string>() == "markov_flip");
  CHECK(cfg.at("environment").at("levels").at(0).get<double>() == 0.5);
  CHECK(cfg.at("environment").at("extra").at("note").get<std::string>() ==
        "nested");
  CHECK(cfg.at("run").at("seed").get<int64_t>() == 7);
  CHECK(cfg.at("run").at("times").at("first").get<double>() == 0.1);
}

TEST_CASE("toml errors are reported as usage errors") {
  CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), UsageError);
  CHECK_THROWS_AS(parse_toml("a = \n"), UsageError);
  CHECK_THROWS_AS(parse_toml("just a line\n"), UsageError);
  CHECK_THROWS_AS(parse_toml("a = \"unterminated\n"), UsageError);
  CHECK_THROWS_AS(parse_toml("[[points]]\nx = 1\n"), UsageError);
}

TEST_CASE("config files load as toml or json by shape") {
  {
    std::ofstream out("cfg_load_test.toml");
    out << "seed = 5\n[environment]\nkind = \"static\"\n";
  }
  {
    std::ofstream out("cfg_load_test.json");
    out << "{\"seed\": 5, \"environment\": {\"kind\": \"static\"}}";
  }
  const nlohmann::json a = load_config_file("cfg_load_test.toml");
  const nlohmann::json b = load_config_file("cfg_load_test.json");
  CHECK(canonical_dump(a) == canonical_dump(b));
  CHECK_THROWS_AS(load_config_file("missing_config.toml"), UsageError);
}

TEST_CASE("canonical dumps are key-order independent") {
  nlohmann::json a;
  a["zeta"] = 1;
  a["alpha"] = 2;
  nlohmann::json b;
  b["alpha"] = 2;
  b["zeta"] = 1;
  CHECK(canonical_dump(a) == canonical_dump(b));
  CHECK(canonical_dump(a) == "{\"alpha\":2,\"zeta\":1}");
}

TEST_CASE("field accessors name the offending key") {
  nlohmann::json cfg;
  cfg["n"] = 8;
  cfg["x"] = 1.5;
  cfg["name"] = "abc";
  cfg["list"] = {1.0, 2.0};
  CHECK(require_number(cfg, "x") == 1.5);
  CHECK(require_integer(cfg, "n") == 8);
  CHECK(require_string(cfg, "name") == "abc");
  CHECK(require_positive(cfg, "x") == 1.5);
  CHECK(number_or(cfg, "absent", 9.0) == 9.0);
  CHECK(integer_or(cfg, "n", 0) == 8);
  CHECK(string_or(cfg, "absent", "dflt") == "dflt");
  CHECK(bool_or(cfg, "absent", true) == true);
  CHECK(number_list(cfg, "list") == std::vector<double>{1.0, 2.0});

  try {
    require_number(cfg, "missing_key");
    FAIL("expected an error");
  } catch (const UsageError& e) {
    CHECK(std::string(e.what()).find("missing_key") != std::string::npos);
  }
  cfg["neg"] = -1.0;
  CHECK_THROWS_AS(require_positive(cfg, "neg"), UsageError);
  CHECK_THROWS_AS(require_integer(cfg, "x"), UsageError);
  CHECK_THROWS_AS(require_string(cfg, "n"), UsageError);
  CHECK_THROWS_AS(number_list(cfg, "name"), UsageError);
}

TEST_CASE("test function expressions evaluate correctly") {
  const TestFunction f = parse_test_function("0.5*const + 0.5*cos(1)", 1);
  const std::array<double, 3> u{0.2, 0.0, 0.0};
  CHECK(f(u) ==
        doctest::Approx(0.5 + 0.5 * std::cos(2 * M_PI * 0.2)).epsilon(1e-14));

  const TestFunction g = parse_test_function("sin(2) - 0.25*cos(1)", 1);
  CHECK(g(u) == doctest::Approx(std::sin(4 * M_PI * 0.2) -
                                0.25 * std::cos(2 * M_PI * 0.2))
                    .epsilon(1e-14));

  const TestFunction h2 = parse_test_function("cos(1,2)", 2);
  CHECK(h2({0.1, 0.3, 0.0}) ==
        doctest::Approx(std::cos(2 * M_PI * (0.1 + 2 * 0.3))).epsilon(1e-14));

  const TestFunction one = parse_test_function("1", 1);
  CHECK(one(u) == doctest::Approx(1.0));
  const TestFunction num = parse_test_function("0.25", 1);
  CHECK(num(u) == doctest::Approx(0.25));

  const TestFunction gauss = parse_test_function("gauss(0.5; 0.1)", 1);
  CHECK(gauss({0.5, 0.0, 0.0}) > gauss({0.2, 0.0, 0.0}));

  CHECK_THROWS_AS(parse_test_function("", 1), UsageError);
  CHECK_THROWS_AS(parse_test_function("tan(1)", 1), UsageError);
  CHECK_THROWS_AS(parse_test_function("cos(1,2)", 1), UsageError);
  CHECK_THROWS_AS(parse_test_function("gauss(0.5)", 1), UsageError);
  CHECK_THROWS_AS(parse_test_function("cos(x)", 1), UsageError);
}

TEST_CASE("dictionary parsing accepts the default and explicit lists") {
  std::vector<TestFunction> dict;
  std::vector<std::string> names;
  nlohmann::json cfg;
  cfg["dictionary"] = "default";
  parse_dictionary(cfg, 1, &dict, &names);
  CHECK(dict.size() == names.size());
  CHECK(dict.size() > 2);

  nlohmann::json cfg2;
  cfg2["dictionary"] = {"const", "cos(1)"};
  dict.clear();
  names.clear();
  parse_dictionary(cfg2, 1, &dict, &names);
  REQUIRE(dict.size() == 2);
  CHECK(names[1] == "cos(1)");
  CHECK(dict[1]({0.0, 0.0, 0.0}) == doctest::Approx(1.0));
}

TEST_CASE("environment blocks build validated specs") {
  nlohmann::json block;
  block["kind"] = "markov_flip";
  block["levels"] = {0.5, 2.0};
  block["flip_rate"] = 3.0;
  block["horizon"] = 2.0;
  const EnvironmentSpec spec = environment_from_config(block);
  CHECK(spec.kind == EnvironmentKind::markov_flip);
  CHECK(spec.levels == std::vector<double>{0.5, 2.0});
  CHECK(spec.flip_rate == 3.0);
  CHECK(spec.horizon == 2.0);

  block["kind"] = "no_such_kind";
  CHECK_THROWS_AS(environment_from_config(block), UsageError);
  block["kind"] = "markov_flip";
  block["flip_rate"] = -1.0;
  CHECK_THROWS_AS(environment_from_config(block), UsageError);
}

TEST_CASE("matrices from config are validated spd") {
  nlohmann::json m = nlohmann::json::array();
  m.push_back({2.0, 0.5});
  m.push_back({0.5, 2.0});
  const Eigen::MatrixXd sigma = matrix_from_config(m, 2, "sigma");
  CHECK(sigma(0, 1) == 0.5);
  CHECK_THROWS_AS(matrix_from_config(m, 1, "sigma"), UsageError);
  nlohmann::json bad = nlohmann::json::array();
  bad.push_back({1.0, 5.0});
  bad.push_back({5.0, 1.0});
  CHECK_THROWS(matrix_from_config(bad, 2, "sigma"));  // not positive-definite
}

TEST_CASE("experiment validation enforces the cross-cutting rules") {
  nlohmann::json ok;
  ok["seed"] = 3;
  ok["N"] = 16;
  ok["quad_tol"] = 1e-10;
  ok["nested"]["tolerance"] = 0.5;
  validate_experiment_config(ok);

  nlohmann::json no_seed = ok;
  no_seed.erase("seed");
  CHECK_THROWS_AS(validate_experiment_config(no_seed), UsageError);

  nlohmann::json bad_tol = ok;
  bad_tol["nested"]["tolerance"] = 0.0;
  CHECK_THROWS_AS(validate_experiment_config(bad_tol), UsageError);

  nlohmann::json small_n = ok;
  small_n["N"] = 2;
  CHECK_THROWS_AS(validate_experiment_config(small_n), UsageError);

  nlohmann::json list_n = ok;
  list_n["N"] = {16, 3};
  CHECK_THROWS_AS(validate_experiment_config(list_n), UsageError);
  list_n["N"] = {16, 32};
  validate_experiment_config(list_n);
}

TEST_CASE("hashing and formatting primitives are stable") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(hex64(0xcbf29ce484222325ull) == "cbf29ce484222325");
  CHECK(format_g17(0.1) == "0.10000000000000001");
  CHECK(format_g17(1.0) == "1");
  const double round_trip = std::stod(format_g17(2.0 / 3.0));
  CHECK(round_trip == 2.0 / 3.0);
}

TEST_CASE("csv writing is deterministic and checks widths") {
  const std::string path = "io_csv_test.csv";
  write_csv(path, {"a", "b"}, {{"1", "2"}, {"3", "4"}});
  CHECK(read_text(path) == "a,b\n1,2\n3,4\n");
  CHECK_THROWS_AS(write_csv(path, {"a", "b"}, {{"1"}}), UsageError);
}

TEST_CASE("manifests echo the canonical config and outputs") {
  RunManifest m;
  m.subcommand = "kernel";
  m.version = "1.0.0";
  m.config_hash = "deadbeef00000000";
  m.master_seed = 42;
  m.workers = 2;
  m.outputs = {"a.csv"};
  m.config = {{"seed", 42}};
  const nlohmann::json j = manifest_json(m);
  CHECK(j.at("schema").get<int>() == 1);
  CHECK(j.at("subcommand").get<std::string>() == "kernel");
  CHECK(j.at("master_seed").get<uint64_t>() == 42);
  CHECK(j.at("outputs").at(0).get<std::string>() == "a.csv");
  CHECK(j.at("config").at("seed").get<int>() == 42);
}
