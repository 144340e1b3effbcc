#include "dynssep/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "dynssep/config.hpp"
#include "dynssep/environment.hpp"
#include "dynssep/errors.hpp"
#include "dynssep/exclusion.hpp"
#include "dynssep/graphical.hpp"
#include "dynssep/hydro.hpp"
#include "dynssep/io.hpp"
#include "dynssep/rng.hpp"
#include "dynssep/tightness.hpp"
#include "dynssep/walks.hpp"

namespace dynssep {

namespace {

struct RunContext {
  nlohmann::json cfg;
  std::string out_dir;
  uint64_t seed = 0;
  int workers = 1;
  nlohmann::json summary;
  std::vector<std::string> outputs;
  std::vector<std::string> failures;  // violated --assert thresholds

  std::string path(const std::string& name) const {
    return out_dir + "/" + name;
  }
  void wrote(const std::string& full_path) { outputs.push_back(full_path); }
  void check(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

using Rows = std::vector<std::vector<std::string>>;

// Deterministic worker pool: results land in index-addressed slots, so the
// merged output is independent of scheduling.
void parallel_for(int n, int workers, const std::function<void(int)>& body) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  const int count = std::min(workers, n);
  for (int w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

std::string short_g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

std::vector<double> default_times(double horizon, int count) {
  std::vector<double> t;
  for (int i = 1; i <= count; ++i) t.push_back(horizon * i / count);
  return t;
}

int config_dim(const nlohmann::json& cfg) {
  const int dim = static_cast<int>(integer_or(cfg, "dim", 1));
  if (dim < 1 || dim > 3) throw UsageError("config: 'dim' must be 1..3");
  return dim;
}

// Σ for the hydro/tightness stages: explicit matrix, a sigma-stage
// artifact, or the closed form 2λ·I available only for the static
// homogeneous environment.
Eigen::MatrixXd resolve_sigma(RunContext& ctx, const EnvironmentSpec& spec,
                              int dim) {
  if (ctx.cfg.contains("sigma"))
    return matrix_from_config(ctx.cfg.at("sigma"), dim, "sigma");
  if (ctx.cfg.contains("sigma_artifact")) {
    const std::string file = require_string(ctx.cfg, "sigma_artifact");
    nlohmann::json art;
    try {
      art = nlohmann::json::parse(read_text(file));
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("sigma artifact " + file + ": invalid JSON: " +
                       e.what());
    }
    if (static_cast<int>(integer_or(art, "dim", 0)) != dim)
      throw UsageError("sigma artifact " + file + " has the wrong dimension");
    ctx.summary["sigma_artifact"] = file;
    return matrix_from_config(require_field(art, "sigma"), dim, "sigma");
  }
  if (spec.homogeneous_static()) {
    Eigen::MatrixXd sigma =
        2.0 * spec.levels.front() * Eigen::MatrixXd::Identity(dim, dim);
    ctx.summary["sigma_source"] = "closed_form_static";
    return sigma;
  }
  throw UsageError(
      "this environment is dynamic and has no closed-form diffusivity: run "
      "the `sigma` stage first and pass its artifact as 'sigma_artifact' "
      "(or supply an explicit 'sigma' matrix)");
}

// ---------------------------------------------------------------- env ----

void run_env(RunContext& ctx) {
  const int dim = config_dim(ctx.cfg);
  const int N = static_cast<int>(integer_or(ctx.cfg, "N", 16));
  const EnvironmentSpec spec =
      environment_from_config(require_field(ctx.cfg, "environment"));
  const Torus torus(dim, N);
  const ConductanceField field = sample_environment(spec, torus, ctx.seed);

  Rows rows;
  double total_integral = 0.0;
  for (int b = 0; b < field.bonds(); ++b) {
    const auto& vals = field.bond_values(b);
    const double lo = *std::min_element(vals.begin(), vals.end());
    const double hi = *std::max_element(vals.begin(), vals.end());
    const double integral = field.integral(b, 0.0, field.horizon());
    total_integral += integral;
    rows.push_back({std::to_string(b), std::to_string(vals.size()),
                    format_g17(lo), format_g17(hi), format_g17(integral)});
  }
  write_csv(ctx.path("bonds.csv"),
            {"bond", "pieces", "min_rate", "max_rate", "integral"}, rows);
  ctx.wrote(ctx.path("bonds.csv"));

  if (bool_or(ctx.cfg, "emit_field", torus.sites() <= 4096)) {
    write_text(ctx.path("environment.json"), field_json(field) + "\n");
    ctx.wrote(ctx.path("environment.json"));
  }

  ctx.summary["kind"] = environment_kind_name(spec.kind);
  ctx.summary["dim"] = dim;
  ctx.summary["N"] = N;
  ctx.summary["bonds"] = field.bonds();
  ctx.summary["alpha"] = field.alpha();
  ctx.summary["beta"] = field.beta();
  ctx.summary["elliptic"] = field.elliptic();
  ctx.summary["horizon"] = field.horizon();
  ctx.summary["time_constant"] = field.time_constant();
  ctx.summary["max_track_length"] = field.max_track_length();
  ctx.summary["total_integral"] = total_integral;
}

// ------------------------------------------------------------- kernel ----

void run_kernel(RunContext& ctx) {
  const int dim = config_dim(ctx.cfg);
  const int N = static_cast<int>(integer_or(ctx.cfg, "N", 16));
  const EnvironmentSpec spec =
      environment_from_config(require_field(ctx.cfg, "environment"));
  const double s = number_or(ctx.cfg, "s", 0.0);
  const double t = number_or(ctx.cfg, "t", spec.horizon);
  if (!(t > s) || s < 0.0)
    throw UsageError("config: need 0 <= s < t for the kernel window");
  const double r = number_or(ctx.cfg, "r", 0.5 * (s + t));
  if (r < s || r > t)
    throw UsageError("config: 'r' must lie in [s, t]");
  const double tol = number_or(ctx.cfg, "tol", 1e-10);
  const double ktol = number_or(ctx.cfg, "kernel_tol", 1e-12);

  const Torus torus(dim, N);
  const ConductanceField field = sample_environment(spec, torus, ctx.seed, t);
  const Eigen::MatrixXd K = kernel_forward(field, s, t, ktol);
  const int n = torus.sites();

  const double row_dev =
      (K.rowwise().sum() - Eigen::VectorXd::Ones(n)).cwiseAbs().maxCoeff();
  const double col_dev =
      (K.colwise().sum().transpose() - Eigen::VectorXd::Ones(n))
          .cwiseAbs()
          .maxCoeff();
  const Eigen::MatrixXd Ksr = kernel_forward(field, s, r, ktol);
  const Eigen::MatrixXd Krt = kernel_forward(field, r, t, ktol);
  const double ck_dev = (K - Ksr * Krt).cwiseAbs().maxCoeff();
  const double transpose_dev =
      (kernel_backward(field, s, t, ktol) - K.transpose())
          .cwiseAbs()
          .maxCoeff();
  Stream pairing_stream(ctx.seed, StreamPurpose::generic, 0, 0);
  Eigen::VectorXd f(n), g(n);
  for (int i = 0; i < n; ++i) {
    f(i) = pairing_stream.uniform_co();
    g(i) = pairing_stream.uniform_co();
  }
  const double pairing_dev =
      std::abs(f.dot(semigroup_apply(field, s, t, g, ktol)) -
               semigroup_apply_backward(field, s, t, f, ktol).dot(g));

  Rows checks = {
      {"row_sums", format_g17(row_dev), format_g17(tol)},
      {"column_sums", format_g17(col_dev), format_g17(tol)},
      {"composition", format_g17(ck_dev), format_g17(tol)},
      {"transpose_duality", format_g17(transpose_dev), format_g17(tol)},
      {"pairing", format_g17(pairing_dev), format_g17(tol)},
  };
  write_csv(ctx.path("checks.csv"), {"check", "deviation", "tol"}, checks);
  ctx.wrote(ctx.path("checks.csv"));

  if (bool_or(ctx.cfg, "emit_matrix", n <= 1024)) {
    Rows rows;
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        rows.push_back(
            {std::to_string(x), std::to_string(y), format_g17(K(x, y))});
    write_csv(ctx.path("kernel.csv"), {"from", "to", "p"}, rows);
    ctx.wrote(ctx.path("kernel.csv"));
  }

  double worst = 0.0;
  for (const auto& row : checks)
    worst = std::max(worst, std::stod(row[1]));
  ctx.summary["s"] = s;
  ctx.summary["t"] = t;
  ctx.summary["r"] = r;
  ctx.summary["max_deviation"] = worst;
  ctx.summary["tol"] = tol;
  ctx.check(worst <= tol, "kernel deviation " + format_g17(worst) +
                              " exceeds tol " + format_g17(tol));
}

// ------------------------------------------------------------ duality ----

void run_duality(RunContext& ctx) {
  const int dim = config_dim(ctx.cfg);
  const int N = static_cast<int>(integer_or(ctx.cfg, "N", 8));
  const int replicas = static_cast<int>(integer_or(ctx.cfg, "replicas", 100));
  if (replicas < 1) throw UsageError("config: 'replicas' must be >= 1");
  const EnvironmentSpec spec =
      environment_from_config(require_field(ctx.cfg, "environment"));
  const DensityProfile rho(
      parse_test_function(string_or(ctx.cfg, "rho", "0.5*const"), dim));
  std::vector<double> times = ctx.cfg.contains("times")
                                  ? number_list(ctx.cfg, "times")
                                  : default_times(spec.horizon, 10);
  std::sort(times.begin(), times.end());
  if (times.empty() || times.front() <= 0.0)
    throw UsageError("config: 'times' must be positive");

  const Torus torus(dim, N);
  const ConductanceField field =
      sample_environment(spec, torus, ctx.seed, times.back());

  std::vector<std::vector<long>> violations(
      replicas, std::vector<long>(times.size(), 0));
  parallel_for(replicas, ctx.workers, [&](int rep) {
    const GraphicalRealization real = build_graphical(field, ctx.seed, rep);
    const Config eta0 = random_config(rho, torus, ctx.seed, rep);
    Config eta = eta0;
    double prev = 0.0;
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      stir(eta, real, prev, times[ti]);
      prev = times[ti];
      const Config dual = occupation_via_duality(eta0, real, times[ti]);
      long bad = 0;
      for (int x = 0; x < torus.sites(); ++x)
        if (eta[x] != dual[x]) ++bad;
      violations[rep][ti] = bad;
    }
  });

  Rows rows;
  long total = 0;
  for (int rep = 0; rep < replicas; ++rep)
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      total += violations[rep][ti];
      rows.push_back({std::to_string(rep), format_g17(times[ti]),
                      std::to_string(violations[rep][ti])});
    }
  write_csv(ctx.path("duality.csv"), {"replica", "time", "violations"}, rows);
  ctx.wrote(ctx.path("duality.csv"));

  ctx.summary["replicas"] = replicas;
  ctx.summary["sites"] = torus.sites();
  ctx.summary["times"] = times;
  ctx.summary["violations"] = total;
  ctx.check(total == 0,
            "duality violations: " + std::to_string(total) + " (expected 0)");
}

// --------------------------------------------------------------- mild ----

void run_mild(RunContext& ctx) {
  const int dim = config_dim(ctx.cfg);
  const int N = static_cast<int>(integer_or(ctx.cfg, "N", 8));
  const int replicas = static_cast<int>(integer_or(ctx.cfg, "replicas", 20));
  const EnvironmentSpec spec =
      environment_from_config(require_field(ctx.cfg, "environment"));
  const DensityProfile rho(
      parse_test_function(string_or(ctx.cfg, "rho", "0.5*const"), dim));
  const double quad_tol = number_or(ctx.cfg, "quad_tol", 1e-10);
  const double bound = number_or(ctx.cfg, "residual_bound", 1e-8);
  std::vector<double> times = ctx.cfg.contains("times")
                                  ? number_list(ctx.cfg, "times")
                                  : default_times(spec.horizon, 3);
  std::sort(times.begin(), times.end());

  const Torus torus(dim, N);
  const ConductanceField field =
      sample_environment(spec, torus, ctx.seed, times.back());

  std::vector<std::vector<double>> sup(replicas,
                                       std::vector<double>(times.size(), 0.0));
  parallel_for(replicas, ctx.workers, [&](int rep) {
    const GraphicalRealization real = build_graphical(field, ctx.seed, rep);
    const Config eta0 = random_config(rho, torus, ctx.seed, rep);
    for (std::size_t ti = 0; ti < times.size(); ++ti)
      sup[rep][ti] = mild_residuals(field, real, eta0, times[ti], quad_tol)
                         .cwiseAbs()
                         .maxCoeff();
  });

  Rows rows;
  double worst = 0.0;
  for (int rep = 0; rep < replicas; ++rep)
    for (std::size_t ti = 0; ti < times.size(); ++ti) {
      worst = std::max(worst, sup[rep][ti]);
      rows.push_back({std::to_string(rep), format_g17(times[ti]),
                      format_g17(sup[rep][ti])});
    }
  write_csv(ctx.path("mild.csv"), {"replica", "time", "max_abs_residual"},
            rows);
  ctx.wrote(ctx.path("mild.csv"));

  ctx.summary["replicas"] = replicas;
  ctx.summary["times"] = times;
  ctx.summary["quad_tol"] = quad_tol;
  ctx.summary["max_residual"] = worst;
  ctx.summary["residual_bound"] = bound;
  ctx.check(worst <= bound, "mild-solution residual " + format_g17(worst) +
                                " exceeds " + format_g17(bound));
}

// -------------------------------------------------------------- sigma ----

void run_sigma(RunContext& ctx) {
  const int dim = config_dim(ctx.cfg);
  const int N = static_cast<int>(integer_or(ctx.cfg, "N", 50));
  const double T = number_or(ctx.cfg, "T", 1.0);
  const int walkers = static_cast<int>(integer_or(ctx.cfg, "walkers", 10000));
  const EnvironmentSpec spec =
      environment_from_config(require_field(ctx.cfg, "environment"));
  const SigmaEstimate est = estimate_sigma(spec, dim, N, T, walkers, ctx.seed);

  const std::string env_name = environment_kind_name(spec.kind);
  Rows rows;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      rows.push_back({env_name, std::to_string(i + 1) + std::to_string(j + 1),
                      format_g17(est.sigma(i, j)), format_g17(est.se(i, j))});
  write_csv(ctx.path("sigma.csv"), {"env", "entry_ij", "estimate", "stderr"},
            rows);
  ctx.wrote(ctx.path("sigma.csv"));

  nlohmann::json artifact;
  artifact["schema"] = 1;
  artifact["environment"] =
      nlohmann::json::parse(environment_spec_json(spec));
  artifact["dim"] = dim;
  artifact["N"] = N;
  artifact["T_macro"] = T;
  artifact["walkers"] = walkers;
  artifact["seed"] = ctx.seed;
  artifact["sigma"] = matrix_json(est.sigma);
  artifact["se"] = matrix_json(est.se);
  artifact["degenerate"] = est.degenerate;
  artifact["elliptic"] = est.elliptic;
  write_text(ctx.path("sigma.json"), artifact.dump(2) + "\n");
  ctx.wrote(ctx.path("sigma.json"));

  ctx.summary["sigma"] = matrix_json(est.sigma);
  ctx.summary["se"] = matrix_json(est.se);
  ctx.summary["degenerate"] = est.degenerate;
  ctx.summary["elliptic"] = est.elliptic;
  ctx.summary["walkers"] = walkers;
  ctx.check(!est.degenerate, "estimated diffusivity is degenerate");

  if (ctx.cfg.contains("expect_scalar")) {
    const double expect = require_positive(ctx.cfg, "expect_scalar");
    const double rel_tol = number_or(ctx.cfg, "expect_rel_tol", 0.05);
    double worst = 0.0;
    for (int i = 0; i < dim; ++i)
      for (int j = 0; j < dim; ++j) {
        const double target = i == j ? expect : 0.0;
        worst = std::max(worst, std::abs(est.sigma(i, j) - target) / expect);
      }
    ctx.summary["expect_scalar"] = expect;
    ctx.summary["max_relative_deviation"] = worst;
    ctx.check(worst <= rel_tol,
              "diffusivity off target by " + short_g(100 * worst) + "%");
  }
}

// -------------------------------------------------------------- hydro ----

void run_hydro(RunContext& ctx) {
  const int dim = config_dim(ctx.cfg);
  const EnvironmentSpec spec =
      environment_from_config(require_field(ctx.cfg, "environment"));
  HydroSpec hs;
  hs.env = spec;
  hs.dim = dim;
  hs.Ns = integer_list(ctx.cfg, "N");
  std::sort(hs.Ns.begin(), hs.Ns.end());
  hs.rho_trig = parse_test_function(require_string(ctx.cfg, "rho"), dim);
  parse_dictionary(ctx.cfg, dim, &hs.dictionary, &hs.dict_names);
  hs.t_grid = ctx.cfg.contains("t_grid")
                  ? number_list(ctx.cfg, "t_grid")
                  : std::vector<double>{0.01, 0.02, 0.03, 0.05};
  hs.replicas = static_cast<int>(integer_or(ctx.cfg, "replicas", 100));
  hs.deltas = ctx.cfg.contains("deltas")
                  ? number_list(ctx.cfg, "deltas")
                  : std::vector<double>{0.05, 0.1};
  hs.sigma = resolve_sigma(ctx, spec, dim);
  hs.master_seed = ctx.seed;
  hs.keep_trajectories = bool_or(ctx.cfg, "keep_trajectories", false);
  const HydroResult result = hydro_experiment(hs);

  Rows rows;
  for (const auto& row : result.rows) {
    for (std::size_t i = 0; i < hs.t_grid.size(); ++i) {
      rows.push_back({std::to_string(row.N), row.g_name,
                      format_g17(hs.t_grid[i]), "mean_abs_error",
                      format_g17(row.mean_error_per_t[i]), format_g17(0.0)});
      rows.push_back({std::to_string(row.N), row.g_name,
                      format_g17(hs.t_grid[i]), "reference",
                      format_g17(row.reference[i]), format_g17(0.0)});
    }
    rows.push_back({std::to_string(row.N), row.g_name,
                    format_g17(hs.t_grid.back()), "mean_sup_error",
                    format_g17(row.mean_sup_error),
                    format_g17(row.se_sup_error)});
    for (std::size_t di = 0; di < hs.deltas.size(); ++di)
      rows.push_back({std::to_string(row.N), row.g_name,
                      format_g17(hs.t_grid.back()),
                      "exceedance_" + short_g(hs.deltas[di]),
                      format_g17(row.exceedance[di]), format_g17(0.0)});
  }
  write_csv(ctx.path("hydro.csv"), {"N", "G", "t", "stat", "value", "stderr"},
            rows);
  ctx.wrote(ctx.path("hydro.csv"));

  if (hs.keep_trajectories) {
    Rows traj;
    for (const auto& p : result.trajectories)
      for (std::size_t i = 0; i < p.t_grid.size(); ++i)
        traj.push_back({std::to_string(p.replica), std::to_string(p.N),
                        p.g_name, format_g17(p.t_grid[i]),
                        format_g17(p.values[i])});
    write_csv(ctx.path("trajectories.csv"),
              {"replica", "N", "G", "t", "value"}, traj);
    ctx.wrote(ctx.path("trajectories.csv"));
  }

  // Convergence verdict per test function: strictly decreasing sup error.
  nlohmann::json per_g = nlohmann::json::object();
  for (const auto& name : hs.dict_names) {
    std::vector<double> errs;
    for (const auto& row : result.rows)
      if (row.g_name == name) errs.push_back(row.mean_sup_error);
    bool decreasing = errs.size() >= 2;
    for (std::size_t i = 1; i < errs.size(); ++i)
      if (!(errs[i] < errs[i - 1])) decreasing = false;
    per_g[name] = {{"mean_sup_error", errs}, {"decreasing", decreasing}};
    ctx.check(decreasing, "error for '" + name +
                              "' is not strictly decreasing across N");
    if (ctx.cfg.contains("final_error_max")) {
      const double cap = require_positive(ctx.cfg, "final_error_max");
      ctx.check(!errs.empty() && errs.back() <= cap,
                "final error for '" + name + "' above " + short_g(cap));
    }
  }
  ctx.summary["N"] = hs.Ns;
  ctx.summary["replicas"] = hs.replicas;
  ctx.summary["sigma"] = matrix_json(hs.sigma);
  ctx.summary["per_function"] = per_g;
}

// ---------------------------------------------------------- tightness ----

void run_tightness(RunContext& ctx) {
  const int dim = config_dim(ctx.cfg);
  const EnvironmentSpec spec =
      environment_from_config(require_field(ctx.cfg, "environment"));
  std::vector<int> Ns = integer_list(ctx.cfg, "N");
  std::sort(Ns.begin(), Ns.end());
  if (Ns.empty()) throw UsageError("config: 'N' must be non-empty");
  const TestFunction G =
      parse_test_function(string_or(ctx.cfg, "G", "cos(1)"), dim);
  const double epsilon = number_or(ctx.cfg, "epsilon", 0.1);
  const double T = number_or(ctx.cfg, "T", 0.5);
  std::vector<double> h_grid =
      ctx.cfg.contains("h_grid") ? number_list(ctx.cfg, "h_grid")
                                 : std::vector<double>{0.01, 0.02, 0.05, 0.1};
  std::sort(h_grid.begin(), h_grid.end());
  const int t_grid_size = static_cast<int>(integer_or(ctx.cfg, "t_grid_size", 9));
  const Eigen::MatrixXd sigma = resolve_sigma(ctx, spec, dim);
  const double h_max = h_grid.empty() ? 0.0 : h_grid.back();

  // One shared normalization across scales, taken at the finest lattice.
  const double C_shared =
      field_bound_constant(G, Torus(dim, Ns.back()));
  const int N_eps = Ns.front();

  Rows rows;
  std::vector<double> phis;
  for (int N : Ns) {
    const Torus torus(dim, N);
    const ConductanceField field = sample_environment(
        spec, torus, ctx.seed,
        (T + h_max) * static_cast<double>(N) * N + 1e-9);
    const PsiPhi q =
        psi_field_quantities(field, G, sigma, epsilon, h_grid, T, t_grid_size,
                             N_eps, C_shared);
    phis.push_back(q.phi_N);
    for (std::size_t j = 0; j < h_grid.size(); ++j)
      rows.push_back({std::to_string(N), format_g17(h_grid[j]),
                      format_g17(q.Z_h[j]), format_g17(q.psi_N[j]),
                      format_g17(q.psi_limit[j]), format_g17(q.phi_N)});
  }
  write_csv(ctx.path("psi_phi.csv"),
            {"N", "h", "Z_h", "psi_N", "psi_limit", "phi_N"}, rows);
  ctx.wrote(ctx.path("psi_phi.csv"));

  bool phi_decreasing = phis.size() >= 2;
  for (std::size_t i = 1; i < phis.size(); ++i)
    if (!(phis[i] < phis[i - 1])) phi_decreasing = false;
  ctx.summary["phi_N"] = phis;
  ctx.summary["phi_decreasing"] = phi_decreasing;
  ctx.summary["C_G"] = C_shared;
  if (Ns.size() >= 2)
    ctx.check(phi_decreasing, "phi is not strictly decreasing across N");

  // Rescaled-walk increment tails and the path modulus on sample paths.
  const int walkers = static_cast<int>(integer_or(ctx.cfg, "walkers", 200));
  if (walkers > 0) {
    const int N = Ns.back();
    const Torus torus(dim, N);
    const ConductanceField field = sample_environment(
        spec, torus, ctx.seed, T * static_cast<double>(N) * N + 1e-9);
    const int points = static_cast<int>(integer_or(ctx.cfg, "path_points", 64));
    std::vector<double> t_macro(points), t_micro(points);
    for (int i = 0; i < points; ++i) {
      t_macro[i] = T * i / (points - 1);
      t_micro[i] = t_macro[i] * N * N;
    }
    const auto frames =
        walker_displacements(field, 0, t_micro, walkers, ctx.seed);
    std::vector<StepPath> paths;
    for (int w = 0; w < walkers; ++w) {
      std::vector<double> vals(points);
      for (int i = 0; i < points; ++i)
        vals[i] = frames[i](w, 0) / static_cast<double>(N);
      paths.push_back(step_path_from_samples(t_macro, vals));
    }
    const TailEstimate tail =
        conditional_tail_estimate(paths, epsilon, h_grid);
    Rows trows;
    for (std::size_t j = 0; j < h_grid.size(); ++j)
      trows.push_back({format_g17(h_grid[j]), format_g17(tail.psi_hat[j])});
    write_csv(ctx.path("psi_hat.csv"), {"h", "psi_hat"}, trows);
    ctx.wrote(ctx.path("psi_hat.csv"));

    std::vector<double> deltas =
        ctx.cfg.contains("deltas") ? number_list(ctx.cfg, "deltas")
                                   : std::vector<double>{T / 8, T / 4};
    Rows wrows;
    const int shown = std::min<int>(walkers, 32);
    for (int w = 0; w < shown; ++w)
      for (double d : deltas)
        wrows.push_back({std::to_string(w), format_g17(d),
                         format_g17(modulus_w3(paths[w], d))});
    write_csv(ctx.path("w3.csv"), {"path", "delta", "w3"}, wrows);
    ctx.wrote(ctx.path("w3.csv"));

    bool nondecreasing = true;
    for (std::size_t j = 1; j < tail.psi_hat.size(); ++j)
      if (tail.psi_hat[j] < tail.psi_hat[j - 1]) nondecreasing = false;
    ctx.summary["psi_hat"] = tail.psi_hat;
    ctx.summary["psi_hat_nondecreasing"] = nondecreasing;
    ctx.summary["low_replicas"] = tail.low_replicas;
    ctx.check(nondecreasing, "psi_hat is not non-decreasing in h");
    if (ctx.cfg.contains("psi_first_max")) {
      const double cap = require_positive(ctx.cfg, "psi_first_max");
      ctx.check(!tail.psi_hat.empty() && tail.psi_hat.front() <= cap,
                "psi_hat at the smallest h exceeds " + short_g(cap));
    }
  }
}

// ----------------------------------------------------------- diagnose ----

void run_diagnose(RunContext& ctx) {
  const int dim = config_dim(ctx.cfg);
  const int N = static_cast<int>(integer_or(ctx.cfg, "N", 32));
  const EnvironmentSpec spec =
      environment_from_config(require_field(ctx.cfg, "environment"));
  const int replicas = static_cast<int>(integer_or(ctx.cfg, "replicas", 400));
  const double window = number_or(ctx.cfg, "window", 0.1);
  const double s = number_or(ctx.cfg, "s", 0.0);
  const double t = number_or(ctx.cfg, "t", 0.05);
  const TestFunction G =
      parse_test_function(string_or(ctx.cfg, "G", "cos(1)"), dim);
  const std::vector<double> h_grid =
      ctx.cfg.contains("h_grid") ? number_list(ctx.cfg, "h_grid")
                                 : std::vector<double>{0.002, 0.004, 0.008};
  const double h_max =
      h_grid.empty() ? 0.0 : *std::max_element(h_grid.begin(), h_grid.end());

  const Torus torus(dim, N);
  const ConductanceField field = sample_environment(
      spec, torus, ctx.seed,
      std::max(window, (t + h_max) * static_cast<double>(N) * N) + 1e-9);

  const PoissonCountStats counts = event_count_stats(field, replicas, ctx.seed);
  const double z_mean =
      counts.se_mean > 0 ? (counts.sample_mean - counts.expected) / counts.se_mean
                         : 0.0;
  const double z_var =
      counts.se_var > 0 ? (counts.sample_var - counts.expected) / counts.se_var
                        : 0.0;
  write_csv(ctx.path("counts.csv"),
            {"sample_mean", "sample_var", "expected", "z_mean", "z_var",
             "replicas"},
            {{format_g17(counts.sample_mean), format_g17(counts.sample_var),
              format_g17(counts.expected), format_g17(z_mean),
              format_g17(z_var), std::to_string(counts.replicas)}});
  ctx.wrote(ctx.path("counts.csv"));

  const IslandSurvey islands =
      island_radius_survey(field, window, replicas, ctx.seed);
  Rows irows;
  for (std::size_t n = 0; n < islands.tail.size(); ++n) {
    // Single-window chain bound for nearest-neighbor bonds at full rate.
    const double envelope =
        dim == 1 ? std::pow(1.0 - std::exp(-2.0 * field.alpha() * window),
                            static_cast<double>(n))
                 : 0.0;
    irows.push_back({std::to_string(n), format_g17(islands.tail[n]),
                     format_g17(islands.tail_se[n]), format_g17(envelope)});
  }
  write_csv(ctx.path("islands.csv"), {"radius", "tail", "se", "envelope"},
            irows);
  ctx.wrote(ctx.path("islands.csv"));

  const DecayFit decay = kernel_decay_fit(field, s, t);
  Rows drows;
  for (std::size_t i = 0; i < decay.radii.size(); ++i)
    drows.push_back(
        {format_g17(decay.radii[i]), format_g17(decay.max_p[i])});
  write_csv(ctx.path("decay.csv"), {"radius", "max_p"}, drows);
  ctx.wrote(ctx.path("decay.csv"));

  const HoelderFit hoelder = hoelder_diagnostic(
      field, G, s, t, h_grid,
      static_cast<int>(integer_or(ctx.cfg, "pair_stride", 1)));

  ctx.summary["count_z_mean"] = z_mean;
  ctx.summary["count_z_var"] = z_var;
  ctx.summary["chi_hat"] = islands.chi_hat;
  ctx.summary["island_fit_r2"] = islands.r2;
  ctx.summary["island_flagged"] = islands.flagged;
  ctx.summary["decay_slope"] = decay.slope;
  ctx.summary["decay_saturated"] = decay.saturated;
  ctx.summary["hoelder_gamma"] = hoelder.gamma;
  ctx.summary["hoelder_r2"] = hoelder.r2;
  ctx.summary["hoelder_points"] = hoelder.points;

  const double z_max = number_or(ctx.cfg, "count_z_max", 3.0);
  ctx.check(std::abs(z_mean) <= z_max,
            "event count mean off by " + short_g(z_mean) + " standard errors");
  ctx.check(std::abs(z_var) <= z_max,
            "event count variance off by " + short_g(z_var) +
                " standard errors");
  ctx.check(islands.flagged || islands.chi_hat > 0.0,
            "island tail decay rate is not positive");
  ctx.check(decay.saturated || decay.slope < 0.0,
            "kernel tail is not decaying");
}

// --------------------------------------------------------------- plot ----

std::pair<std::vector<std::string>, Rows> read_csv_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + path);
  std::vector<std::string> header;
  Rows rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (first) {
      header = cells;
      first = false;
    } else {
      rows.push_back(cells);
    }
  }
  if (first) throw UsageError("empty csv: " + path);
  return {header, rows};
}

void run_plot(RunContext& ctx) {
  const std::string kind = require_string(ctx.cfg, "kind");
  std::vector<std::string> header;
  if (kind == "hydro")
    header = {"N", "G", "t", "stat", "value", "stderr"};
  else if (kind == "sigma")
    header = {"env", "entry_ij", "estimate", "stderr"};
  else
    throw UsageError("config: plot kind must be \"hydro\" or \"sigma\"");

  Rows out_rows;
  if (ctx.cfg.contains("input")) {
    const std::string input = require_string(ctx.cfg, "input");
    const auto [in_header, in_rows] = read_csv_file(input);
    // Column presence by name; order normalized on output.
    std::vector<int> where;
    for (const auto& name : header) {
      const auto it = std::find(in_header.begin(), in_header.end(), name);
      if (it == in_header.end())
        throw UsageError("plot: input " + input + " is missing column '" +
                         name + "'");
      where.push_back(static_cast<int>(it - in_header.begin()));
    }
    for (const auto& row : in_rows) {
      std::vector<std::string> cells;
      for (int idx : where) {
        if (idx >= static_cast<int>(row.size()))
          throw UsageError("plot: short row in " + input);
        cells.push_back(row[idx]);
      }
      out_rows.push_back(cells);
    }
  }
  const std::string out = ctx.path("plot_" + kind + ".csv");
  write_csv(out, header, out_rows);
  ctx.wrote(out);
  ctx.summary["kind"] = kind;
  ctx.summary["rows"] = out_rows.size();
}

}  // namespace

int default_worker_count() {
  const char* env = std::getenv("DYNSSEP_WORKERS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n > 0 ? n : 1;
}

const std::vector<std::string>& subcommand_names() {
  static const std::vector<std::string> names = {
      "env",   "kernel",    "duality",  "mild", "sigma",
      "hydro", "tightness", "diagnose", "plot"};
  return names;
}

int run_subcommand(const std::string& name, const CliOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  try {
    RunContext ctx;
    if (opts.config_path.empty())
      throw UsageError("--config is required");
    ctx.cfg = load_config_file(opts.config_path);
    if (opts.seed) ctx.cfg["seed"] = *opts.seed;
    validate_experiment_config(ctx.cfg);
    ctx.seed = ctx.cfg.at("seed").get<uint64_t>();
    ctx.workers = opts.workers > 0 ? opts.workers : default_worker_count();
    ctx.out_dir = opts.out_dir.empty() ? "out" : opts.out_dir;
    std::filesystem::create_directories(ctx.out_dir);
    ctx.summary = nlohmann::json::object();

    if (name == "env") run_env(ctx);
    else if (name == "kernel") run_kernel(ctx);
    else if (name == "duality") run_duality(ctx);
    else if (name == "mild") run_mild(ctx);
    else if (name == "sigma") run_sigma(ctx);
    else if (name == "hydro") run_hydro(ctx);
    else if (name == "tightness") run_tightness(ctx);
    else if (name == "diagnose") run_diagnose(ctx);
    else if (name == "plot") run_plot(ctx);
    else
      throw UsageError("unknown subcommand '" + name + "'");

    ctx.summary["subcommand"] = name;
    ctx.summary["seed"] = ctx.seed;
    ctx.summary["assert_checks_failed"] = ctx.failures;
    write_text(ctx.path("summary.json"), ctx.summary.dump(2) + "\n");
    ctx.wrote(ctx.path("summary.json"));

    RunManifest manifest;
    manifest.subcommand = name;
    manifest.version = DYNSSEP_VERSION;
    manifest.config_hash = hex64(fnv1a64(canonical_dump(ctx.cfg)));
    manifest.master_seed = ctx.seed;
    manifest.workers = ctx.workers;
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    manifest.outputs = ctx.outputs;
    manifest.config = ctx.cfg;
    write_manifest(ctx.path("manifest.json"), manifest);

    for (const auto& f : ctx.failures)
      std::cerr << "check failed: " << f << "\n";
    if (!ctx.failures.empty() && opts.assert_mode) return 3;
    std::cout << name << ": wrote " << ctx.outputs.size() + 1
              << " files to " << ctx.out_dir << "\n";
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace dynssep
