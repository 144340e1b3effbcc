#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "dynssep/environment.hpp"
#include "dynssep/errors.hpp"
#include "dynssep/exclusion.hpp"
#include "dynssep/hydro.hpp"
#include "dynssep/lattice.hpp"
#include "dynssep/test_function.hpp"

using namespace dynssep;

namespace {

EnvironmentSpec uniform_spec(double level, double horizon) {
  EnvironmentSpec spec;
  spec.kind = EnvironmentKind::static_levels;
  spec.levels = {level};
  spec.horizon = horizon;
  return spec;
}

Eigen::MatrixXd scalar_sigma(int dim, double c) {
  return c * Eigen::MatrixXd::Identity(dim, dim);
}

}  // namespace

TEST_CASE("empirical field drops pure lattice harmonics of the full state") {
  const Torus torus(1, 64);
  const Config ones(64, 1);
  const TestFunction cos1 = TestFunction::harmonic(1, {1, 0, 0}, 1.0);
  CHECK(std::abs(empirical_field(ones, cos1, torus)) < 1e-12);
  CHECK(empirical_field(ones, TestFunction::constant(1, 1.0), torus) ==
        doctest::Approx(1.0).epsilon(1e-14));

  Config half(64, 0);
  for (int x = 0; x < 32; ++x) half[x] = 1;
  CHECK(empirical_field(half, TestFunction::constant(1, 1.0), torus) ==
        doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("field bound constant averages |G| on the lattice") {
  const Torus torus(1, 256);
  CHECK(field_bound_constant(TestFunction::constant(1, 1.0), torus) ==
        doctest::Approx(1.0).epsilon(1e-14));
  const TestFunction cos1 = TestFunction::harmonic(1, {1, 0, 0}, 1.0);
  // (1/N) Σ |cos(2πx/N)| → 2/π.
  CHECK(field_bound_constant(cos1, torus) ==
        doctest::Approx(2.0 / M_PI).epsilon(1e-3));
}

TEST_CASE("heat reference reproduces the closed-form mode decay") {
  const TestFunction cos1 = TestFunction::harmonic(1, {1, 0, 0}, 1.0);
  const DensityProfile rho(TestFunction::constant(1, 0.5) + 0.5 * cos1);
  const Eigen::MatrixXd sigma = scalar_sigma(1, 2.0);
  // ⟨ρ, S_t cos⟩ = (1/4)·exp(−(2π)²t) at Σ = 2.
  CHECK(heat_reference(rho, sigma, cos1, 0.01) ==
        doctest::Approx(0.16845636280785839).epsilon(1e-14));
  CHECK(heat_reference(rho, sigma, cos1, 0.0) ==
        doctest::Approx(0.25).epsilon(1e-14));
  CHECK(heat_reference(rho, sigma, TestFunction::constant(1, 1.0), 5.0) ==
        doctest::Approx(0.5).epsilon(1e-14));

  const std::vector<double> grid = {0.0, 0.01, 0.02};
  const auto curve = reference_curve(rho, sigma, cos1, grid);
  REQUIRE(curve.size() == 3);
  for (std::size_t i = 0; i < grid.size(); ++i)
    CHECK(curve[i] ==
          doctest::Approx(heat_reference(rho, sigma, cos1, grid[i])));
}

TEST_CASE("spectral solution satisfies the weak formulation") {
  const TestFunction cos1 = TestFunction::harmonic(1, {1, 0, 0}, 1.0);
  const DensityProfile rho(TestFunction::constant(1, 0.5) + 0.3 * cos1 +
                           0.15 * TestFunction::harmonic(1, {2, 0, 0}, 1.0));
  const Eigen::MatrixXd sigma = scalar_sigma(1, 2.0);
  std::vector<double> grid(2001);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.02 * i / 2000.0;
  CHECK(weak_form_residual(rho, cos1, sigma, grid) < 1e-6);
}

TEST_CASE("constant test functions see exact mass conservation") {
  const Torus torus(1, 32);
  EnvironmentSpec spec;
  spec.kind = EnvironmentKind::markov_flip;
  spec.levels = {0.5, 2.0};
  spec.flip_rate = 3.0;
  spec.horizon = 2.0;
  const ConductanceField f = sample_environment(spec, torus, 7);
  const DensityProfile rho(TestFunction::constant(1, 0.5));
  const Config eta0 = random_config(rho, torus, 3, 0);
  const TestFunction one = TestFunction::constant(1, 1.0);
  const auto traj = stir_trajectory(f, eta0, 3, 0, {0.5, 1.0, 2.0});
  const double mass0 = empirical_field(eta0, one, torus);
  for (const Config& eta : traj)
    CHECK(empirical_field(eta, one, torus) == doctest::Approx(mass0));
}

TEST_CASE("mean empirical field matches the exact expectation") {
  const Torus torus(1, 16);
  const ConductanceField f =
      sample_environment(uniform_spec(1.0, 1.3), torus, 0);
  const DensityProfile rho(TestFunction::constant(1, 0.5));
  const Config eta0 = random_config(rho, torus, 9, 0);
  const TestFunction cos1 = TestFunction::harmonic(1, {1, 0, 0}, 1.0);
  const double t_micro = 1.28;

  const Eigen::VectorXd mean = mean_occupation_exact(f, eta0, t_micro);
  double expect = 0.0;
  for (int x = 0; x < 16; ++x)
    expect += cos1(torus.macro(x)) * mean(x) / 16.0;

  const int replicas = 2000;
  double sum = 0.0, sumsq = 0.0;
  for (int r = 0; r < replicas; ++r) {
    Config eta = eta0;
    stir(eta, build_graphical(f, 15, uint64_t(r)), 0.0, t_micro);
    const double v = empirical_field(eta, cos1, torus);
    sum += v;
    sumsq += v * v;
  }
  const double mc = sum / replicas;
  const double se = std::sqrt(
      std::max(sumsq / replicas - mc * mc, 1e-12) / replicas);
  CHECK(std::abs(mc - expect) < 4.0 * se + 1e-4);
}

TEST_CASE("semigroup comparison vanishes in the exactly matched cases") {
  const Torus torus(1, 32);
  const ConductanceField f =
      sample_environment(uniform_spec(1.0, 10.4), torus, 0);
  const Eigen::MatrixXd sigma = scalar_sigma(1, 2.0);
  const TestFunction one = TestFunction::constant(1, 1.0);
  const SemigroupErrors trivial = semigroup_errors(f, one, sigma, 0.0, 0.01);
  CHECK(trivial.sup_error < 1e-12);

  const TestFunction cos1 = TestFunction::harmonic(1, {1, 0, 0}, 1.0);
  const SemigroupErrors at_zero = semigroup_errors(f, cos1, sigma, 0.005, 0.005);
  CHECK(at_zero.sup_error < 1e-12);

  const SemigroupErrors real_err = semigroup_errors(f, cos1, sigma, 0.0, 0.01);
  CHECK(real_err.sup_error > 0.0);
  CHECK(real_err.sup_error < 0.05);
  CHECK(real_err.mean_error <= real_err.sup_error + 1e-15);
}

TEST_CASE("walker displacement matrices start at zero and replay exactly") {
  const Torus torus(1, 16);
  const ConductanceField f =
      sample_environment(uniform_spec(1.0, 2.0), torus, 1);
  const auto rec = walker_displacements(f, 3, {0.0, 1.0, 2.0}, 50, 77);
  REQUIRE(rec.size() == 3);
  CHECK(rec[0].rows() == 50);
  CHECK(rec[0].cols() == 1);
  CHECK(rec[0].array().abs().maxCoeff() == 0.0);
  const auto again = walker_displacements(f, 3, {0.0, 1.0, 2.0}, 50, 77);
  CHECK((rec[2] - again[2]).array().abs().maxCoeff() == 0.0);
  const auto shifted = walker_displacements(f, 3, {0.0, 1.0, 2.0}, 50, 77, 50);
  CHECK((rec[2] - shifted[2]).array().abs().maxCoeff() != 0.0);
}

TEST_CASE("covariance estimation recovers the homogeneous diffusivity") {
  const SigmaEstimate est =
      estimate_sigma(uniform_spec(1.0, 1.0), 1, 16, 0.5, 2000, 5);
  CHECK_FALSE(est.degenerate);
  CHECK(est.elliptic);
  CHECK(est.walkers == 2000);
  CHECK(std::abs(est.sigma(0, 0) - 2.0) < 0.3);
  CHECK(est.se(0, 0) > 0.0);

  EnvironmentSpec dead = uniform_spec(0.0, 1.0);
  dead.alpha = 1.0;
  const SigmaEstimate zero = estimate_sigma(dead, 1, 16, 0.5, 200, 5);
  CHECK(zero.degenerate);
  CHECK_FALSE(zero.elliptic);
  CHECK(zero.sigma(0, 0) == doctest::Approx(0.0));

  CHECK_THROWS_AS(estimate_sigma(uniform_spec(1.0, 1.0), 1, 16, 0.5, 50, 5),
                  UsageError);
}

TEST_CASE("noise variance obeys the closed-form bound") {
  const Torus torus(1, 16);
  const ConductanceField f =
      sample_environment(uniform_spec(1.0, 1.3), torus, 2);
  const DensityProfile rho(TestFunction::constant(1, 0.5));
  const Config eta0 = random_config(rho, torus, 21, 0);
  const TestFunction cos1 = TestFunction::harmonic(1, {1, 0, 0}, 1.0);

  const VarianceCheck at_zero = noise_variance_check(f, cos1, eta0, 0.0, 200, 9);
  CHECK(at_zero.variance == doctest::Approx(0.0));

  const VarianceCheck vc = noise_variance_check(f, cos1, eta0, 0.005, 500, 9);
  double g2 = 0.0;
  for (int x = 0; x < 16; ++x) {
    const double gx = cos1(torus.macro(x));
    g2 += gx * gx / 16.0;
  }
  CHECK(vc.bound == doctest::Approx(g2 / (2.0 * 16.0)).epsilon(1e-12));
  CHECK(vc.variance <= vc.bound * (1.0 + 4.0 / std::sqrt(500.0)));
  CHECK(vc.replicas == 500);

  const auto grid = noise_variance_grid(f, {cos1, TestFunction::constant(1, 1.0)},
                                        eta0, {0.0, 0.005}, 100, 9);
  REQUIRE(grid.size() == 2);
  REQUIRE(grid[0].size() == 2);
  CHECK(grid[1][1].variance == doctest::Approx(0.0));  // mass is conserved
}

TEST_CASE("scaling experiment produces coherent rows and trajectories") {
  HydroSpec spec;
  spec.env = uniform_spec(1.0, 1.0);
  spec.dim = 1;
  spec.Ns = {8, 16};
  const TestFunction cos1 = TestFunction::harmonic(1, {1, 0, 0}, 1.0);
  spec.rho_trig = TestFunction::constant(1, 0.5) + 0.5 * cos1;
  spec.dictionary = {TestFunction::constant(1, 1.0), cos1};
  spec.dict_names = {"const", "cos1"};
  spec.t_grid = {0.01, 0.02};
  spec.replicas = 30;
  spec.deltas = {0.1};
  spec.sigma = scalar_sigma(1, 2.0);
  spec.master_seed = 19;
  spec.keep_trajectories = true;

  const HydroResult res = hydro_experiment(spec);
  REQUIRE(res.rows.size() == 4);
  const DensityProfile rho(spec.rho_trig);
  for (const HydroRow& row : res.rows) {
    REQUIRE(row.reference.size() == 2);
    REQUIRE(row.mean_error_per_t.size() == 2);
    REQUIRE(row.exceedance.size() == 1);
    CHECK(row.exceedance[0] >= 0.0);
    CHECK(row.exceedance[0] <= 1.0);
    CHECK(row.mean_sup_error >= 0.0);
    const TestFunction& g = row.g_name == "const" ? spec.dictionary[0] : cos1;
    for (std::size_t i = 0; i < row.reference.size(); ++i)
      CHECK(row.reference[i] ==
            doctest::Approx(heat_reference(rho, spec.sigma, g, spec.t_grid[i]))
                .epsilon(1e-12));
  }
  CHECK(res.rows[0].N == 8);
  CHECK(res.rows[3].N == 16);
  CHECK(res.trajectories.size() == 2 * 2 * 30);
  for (const FieldTrajectory& tr : res.trajectories) {
    REQUIRE(tr.values.size() == 2);
    CHECK(std::isfinite(tr.values[0]));
  }
}

TEST_CASE("kernel decay fit sees exponential off-diagonal decay") {
  const Torus torus(1, 32);
  const ConductanceField f =
      sample_environment(uniform_spec(1.0, 4.2), torus, 3);
  const DecayFit fit = kernel_decay_fit(f, 0.0, 0.004);
  CHECK((fit.saturated || fit.slope < 0.0));
  CHECK(fit.radii.size() == fit.max_p.size());
  CHECK(fit.max_p.front() > 0.0);
}

TEST_CASE("regularity diagnostic reports a usable exponent") {
  const Torus torus(1, 32);
  EnvironmentSpec spec;
  spec.kind = EnvironmentKind::markov_flip;
  spec.levels = {0.5, 2.0};
  spec.flip_rate = 1.0;
  spec.horizon = 14.4;
  const ConductanceField f = sample_environment(spec, torus, 5);
  const TestFunction cos1 = TestFunction::harmonic(1, {1, 0, 0}, 1.0);
  const HoelderFit fit =
      hoelder_diagnostic(f, cos1, 0.0, 0.01, {0.002, 0.004}, 4);
  CHECK(fit.points > 0);
  CHECK(fit.gamma > 0.0);
  CHECK(fit.gamma <= 1.5);
  CHECK(fit.r2 >= 0.0);
  CHECK(fit.r2 <= 1.0);
}

TEST_CASE("walker law is asymptotically the stated Gaussian") {
  const StartCheck check = arbitrary_start_check(
      uniform_spec(1.0, 1.0), 1, 32, {0.0, 0.0, 0.0}, {1.0}, 3000,
      scalar_sigma(1, 2.0), 11);
  REQUIRE(check.t_grid.size() == 1);
  CHECK(check.ks[0][0] < 0.1);
  CHECK_FALSE(check.elliptic_warning);
  CHECK(check.walkers == 3000);
}
