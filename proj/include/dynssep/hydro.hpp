#pragma once
// Macroscopic side of the pipeline: empirical density fields
//
//   X_t^N(G) = N^{−d} Σ_x G(x/N) η_{tN²}(x),
//
// the exact spectral heat reference ⟨ρ_t^Σ, G⟩ on the unit torus, walker
// covariance estimation (the invariance-principle input Σ̂), semigroup
// convergence errors, the noise variance bound, and the scaling experiment
// that compares X^N against ρ^Σ across lattice sizes.
//
// Time convention: one macro unit = N² micro units. Every function below
// takes macro times and converts internally; the environment passed in must
// have been sampled with horizon ≥ t_max·N².

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dynssep/environment.hpp"
#include "dynssep/exclusion.hpp"
#include "dynssep/test_function.hpp"

namespace dynssep {

double empirical_field(const Config& eta, const TestFunction& G,
                       const Torus& torus);

// N^{−d} Σ_x |G(x/N)| — the a-priori bound on |X^N(G)|.
double field_bound_constant(const TestFunction& G, const Torus& torus);

// ⟨ρ_t^Σ, G⟩ = ⟨ρ_•, 𝒮_t^Σ G⟩, exact on the trig dictionary.
double heat_reference(const DensityProfile& rho, const Eigen::MatrixXd& Sigma,
                      const TestFunction& G, double t);

std::vector<double> reference_curve(const DensityProfile& rho,
                                    const Eigen::MatrixXd& Sigma,
                                    const TestFunction& G,
                                    const std::vector<double>& t_grid);

// Max over the grid of |⟨ρ_t,G⟩ − ⟨ρ_0,G⟩ − ∫_0^t ⟨ρ_s, ½∇·(Σ∇G)⟩ds| with
// the integral by trapezoid on the same grid: the defining weak form, used
// to validate the spectral solution against an independent quadrature.
double weak_form_residual(const DensityProfile& rho,
                          const TestFunction& G, const Eigen::MatrixXd& Sigma,
                          const std::vector<double>& t_grid);

// Unwrapped displacements (lattice units) of independent walkers started at
// start_site, one matrix (walkers × d) per requested micro time.
std::vector<Eigen::MatrixXd> walker_displacements(
    const ConductanceField&, int start_site,
    const std::vector<double>& t_micro, int walkers, uint64_t master_seed,
    uint64_t id_offset = 0);

struct SigmaEstimate {
  Eigen::MatrixXd sigma;      // d×d, symmetric
  Eigen::MatrixXd se;         // blocked-jackknife standard error per entry
  bool degenerate = false;    // some diagonal entry ≈ 0
  bool elliptic = true;       // inf rate > 0 on the sampled field
  int walkers = 0;
  int scale = 0;
  double t_macro = 0.0;
};

// Sample covariance of displacement/(N·√T_macro) over `walkers` independent
// realizations of the clocks on one quenched field.
SigmaEstimate estimate_sigma(const EnvironmentSpec&, int dim, int N,
                             double T_macro, int walkers,
                             uint64_t master_seed);

struct StartCheck {
  std::vector<double> t_grid;                 // macro
  std::vector<std::array<double, 3>> ks;      // per t, per coordinate
  bool elliptic_warning = false;
  int walkers = 0;
  int start_site = 0;
};

// Kolmogorov–Smirnov distances between the law of (X_{tN²} − x_N)/N per
// coordinate and the centered Gaussian with variance t·Sigma_jj, at
// x_N = round(N·u).
StartCheck arbitrary_start_check(const EnvironmentSpec&, int dim, int N,
                                 const std::array<double, 3>& u,
                                 const std::vector<double>& t_grid,
                                 int walkers, const Eigen::MatrixXd& Sigma,
                                 uint64_t master_seed,
                                 uint64_t id_offset = 0);

struct SemigroupErrors {
  double sup_error = 0.0;
  double mean_error = 0.0;
};

// sup_x and mean_x of |S^N_{sN²,tN²}G(x/N) − 𝒮^Σ_{t−s}G(x/N)| on the
// field's own lattice.
SemigroupErrors semigroup_errors(const ConductanceField&, const TestFunction& G,
                                 const Eigen::MatrixXd& Sigma, double s_macro,
                                 double t_macro, double tol = 1e-12);

struct VarianceCheck {
  double variance = 0.0;  // unbiased sample variance of X_t^N(G)
  double se = 0.0;        // standard error of the variance estimate
  double bound = 0.0;     // (1/2N^d)·N^{−d} Σ G(x/N)²
  int replicas = 0;
};

// Variance of X_t^N(G) over fresh clocks from a fixed initial configuration
// on a quenched field, against the closed-form bound; evaluated for every
// (G, t) pair on shared trajectories.
std::vector<std::vector<VarianceCheck>> noise_variance_grid(
    const ConductanceField&, const std::vector<TestFunction>& Gs,
    const Config& eta0, const std::vector<double>& t_grid_macro, int replicas,
    uint64_t master_seed);

VarianceCheck noise_variance_check(const ConductanceField&,
                                   const TestFunction& G, const Config& eta0,
                                   double t_macro, int replicas,
                                   uint64_t master_seed);

struct FieldTrajectory {
  int N = 0;
  std::string g_name;
  std::vector<double> t_grid;  // macro
  std::vector<double> values;  // X_t^N(G)
  uint64_t replica = 0;
};

struct HydroSpec {
  EnvironmentSpec env;
  int dim = 1;
  std::vector<int> Ns;
  TestFunction rho_trig{1};  // initial profile, validated to range [0,1]
  std::vector<TestFunction> dictionary;
  std::vector<std::string> dict_names;
  std::vector<double> t_grid;  // macro, first entry may be 0
  int replicas = 100;
  std::vector<double> deltas;  // exceedance thresholds
  Eigen::MatrixXd sigma;       // required (supplied or pre-estimated)
  uint64_t master_seed = 0;
  bool keep_trajectories = true;
};

struct HydroRow {
  int N = 0;
  std::string g_name;
  double mean_sup_error = 0.0;
  double se_sup_error = 0.0;
  std::vector<double> exceedance;       // per delta
  std::vector<double> mean_error_per_t; // mean |X_t − ref_t| per grid time
  std::vector<double> reference;        // ⟨ρ_t^Σ, G⟩ per grid time
};

struct HydroResult {
  std::vector<HydroRow> rows;  // ordered by (N, G)
  std::vector<FieldTrajectory> trajectories;
};

HydroResult hydro_experiment(const HydroSpec&);

struct DecayFit {
  double slope = 0.0;      // of ln max_{|x−y|₁=r} p against r_macro/scale
  double amplitude = 0.0;  // exp(intercept)
  double r2 = 0.0;
  double scale = 0.0;      // 1/N ∨ √(t−s), macro units
  bool saturated = false;  // tail flattened at the uniform level
  std::vector<double> radii;  // macro distances with any pair present
  std::vector<double> max_p;
};

DecayFit kernel_decay_fit(const ConductanceField&, double s_macro,
                          double t_macro, double tol = 1e-10);

struct HoelderFit {
  double gamma = 0.0;
  double r2 = 0.0;
  int points = 0;
};

// Log-log regression of |S^N_{sN²,(t+h)N²}G(x/N) − S^N_{sN²,tN²}G(y/N)|
// against (√h ∨ |x/N − y/N|)/√(t−s) over the h-grid and strided site pairs.
HoelderFit hoelder_diagnostic(const ConductanceField&, const TestFunction& G,
                              double s_macro, double t_macro,
                              const std::vector<double>& h_grid,
                              int pair_stride, double tol = 1e-12);

}  // namespace dynssep
