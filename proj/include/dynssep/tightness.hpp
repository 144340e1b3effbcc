#pragma once
// Path-regularity diagnostics on the Skorokhod space D([0,T], ℝ).
//
// The central object is the δ-modulus w'''(δ) of a càdlàg path z:
//
//   w'''(δ) = max{ sup  inf  max{ osc(z, [s,r)), osc(z, [r,t)) },
//                  |z_δ − z_0|, |z_{T⁻} − z_{T−δ}| }
//
// with the sup over 0 ≤ s ≤ t ≤ T, t − s < δ and the inf over split points
// r ∈ (s, t): one jump per δ-window is free, anything more registers. On
// step paths both extrema are attained on the jump set, so the evaluation
// here is exact: the optimal split always sits at a jump time, a window of
// pieces (a..b) is δ-feasible iff τ_b − τ_{a+1} < δ, and the inner minimum
// over windows is monotone in the window, so only maximal feasible windows
// need scanning. Range oscillations come from sparse min/max tables —
// O(J·W) total for J jumps with W per δ-window (exhaustive; fine to ~10⁴
// jumps).
//
// Alongside: empirical increment-tail estimates ψ̂(h) over path ensembles,
// and the lattice/limit comparison quantities ψ_ε^N, 𝒵_h^N, C_G, ψ_ε, φ_ε^N
// tying the field increments to semigroup discrepancies.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "dynssep/environment.hpp"
#include "dynssep/test_function.hpp"

namespace dynssep {

struct StepPath {
  double horizon = 0.0;        // T
  double initial = 0.0;        // value on [0, first jump)
  std::vector<double> times;   // jump times, strictly increasing, in (0, T]
  std::vector<double> values;  // value on [times[i], next jump)

  double at(double t) const;         // càdlàg evaluation
  double left_limit(double t) const; // z_{t−}
  void validate() const;             // throws on malformed data
};

StepPath step_path_from_samples(const std::vector<double>& t_grid,
                                const std::vector<double>& values);

double modulus_w3(const StepPath& z, double delta);

// ψ̂(h) per h: max over the t-grid of the empirical frequency of
// |Z_{t+h} − Z_t| > ε across the path ensemble (the sup-over-t proxy for
// the conditional-increment bound; a valid lower bound on any a.s. bound).
struct TailEstimate {
  std::vector<double> h_grid;
  std::vector<double> psi_hat;
  bool low_replicas = false;  // < 100 paths: wide confidence bands
};

TailEstimate conditional_tail_estimate(const std::vector<StepPath>& paths,
                                       double epsilon,
                                       const std::vector<double>& h_grid,
                                       int t_grid_size = 64);

struct PsiPhi {
  double C_G = 0.0;
  std::vector<double> h_grid;
  std::vector<double> Z_h;        // sup_{t,h'≤h,x} |G − S^N G| per h
  std::vector<double> psi_N;      // (4C_G/ε²N^d)·Z_h
  std::vector<double> psi_limit;  // spectral counterpart at scale N_eps
  double phi_N = 0.0;             // (4C_G/ε²N^d)·sup dissimilarity
};

// All quantities from one field at scale N = field torus length; Sigma
// feeds the limit semigroup. C_G_override (> 0) pins the shared constant
// when comparing across scales; N_eps is the scale entering ψ_ε.
PsiPhi psi_field_quantities(const ConductanceField&, const TestFunction& G,
                            const Eigen::MatrixXd& Sigma, double epsilon,
                            const std::vector<double>& h_grid, double T_macro,
                            int t_grid_size, int N_eps,
                            double C_G_override = 0.0, double tol = 1e-12);

struct ExceedanceRow {
  int N = 0;
  std::string g_name;
  double t = 0.0;
  double m = 0.0;
  double probability = 0.0;
};

struct FieldTrajectory;  // hydro.hpp

// Empirical P(|X_t^N(G)| > m) per (N, t, m) from hydro trajectories;
// exactly 0 above the field bound C_G.
std::vector<ExceedanceRow> t1_table(const std::vector<FieldTrajectory>& paths,
                                    const std::vector<double>& m_grid);

// CSV import (time,value) with or without header; first row at time 0 sets
// the initial value.
StepPath load_path_csv(const std::string& filename, double horizon = 0.0);

}  // namespace dynssep
