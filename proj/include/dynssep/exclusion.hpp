#pragma once
// Exclusion dynamics by stirring. Every kept arrow of the graphical
// construction swaps the occupations at its bond's endpoints, which realizes
// the exclusion process jointly with the family of stirring walks on one
// probability space. Pathwise consequence used throughout the tests:
//
//   η_t(x) = η_0( backward walk from x over (0, t] )   exactly.
//
// The occupation field also solves the mild (Duhamel) equation
//   η_t = p̂_{0,t} η_0 + Σ_{jumps r ≤ t} p̂_{r,t} (η_r − η_{r−})
//                     − ∫_0^t p̂_{r,t} (A_r η_r) dr,
// with A_r the bond-Laplacian and p̂ the backward kernel; noise_integral
// evaluates the last two terms (the stochastic integral against the
// compensated jump measure) and mild_residuals the defect of the identity.
// Between jumps the integrand is analytic in r, so each inter-event segment
// is integrated by Gauss–Legendre with adaptive bisection.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "dynssep/environment.hpp"
#include "dynssep/graphical.hpp"
#include "dynssep/test_function.hpp"

namespace dynssep {

using Config = std::vector<uint8_t>;

// Independent Bernoulli(ρ(x/N)) occupations.
Config random_config(const DensityProfile& rho, const Torus&,
                     uint64_t master_seed, uint64_t replica);

int particle_count(const Config&);
Eigen::VectorXd config_vector(const Config&);

// Apply every kept arrow in (s, t] in time order.
void stir(Config&, const GraphicalRealization&, double s, double t);

// Occupation at t reconstructed from the initial data through the backward
// walks (no forward stirring).
Config occupation_via_duality(const Config& eta0, const GraphicalRealization&,
                              double t);

// Stream the kept arrows in (0, t_end] in time order without materializing
// the realization. Uses the same per-bond candidate clocks and thinning
// draws as build_graphical, so the visited sequence coincides exactly with
// the stored realization's (time, bond) list restricted to (0, t_end].
void stream_arrows(const ConductanceField&, uint64_t master_seed,
                   uint64_t replica, double t_end,
                   const std::function<void(double, int)>& visit);

// Occupations at the given ascending times (snapshot after all arrows ≤ τ),
// evolved by streaming.
std::vector<Config> stir_trajectory(const ConductanceField&, Config eta0,
                                    uint64_t master_seed, uint64_t replica,
                                    const std::vector<double>& record_times);

// Σ_{jumps r ≤ t} p̂_{r,t} Δη_r − ∫_0^t p̂_{r,t} A_r η_r dr, one entry per
// site. quad_tol bounds the total quadrature truncation.
Eigen::VectorXd noise_integral(const ConductanceField&,
                               const GraphicalRealization&, const Config& eta0,
                               double t, double quad_tol = 1e-10);

// Signed defect η_t − p̂_{0,t} η_0 − noise_integral, entrywise: zero up to
// quadrature error when the dynamics and the Duhamel form agree.
Eigen::VectorXd mild_residuals(const ConductanceField&,
                               const GraphicalRealization&, const Config& eta0,
                               double t, double quad_tol = 1e-10);

// E η_t(x) = (p̂_{0,t} η_0)(x), evaluated exactly through the semigroup.
Eigen::VectorXd mean_occupation_exact(const ConductanceField&,
                                      const Config& eta0, double t,
                                      double tol = 1e-12);

}  // namespace dynssep
