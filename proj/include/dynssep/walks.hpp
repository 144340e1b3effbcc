#pragma once
// Random walks driven by the graphical arrows, and the exact transition
// kernels of the associated time-inhomogeneous chain.
//
// Pathwise walks. forward_position follows arrows in (s, t] in increasing
// time, crossing a bond whenever its arrow fires at the walker's position;
// backward_position traverses the same arrows in decreasing time. They are
// pathwise inverse: forward(x, s, t) = y  ⇔  backward(y, s, t) = x.
// forward_map/backward_map evaluate all starting points in one sweep by
// treating the arrows as transpositions.
//
// Kernels. p_{s,t} solves ∂_t p = p·A_t with A_t the bond-Laplacian
//   (A_t f)(x) = Σ_{b ∋ x} λ_t(b) (f(other end) − f(x)),
// piecewise constant between environment breakpoints. Per constant piece,
// exp(ΔA) is evaluated through the uniformized (Poisson-mixture) series
//   exp(ΔA) = Σ_k e^{−ΛΔ} (ΛΔ)^k/k! · U^k,  U = I + A/Λ,
// whose terms are entrywise nonnegative (no cancellation); long pieces are
// split so every chunk's Poisson tail meets its share of the tolerance.
// Row sums are checked against 1 to 10·tol on exit. Since every A_t is
// symmetric, each piece factor is symmetric and the backward kernel is the
// transpose of the forward one; the backward semigroup applies the same
// factors in opposite order.
//
// Dense kernels are meant for lattices up to a few thousand sites; the
// vector forms (semigroup_apply*) are O(sites · nnz) per series term and
// carry the large-N semigroup comparisons.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <array>
#include <cstdint>
#include <vector>

#include "dynssep/environment.hpp"
#include "dynssep/graphical.hpp"

namespace dynssep {

int forward_position(const GraphicalRealization&, int x, double s, double t);
int backward_position(const GraphicalRealization&, int y, double s, double t);

// map[x] = forward_position(x, s, t) for every x; backward_map is its
// inverse permutation (the all-sites backward lookup).
std::vector<int> forward_map(const GraphicalRealization&, double s, double t);
std::vector<int> backward_map(const GraphicalRealization&, double s, double t);

// Bond-Laplacian at time t; left_limit selects λ_{t−} (the generator the
// backward equation uses at breakpoints).
Eigen::SparseMatrix<double> generator_matrix(const ConductanceField&, double t,
                                             bool left_limit = false);
Eigen::VectorXd generator_apply(const ConductanceField&, double t,
                                const Eigen::VectorXd& f,
                                bool left_limit = false);

// One constant-rate piece, uniformized.
struct GeneratorPiece {
  double t0 = 0.0, t1 = 0.0;
  double rate = 0.0;               // uniformization rate Λ (0: generator is 0)
  Eigen::SparseMatrix<double> U;   // I + A/Λ, column-major, row-stochastic
};

// Piece over [t0, t1) built from the rates at t0 (they are constant there
// whenever [t0, t1) crosses no breakpoint).
GeneratorPiece make_piece(const ConductanceField&, double t0, double t1);

std::vector<GeneratorPiece> generator_pieces(const ConductanceField&, double s,
                                             double t);

// B ← B·exp(dt·A) and v ← exp(dt·A)·v to truncation tail ≤ tail_tol.
void exp_apply_right(Eigen::MatrixXd& B, const GeneratorPiece&, double dt,
                     double tail_tol);
void exp_apply_left(Eigen::VectorXd& v, const GeneratorPiece&, double dt,
                    double tail_tol);

Eigen::MatrixXd kernel_forward(const ConductanceField&, double s, double t,
                               double tol = 1e-12);
Eigen::MatrixXd kernel_backward(const ConductanceField&, double s, double t,
                                double tol = 1e-12);

// S_{s,t} f = p_{s,t}·f  and  Ŝ_{s,t} g = p̂_{s,t}·g = p_{s,t}ᵀ·g.
Eigen::VectorXd semigroup_apply(const ConductanceField&, double s, double t,
                                const Eigen::VectorXd& f, double tol = 1e-12);
Eigen::VectorXd semigroup_apply_backward(const ConductanceField&, double s,
                                         double t, const Eigen::VectorXd& g,
                                         double tol = 1e-12);

// Empirical p_{s,t} from `samples` independent realizations (row x: law of
// the forward walk started at x).
Eigen::MatrixXd empirical_kernel(const ConductanceField&, double s, double t,
                                 int samples, uint64_t master_seed);

// Direct per-walker simulation: candidate clock of rate 2d·alpha over the
// incident bonds, thinned by λ/alpha — the graphical construction restricted
// to the walker's trajectory, so equal in law to forward_position on a full
// realization (tested against the exact kernel). Records the unwrapped
// displacement at each requested micro time (ascending grid).
std::vector<std::array<int64_t, 3>> simulate_walker(
    const ConductanceField&, int start_site,
    const std::vector<double>& record_times, uint64_t master_seed,
    uint64_t walker_id);

}  // namespace dynssep
