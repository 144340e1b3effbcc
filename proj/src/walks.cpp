#include "dynssep/walks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dynssep/errors.hpp"
#include "dynssep/rng.hpp"

namespace dynssep {

namespace {

// Crossing via the arrow on `bond`: the walker at an endpoint hops to the
// other end, everyone else stays put.
inline int cross(const Torus& torus, int pos, int bond) {
  const int base = torus.bond_base(bond);
  const int dir = torus.bond_dir(bond);
  const int other = torus.shift(base, dir, 1);
  if (pos == base) return other;
  if (pos == other) return base;
  return pos;
}

}  // namespace

int forward_position(const GraphicalRealization& real, int x, double s,
                     double t) {
  auto [lo, hi] = real.window(s, t);
  int pos = x;
  for (std::size_t i = lo; i < hi; ++i)
    pos = cross(real.torus, pos, real.merged[i].second);
  return pos;
}

int backward_position(const GraphicalRealization& real, int y, double s,
                      double t) {
  auto [lo, hi] = real.window(s, t);
  int pos = y;
  for (std::size_t i = hi; i-- > lo;)
    pos = cross(real.torus, pos, real.merged[i].second);
  return pos;
}

std::vector<int> forward_map(const GraphicalRealization& real, double s,
                             double t) {
  const int n = real.torus.sites();
  // where[x] = current position of the walker started at x.
  std::vector<int> where(n);
  for (int x = 0; x < n; ++x) where[x] = x;
  // at[p] = which walker currently sits at p (inverse of where).
  std::vector<int> at(n);
  for (int p = 0; p < n; ++p) at[p] = p;
  auto [lo, hi] = real.window(s, t);
  for (std::size_t i = lo; i < hi; ++i) {
    const int bond = real.merged[i].second;
    const int a = real.torus.bond_base(bond);
    const int b = real.torus.shift(a, real.torus.bond_dir(bond), 1);
    if (a == b) continue;  // cannot happen for L ≥ 2, but keep the swap safe
    const int wa = at[a], wb = at[b];
    at[a] = wb;
    at[b] = wa;
    where[wa] = b;
    where[wb] = a;
  }
  return where;
}

std::vector<int> backward_map(const GraphicalRealization& real, double s,
                              double t) {
  std::vector<int> fwd = forward_map(real, s, t);
  std::vector<int> inv(fwd.size());
  for (std::size_t x = 0; x < fwd.size(); ++x) inv[fwd[x]] = static_cast<int>(x);
  return inv;
}

Eigen::SparseMatrix<double> generator_matrix(const ConductanceField& field,
                                             double t, bool left_limit) {
  const Torus& torus = field.torus();
  const int n = torus.sites();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(4 * torus.dim() * n));
  for (int b = 0; b < field.bonds(); ++b) {
    const double lam = left_limit ? field.rate_before(b, t) : field.rate_at(b, t);
    if (lam == 0.0) continue;
    const int x = torus.bond_base(b);
    const int y = torus.shift(x, torus.bond_dir(b), 1);
    trip.emplace_back(x, y, lam);
    trip.emplace_back(y, x, lam);
    trip.emplace_back(x, x, -lam);
    trip.emplace_back(y, y, -lam);
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

Eigen::VectorXd generator_apply(const ConductanceField& field, double t,
                                const Eigen::VectorXd& f, bool left_limit) {
  const Torus& torus = field.torus();
  if (f.size() != torus.sites())
    throw std::invalid_argument("generator_apply: size mismatch");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(f.size());
  for (int b = 0; b < field.bonds(); ++b) {
    const double lam = left_limit ? field.rate_before(b, t) : field.rate_at(b, t);
    if (lam == 0.0) continue;
    const int x = torus.bond_base(b);
    const int y = torus.shift(x, torus.bond_dir(b), 1);
    const double d = lam * (f[y] - f[x]);
    out[x] += d;
    out[y] -= d;
  }
  return out;
}

GeneratorPiece make_piece(const ConductanceField& field, double t0,
                          double t1) {
  const Torus& torus = field.torus();
  const int n = torus.sites();
  GeneratorPiece piece;
  piece.t0 = t0;
  piece.t1 = t1;
  // Uniformization rate: total exit rate is Σ_{b ∋ x} λ(b) ≤ 2d·max λ.
  double max_rate = 0.0;
  for (int b = 0; b < field.bonds(); ++b)
    max_rate = std::max(max_rate, field.rate_at(b, t0));
  piece.rate = 2.0 * torus.dim() * max_rate;
  if (piece.rate > 0.0) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>((4 * torus.dim() + 1) * n));
    std::vector<double> diag(static_cast<std::size_t>(n), 1.0);
    for (int b = 0; b < field.bonds(); ++b) {
      const double w = field.rate_at(b, t0) / piece.rate;
      if (w == 0.0) continue;
      const int x = torus.bond_base(b);
      const int y = torus.shift(x, torus.bond_dir(b), 1);
      trip.emplace_back(x, y, w);
      trip.emplace_back(y, x, w);
      diag[static_cast<std::size_t>(x)] -= w;
      diag[static_cast<std::size_t>(y)] -= w;
    }
    for (int x = 0; x < n; ++x)
      trip.emplace_back(x, x, diag[static_cast<std::size_t>(x)]);
    piece.U.resize(n, n);
    piece.U.setFromTriplets(trip.begin(), trip.end());
  }
  return piece;
}

std::vector<GeneratorPiece> generator_pieces(const ConductanceField& field,
                                             double s, double t) {
  std::vector<GeneratorPiece> pieces;
  const std::vector<double> brk = field.merged_breakpoints(s, t);
  for (std::size_t j = 0; j + 1 < brk.size(); ++j)
    pieces.push_back(make_piece(field, brk[j], brk[j + 1]));
  return pieces;
}

namespace {

// Largest Λ·Δ handled in one uniformized chunk. Keeps e^{−ΛΔ} well above
// underflow and the series length ≈ ΛΔ + O(√ΛΔ).
constexpr double kMaxChunk = 64.0;

// Number of chunks each of size ≤ kMaxChunk covering mu = Λ·Δ.
inline int chunk_count(double mu) {
  return std::max(1, static_cast<int>(std::ceil(mu / kMaxChunk)));
}

// One uniformized chunk: B ← B · exp(mu (U − I)), truncated when the Poisson
// tail beyond the last term is ≤ tail_tol (entrywise bound: every partial
// product of row-stochastic factors has entries ≤ 1).
void chunk_right(Eigen::MatrixXd& B, const Eigen::SparseMatrix<double>& U,
                 double mu, double tail_tol) {
  Eigen::MatrixXd term = B;  // B · U^k · weight tracked incrementally
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(B.rows(), B.cols());
  double weight = std::exp(-mu);
  double mass = weight;
  sum = weight * term;
  for (int k = 1;; ++k) {
    term = term * U;  // row vector convention: (B U^{k})
    weight *= mu / k;
    mass += weight;
    sum.noalias() += weight * term;
    if (1.0 - mass <= tail_tol && k >= static_cast<int>(mu)) break;
    if (k > 20 * (mu + 10)) break;  // safety stop; guard catches the damage
  }
  B = std::move(sum);
}

// Same series for v ← exp(mu (U − I)) v; the Poisson tail bounds the error
// relative to ‖v‖∞ because ‖U^k v‖∞ ≤ ‖v‖∞.
void chunk_left(Eigen::VectorXd& v, const Eigen::SparseMatrix<double>& U,
                double mu, double tail_tol) {
  Eigen::VectorXd term = v;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(v.size());
  double weight = std::exp(-mu);
  double mass = weight;
  sum = weight * term;
  for (int k = 1;; ++k) {
    term = U * term;
    weight *= mu / k;
    mass += weight;
    sum.noalias() += weight * term;
    if (1.0 - mass <= tail_tol && k >= static_cast<int>(mu)) break;
    if (k > 20 * (mu + 10)) break;
  }
  v = std::move(sum);
}

}  // namespace

void exp_apply_right(Eigen::MatrixXd& B, const GeneratorPiece& piece, double dt,
                     double tail_tol) {
  if (dt <= 0.0 || piece.rate == 0.0) return;
  const double mu_total = piece.rate * dt;
  const int chunks = chunk_count(mu_total);
  const double mu = mu_total / chunks;
  const double per_chunk = std::max(tail_tol / chunks, 4e-16);
  for (int c = 0; c < chunks; ++c) chunk_right(B, piece.U, mu, per_chunk);
}

void exp_apply_left(Eigen::VectorXd& v, const GeneratorPiece& piece, double dt,
                    double tail_tol) {
  if (dt <= 0.0 || piece.rate == 0.0) return;
  const double mu_total = piece.rate * dt;
  const int chunks = chunk_count(mu_total);
  const double mu = mu_total / chunks;
  const double per_chunk = std::max(tail_tol / chunks, 4e-16);
  for (int c = 0; c < chunks; ++c) chunk_left(v, piece.U, mu, per_chunk);
}

namespace {

// Shared tail budget: spread tol over the total number of chunks across all
// pieces so the end-to-end truncation error stays ≤ tol.
double per_piece_budget(const std::vector<GeneratorPiece>& pieces, double tol) {
  int total_chunks = 0;
  for (const auto& piece : pieces) {
    if (piece.rate == 0.0) continue;
    total_chunks += chunk_count(piece.rate * (piece.t1 - piece.t0));
  }
  if (total_chunks == 0) return tol;
  return std::max(tol / total_chunks, 4e-16);
}

void check_row_stochastic(const Eigen::MatrixXd& P, double tol) {
  const double err =
      (P.rowwise().sum() - Eigen::VectorXd::Ones(P.rows())).lpNorm<Eigen::Infinity>();
  if (!(err <= 10.0 * tol))
    throw NumericalError("transition kernel row sums drifted beyond guard: " +
                         std::to_string(err));
  if (P.minCoeff() < -10.0 * tol)
    throw NumericalError("transition kernel has a negative entry");
}

}  // namespace

Eigen::MatrixXd kernel_forward(const ConductanceField& field, double s,
                               double t, double tol) {
  if (t < s) throw std::invalid_argument("kernel_forward: t < s");
  const int n = field.torus().sites();
  Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n);
  if (t == s) return P;
  const auto pieces = generator_pieces(field, s, t);
  const double budget = per_piece_budget(pieces, tol);
  for (const auto& piece : pieces)
    exp_apply_right(P, piece, piece.t1 - piece.t0, budget);
  check_row_stochastic(P, tol);
  return P;
}

Eigen::MatrixXd kernel_backward(const ConductanceField& field, double s,
                                double t, double tol) {
  // Every piece generator is symmetric, so the reversed-order product equals
  // the transpose of the forward product.
  return kernel_forward(field, s, t, tol).transpose();
}

Eigen::VectorXd semigroup_apply(const ConductanceField& field, double s,
                                double t, const Eigen::VectorXd& f,
                                double tol) {
  if (t < s) throw std::invalid_argument("semigroup_apply: t < s");
  Eigen::VectorXd v = f;
  if (t == s) return v;
  const auto pieces = generator_pieces(field, s, t);
  const double budget = per_piece_budget(pieces, tol);
  // (p_{s,t} f) = exp(Δ_1 A_1)·…·exp(Δ_m A_m) f applied right-to-left.
  for (std::size_t j = pieces.size(); j-- > 0;)
    exp_apply_left(v, pieces[j], pieces[j].t1 - pieces[j].t0, budget);
  return v;
}

Eigen::VectorXd semigroup_apply_backward(const ConductanceField& field,
                                         double s, double t,
                                         const Eigen::VectorXd& g, double tol) {
  if (t < s) throw std::invalid_argument("semigroup_apply_backward: t < s");
  Eigen::VectorXd v = g;
  if (t == s) return v;
  const auto pieces = generator_pieces(field, s, t);
  const double budget = per_piece_budget(pieces, tol);
  // p̂_{s,t} = p_{s,t}ᵀ = exp(Δ_m A_m)·…·exp(Δ_1 A_1) (each factor symmetric),
  // so the backward apply walks the pieces in forward time order.
  for (const auto& piece : pieces)
    exp_apply_left(v, piece, piece.t1 - piece.t0, budget);
  return v;
}

Eigen::MatrixXd empirical_kernel(const ConductanceField& field, double s,
                                 double t, int samples, uint64_t master_seed) {
  const int n = field.torus().sites();
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(n, n);
  for (int r = 0; r < samples; ++r) {
    const GraphicalRealization real =
        build_graphical(field, master_seed, static_cast<uint64_t>(r));
    const std::vector<int> where = forward_map(real, s, t);
    for (int x = 0; x < n; ++x) counts(x, where[x]) += 1.0;
  }
  return counts / static_cast<double>(samples);
}

std::vector<std::array<int64_t, 3>> simulate_walker(
    const ConductanceField& field, int start_site,
    const std::vector<double>& record_times, uint64_t master_seed,
    uint64_t walker_id) {
  const Torus& torus = field.torus();
  const int d = torus.dim();
  const double alpha = field.alpha();
  const double candidate_rate = 2.0 * d * alpha;
  Stream stream(master_seed, StreamPurpose::walker, walker_id, 0);

  std::array<int64_t, 3> disp = {0, 0, 0};
  int pos = start_site;
  double now = 0.0;
  std::vector<std::array<int64_t, 3>> out;
  out.reserve(record_times.size());
  std::size_t rec = 0;

  auto flush_until = [&](double t) {
    while (rec < record_times.size() && record_times[rec] <= t) {
      out.push_back(disp);
      ++rec;
    }
  };

  const double horizon =
      record_times.empty() ? 0.0 : record_times.back();
  if (candidate_rate == 0.0) {
    flush_until(horizon);
    while (rec < record_times.size()) {
      out.push_back(disp);
      ++rec;
    }
    return out;
  }

  while (now <= horizon) {
    const double wait = stream.exponential(candidate_rate);
    const double next = now + wait;
    // Which incident bond rang, and does the thinning keep it?
    const uint64_t pick = stream.below(static_cast<uint64_t>(2 * d));
    const double keep_u = stream.uniform_co();
    if (next > horizon) {
      flush_until(horizon);
      break;
    }
    flush_until(next);  // records strictly before the jump see the old site
    const int dir = static_cast<int>(pick) / 2;
    const int sign = (pick % 2 == 0) ? +1 : -1;
    // Bond between pos and its sign-neighbor in direction dir: the bond is
    // owned by whichever endpoint it points out of in the + direction.
    const int bond = (sign > 0) ? torus.bond(pos, dir)
                                : torus.bond(torus.shift(pos, dir, -1), dir);
    const double lam = field.rate_at(bond, next);
    if (keep_u * alpha < lam) {
      pos = torus.shift(pos, dir, sign);
      disp[static_cast<std::size_t>(dir)] += sign;
    }
    now = next;
  }
  while (rec < record_times.size()) {
    out.push_back(disp);
    ++rec;
  }
  return out;
}

}  // namespace dynssep
