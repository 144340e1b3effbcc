#include "dynssep/tightness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dynssep/errors.hpp"
#include "dynssep/hydro.hpp"
#include "dynssep/walks.hpp"

namespace dynssep {

void StepPath::validate() const {
  if (!(horizon > 0.0)) throw UsageError("step path: horizon must be > 0");
  if (times.size() != values.size())
    throw UsageError("step path: times/values out of step");
  double prev = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(times[i] > prev) || times[i] > horizon)
      throw UsageError(
          "step path: jump times must be strictly increasing in (0, T]");
    prev = times[i];
  }
}

double StepPath::at(double t) const {
  // Value on [times[i], times[i+1]) is values[i]; before the first jump it
  // is `initial`.
  const auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

double StepPath::left_limit(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return initial;
  return values[static_cast<std::size_t>(it - times.begin()) - 1];
}

StepPath step_path_from_samples(const std::vector<double>& t_grid,
                                const std::vector<double>& values) {
  if (t_grid.size() != values.size() || t_grid.empty())
    throw UsageError("step path: need equal, non-empty grids");
  StepPath z;
  z.horizon = t_grid.back();
  z.initial = values.front();
  double current = z.initial;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] == current) continue;
    z.times.push_back(t_grid[i]);
    z.values.push_back(values[i]);
    current = values[i];
  }
  z.validate();
  return z;
}

namespace {

// Sparse tables for O(1) range min/max over the piece values.
class RangeOsc {
 public:
  explicit RangeOsc(const std::vector<double>& v) : n_(v.size()) {
    int levels = 1;
    while ((std::size_t(1) << levels) <= n_) ++levels;
    mins_.assign(static_cast<std::size_t>(levels), v);
    maxs_.assign(static_cast<std::size_t>(levels), v);
    for (int k = 1; k < levels; ++k) {
      const std::size_t half = std::size_t(1) << (k - 1);
      for (std::size_t i = 0; i + (std::size_t(1) << k) <= n_; ++i) {
        mins_[k][i] = std::min(mins_[k - 1][i], mins_[k - 1][i + half]);
        maxs_[k][i] = std::max(maxs_[k - 1][i], maxs_[k - 1][i + half]);
      }
    }
  }

  // max − min over piece indices [a, b] inclusive.
  double osc(std::size_t a, std::size_t b) const {
    if (a >= b) return 0.0;
    const int k = 63 - __builtin_clzll(b - a + 1);
    const std::size_t half = b + 1 - (std::size_t(1) << k);
    return std::max(maxs_[k][a], maxs_[k][half]) -
           std::min(mins_[k][a], mins_[k][half]);
  }

 private:
  std::size_t n_;
  std::vector<std::vector<double>> mins_, maxs_;
};

}  // namespace

double modulus_w3(const StepPath& z, double delta) {
  z.validate();
  if (!(delta > 0.0) || delta >= z.horizon)
    throw UsageError("modulus_w3: need 0 < delta < horizon");

  const std::size_t J = z.times.size();
  // Piece values p_0..p_J; piece i starts at jump i (τ_i = times[i−1]).
  std::vector<double> p;
  p.reserve(J + 1);
  p.push_back(z.initial);
  for (double v : z.values) p.push_back(v);

  double w = std::abs(z.at(delta) - z.initial);
  w = std::max(w, std::abs(z.left_limit(z.horizon) - z.at(z.horizon - delta)));
  if (J == 0) return w;

  // The sup over (s,t) with t−s < δ reduces to windows of whole pieces
  // a..b (a = piece of s, b = piece of t−) with feasibility
  // τ_b − τ_{a+1} < δ, and the inner inf over split points is attained at
  // jump times: h(a,b) = min_{a<j≤b} max{osc(a..j−1), osc(j..b)}. h is
  // monotone in the window, so only the maximal b per a matters.
  const RangeOsc osc(p);
  // Largest piece index available as "piece of t−": a jump exactly at T
  // never becomes the left limit.
  const std::size_t b_cap = (z.times.back() < z.horizon) ? J : J - 1;
  for (std::size_t a = 0; a + 1 <= b_cap; ++a) {
    const double gate = z.times[a] + delta;  // τ_{a+1} + δ
    // Largest b with τ_b < τ_{a+1} + δ.
    std::size_t b =
        static_cast<std::size_t>(std::upper_bound(z.times.begin(),
                                                  z.times.end(), gate) -
                                 z.times.begin());
    // upper_bound counts τ ≤ gate; strict feasibility drops τ_b == gate.
    while (b > 0 && z.times[b - 1] >= gate) --b;
    b = std::min(b, b_cap);
    if (b < a + 1) continue;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = a + 1; j <= b; ++j)
      best = std::min(best, std::max(osc.osc(a, j - 1), osc.osc(j, b)));
    w = std::max(w, best);
  }
  return w;
}

TailEstimate conditional_tail_estimate(const std::vector<StepPath>& paths,
                                       double epsilon,
                                       const std::vector<double>& h_grid,
                                       int t_grid_size) {
  if (paths.empty()) throw UsageError("tail estimate: no paths");
  if (!(epsilon > 0.0)) throw UsageError("tail estimate: epsilon must be > 0");
  double T = paths.front().horizon;
  for (const auto& z : paths) T = std::min(T, z.horizon);

  TailEstimate out;
  out.h_grid = h_grid;
  out.low_replicas = paths.size() < 100;
  for (double h : h_grid) {
    if (h < 0.0 || h > T)
      throw UsageError("tail estimate: h outside [0, horizon]");
    double worst = 0.0;
    const int steps = std::max(1, t_grid_size - 1);
    for (int i = 0; i < t_grid_size; ++i) {
      const double t = (T - h) * i / steps;
      int count = 0;
      for (const auto& z : paths)
        if (std::abs(z.at(t + h) - z.at(t)) > epsilon) ++count;
      worst = std::max(worst, static_cast<double>(count) / paths.size());
    }
    out.psi_hat.push_back(worst);
  }
  return out;
}

PsiPhi psi_field_quantities(const ConductanceField& field,
                            const TestFunction& G,
                            const Eigen::MatrixXd& Sigma, double epsilon,
                            const std::vector<double>& h_grid, double T_macro,
                            int t_grid_size, int N_eps, double C_G_override,
                            double tol) {
  const Torus& torus = field.torus();
  const int N = torus.length();
  const double N2 = static_cast<double>(N) * N;
  if (!(epsilon > 0.0)) throw UsageError("psi: epsilon must be > 0");
  if (t_grid_size < 2) throw UsageError("psi: t-grid too small");
  if (N_eps < 1) throw UsageError("psi: N_eps must be >= 1");
  validate_sigma(Sigma, torus.dim());
  double h_max = 0.0;
  for (double h : h_grid) {
    if (h < 0.0) throw UsageError("psi: negative h");
    h_max = std::max(h_max, h);
  }
  if (field.horizon() < (T_macro + h_max) * N2 - 1e-9)
    throw UsageError("psi: field horizon too short for T + h_max");

  PsiPhi out;
  out.h_grid = h_grid;
  out.C_G = C_G_override > 0.0 ? C_G_override : field_bound_constant(G, torus);
  const double vol = std::pow(static_cast<double>(N),
                              static_cast<double>(torus.dim()));
  const double vol_eps = std::pow(static_cast<double>(N_eps),
                                  static_cast<double>(torus.dim()));
  const double pref_N = 4.0 * out.C_G / (epsilon * epsilon * vol);
  const double pref_eps = 4.0 * out.C_G / (epsilon * epsilon * vol_eps);

  // Macro evaluation grid: base points on [0, T] plus every base point
  // shifted by every h (so the (t, t+h') pairs of the increment sup appear
  // verbatim among the (s, t) pairs of the discrepancy sup), plus the
  // environment's own breakpoints (subsampled if abundant).
  std::vector<double> grid;
  for (int i = 0; i < t_grid_size; ++i)
    grid.push_back(T_macro * i / (t_grid_size - 1));
  const std::size_t base_count = grid.size();
  for (std::size_t i = 0; i < base_count; ++i)
    for (double h : h_grid)
      if (h > 0.0) grid.push_back(grid[i] + h);
  {
    const auto brk = field.merged_breakpoints(0.0, T_macro * N2);
    const std::size_t cap = 64;
    const std::size_t stride = std::max<std::size_t>(1, brk.size() / cap);
    for (std::size_t i = 0; i < brk.size(); i += stride)
      if (brk[i] / N2 <= T_macro) grid.push_back(brk[i] / N2);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  const Eigen::VectorXd sampled = sample_on_torus(G, torus);

  // Discrepancy sup for φ and the increment sups for 𝒵 in one pass over
  // start points: march S^N_{sN²,·N²}G across the grid.
  double phi_sup = 0.0;
  // increment_sup[j] = max over grid t of sup_x |G − S^N_{t,t+h_j}|.
  std::vector<double> increment_sup(h_grid.size(), 0.0);
  for (std::size_t si = 0; si < grid.size(); ++si) {
    const double s = grid[si];
    Eigen::VectorXd w = sampled;
    std::size_t hj = 0;
    for (std::size_t ti = si; ti < grid.size(); ++ti) {
      const double t = grid[ti];
      if (ti > si) w = semigroup_apply(field, grid[ti - 1] * N2, t * N2, w, tol);
      if (s <= T_macro) {
        const Eigen::VectorXd limit =
            sample_on_torus(heat_semigroup(G, Sigma, t - s), torus);
        phi_sup = std::max(phi_sup, (w - limit).lpNorm<Eigen::Infinity>());
      }
      // Does (s, t) realize an increment pair (t − s ∈ h_grid)?
      while (hj < h_grid.size() && h_grid[hj] < t - s - 1e-15) ++hj;
      if (s <= T_macro && hj < h_grid.size() &&
          std::abs(h_grid[hj] - (t - s)) <= 1e-12 * std::max(1.0, T_macro)) {
        increment_sup[hj] = std::max(
            increment_sup[hj], (sampled - w).lpNorm<Eigen::Infinity>());
      }
    }
  }
  out.phi_N = pref_N * phi_sup;

  // 𝒵 and ψ are running sups over h' ≤ h — monotone by construction.
  double running = 0.0;
  for (std::size_t j = 0; j < h_grid.size(); ++j) {
    running = std::max(running, increment_sup[j]);
    out.Z_h.push_back(running);
    out.psi_N.push_back(pref_N * running);
  }

  double running_limit = 0.0;
  for (double h : h_grid) {
    TestFunction diff = G;
    diff += -1.0 * heat_semigroup(G, Sigma, h);
    running_limit = std::max(running_limit, diff.sup_abs());
    out.psi_limit.push_back(pref_eps * running_limit);
  }
  return out;
}

std::vector<ExceedanceRow> t1_table(const std::vector<FieldTrajectory>& paths,
                                    const std::vector<double>& m_grid) {
  // Count exceedances per (N, G, t, m) over replicas.
  struct Key {
    int N;
    std::string g;
    bool operator<(const Key& o) const {
      return N != o.N ? N < o.N : g < o.g;
    }
  };
  std::vector<ExceedanceRow> rows;
  std::vector<std::pair<Key, std::vector<const FieldTrajectory*>>> groups;
  for (const auto& p : paths) {
    const Key k{p.N, p.g_name};
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const auto& g) { return !(g.first < k) && !(k < g.first); });
    if (it == groups.end()) {
      groups.push_back({k, {}});
      it = groups.end() - 1;
    }
    it->second.push_back(&p);
  }
  std::sort(groups.begin(), groups.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (const auto& [key, members] : groups) {
    const auto& t_grid = members.front()->t_grid;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      for (double m : m_grid) {
        int count = 0;
        for (const auto* p : members)
          if (std::abs(p->values[i]) > m) ++count;
        ExceedanceRow row;
        row.N = key.N;
        row.g_name = key.g;
        row.t = t_grid[i];
        row.m = m;
        row.probability = static_cast<double>(count) / members.size();
        rows.push_back(row);
      }
    }
  }
  return rows;
}

StepPath load_path_csv(const std::string& filename, double horizon) {
  std::ifstream in(filename);
  if (!in) throw UsageError("cannot open path file: " + filename);
  std::vector<double> ts, vs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b, ',')) continue;
    try {
      const double t = std::stod(a);
      const double v = std::stod(b);
      ts.push_back(t);
      vs.push_back(v);
    } catch (const std::exception&) {
      if (ts.empty()) continue;  // header row
      throw UsageError("malformed path row: " + line);
    }
  }
  if (ts.empty()) throw UsageError("path file has no data rows: " + filename);
  StepPath z = step_path_from_samples(ts, vs);
  if (horizon > 0.0) {
    if (horizon < z.horizon)
      throw UsageError("path file extends beyond the requested horizon");
    z.horizon = horizon;
  }
  z.validate();
  return z;
}

}  // namespace dynssep
