#include "dynssep/hydro.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dynssep/errors.hpp"
#include "dynssep/stats.hpp"
#include "dynssep/walks.hpp"

namespace dynssep {

double empirical_field(const Config& eta, const TestFunction& G,
                       const Torus& torus) {
  if (eta.size() != static_cast<std::size_t>(torus.sites()))
    throw std::invalid_argument(
        "empirical_field: configuration does not live on this lattice");
  if (G.dim() != torus.dim())
    throw std::invalid_argument("empirical_field: dimension mismatch");
  double acc = 0.0;
  for (int x = 0; x < torus.sites(); ++x)
    if (eta[static_cast<std::size_t>(x)]) acc += G(torus.macro(x));
  return acc / torus.sites();
}

double field_bound_constant(const TestFunction& G, const Torus& torus) {
  double acc = 0.0;
  for (int x = 0; x < torus.sites(); ++x) acc += std::abs(G(torus.macro(x)));
  return acc / torus.sites();
}

double heat_reference(const DensityProfile& rho, const Eigen::MatrixXd& Sigma,
                      const TestFunction& G, double t) {
  // Self-adjointness on the torus: ⟨ρ_t, G⟩ = ⟨ρ_•, 𝒮_t^Σ G⟩.
  return l2_pairing(rho.trig(), heat_semigroup(G, Sigma, t));
}

std::vector<double> reference_curve(const DensityProfile& rho,
                                    const Eigen::MatrixXd& Sigma,
                                    const TestFunction& G,
                                    const std::vector<double>& t_grid) {
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back(heat_reference(rho, Sigma, G, t));
  return out;
}

double weak_form_residual(const DensityProfile& rho, const TestFunction& G,
                          const Eigen::MatrixXd& Sigma,
                          const std::vector<double>& t_grid) {
  if (t_grid.empty()) return 0.0;
  const TestFunction LG = elliptic_apply(G, Sigma);
  const double base = heat_reference(rho, Sigma, G, t_grid.front());
  double integral = 0.0;
  double worst = 0.0;
  double prev_t = t_grid.front();
  double prev_f = heat_reference(rho, Sigma, LG, prev_t);
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    if (t < prev_t)
      throw std::invalid_argument("weak_form_residual: t-grid must ascend");
    const double f = heat_reference(rho, Sigma, LG, t);
    integral += 0.5 * (f + prev_f) * (t - prev_t);
    const double lhs = heat_reference(rho, Sigma, G, t);
    worst = std::max(worst, std::abs(lhs - base - integral));
    prev_t = t;
    prev_f = f;
  }
  return worst;
}

std::vector<Eigen::MatrixXd> walker_displacements(
    const ConductanceField& field, int start_site,
    const std::vector<double>& t_micro, int walkers, uint64_t master_seed,
    uint64_t id_offset) {
  const int d = field.torus().dim();
  std::vector<Eigen::MatrixXd> out(
      t_micro.size(), Eigen::MatrixXd::Zero(walkers, d));
  for (int w = 0; w < walkers; ++w) {
    const auto disp = simulate_walker(field, start_site, t_micro, master_seed,
                                      id_offset + static_cast<uint64_t>(w));
    for (std::size_t i = 0; i < t_micro.size(); ++i)
      for (int j = 0; j < d; ++j)
        out[i](w, j) = static_cast<double>(disp[i][static_cast<std::size_t>(j)]);
  }
  return out;
}

SigmaEstimate estimate_sigma(const EnvironmentSpec& spec, int dim, int N,
                             double T_macro, int walkers,
                             uint64_t master_seed) {
  if (walkers < 100)
    throw UsageError("estimate_sigma: needs at least 100 walkers");
  const Torus torus(dim, N);
  const double t_micro = T_macro * N * N;
  const ConductanceField field =
      sample_environment(spec, torus, master_seed, t_micro);

  const auto samples =
      walker_displacements(field, 0, {t_micro}, walkers, master_seed);
  // Rescaled displacement Y = disp/(N√T): Σ̂ = Cov(Y).
  Eigen::MatrixXd Y = samples[0] / (N * std::sqrt(T_macro));

  const Eigen::RowVectorXd mean = Y.colwise().mean();
  Eigen::MatrixXd centered = Y.rowwise() - mean;
  SigmaEstimate est;
  est.sigma = (centered.transpose() * centered) / (walkers - 1);
  est.sigma = 0.5 * (est.sigma + est.sigma.transpose()).eval();
  est.walkers = walkers;
  est.scale = N;
  est.t_macro = T_macro;
  est.elliptic = field.beta() > 0.0;

  // Blocked jackknife on the covariance entries.
  const int blocks = std::min(50, walkers);
  const Eigen::RowVectorXd total_sum = Y.colwise().sum();
  const Eigen::MatrixXd total_sq = Y.transpose() * Y;
  Eigen::MatrixXd jack_mean = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<Eigen::MatrixXd> jack(static_cast<std::size_t>(blocks));
  for (int b = 0; b < blocks; ++b) {
    const int lo = static_cast<int>(static_cast<int64_t>(b) * walkers / blocks);
    const int hi =
        static_cast<int>(static_cast<int64_t>(b + 1) * walkers / blocks);
    const auto block = Y.middleRows(lo, hi - lo);
    const Eigen::RowVectorXd s = total_sum - block.colwise().sum();
    const Eigen::MatrixXd q = total_sq - block.transpose() * block;
    const int m = walkers - (hi - lo);
    const Eigen::RowVectorXd mu = s / m;
    Eigen::MatrixXd cov = (q - m * mu.transpose() * mu) / (m - 1);
    cov = 0.5 * (cov + cov.transpose()).eval();
    jack[static_cast<std::size_t>(b)] = cov;
    jack_mean += cov;
  }
  jack_mean /= blocks;
  Eigen::MatrixXd var = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& cov : jack)
    var += (cov - jack_mean).cwiseProduct(cov - jack_mean);
  est.se = (var * (blocks - 1.0) / blocks).cwiseSqrt();

  const double top = est.sigma.diagonal().maxCoeff();
  est.degenerate = !(top > 0.0) ||
                   est.sigma.diagonal().minCoeff() < 1e-12 * std::max(top, 1.0);
  return est;
}

StartCheck arbitrary_start_check(const EnvironmentSpec& spec, int dim, int N,
                                 const std::array<double, 3>& u,
                                 const std::vector<double>& t_grid,
                                 int walkers, const Eigen::MatrixXd& Sigma,
                                 uint64_t master_seed, uint64_t id_offset) {
  validate_sigma(Sigma, dim);
  const Torus torus(dim, N);
  std::array<int, 3> coords{0, 0, 0};
  for (int j = 0; j < dim; ++j)
    coords[static_cast<std::size_t>(j)] =
        static_cast<int>(std::lround(u[static_cast<std::size_t>(j)] * N));
  const int start = torus.site(coords);

  double t_max = 0.0;
  for (double t : t_grid) t_max = std::max(t_max, t);
  const ConductanceField field =
      sample_environment(spec, torus, master_seed, t_max * N * N);

  std::vector<double> t_micro;
  t_micro.reserve(t_grid.size());
  for (double t : t_grid) t_micro.push_back(t * N * N);
  const auto samples = walker_displacements(field, start, t_micro, walkers,
                                            master_seed, id_offset);

  StartCheck out;
  out.t_grid = t_grid;
  out.walkers = walkers;
  out.start_site = start;
  out.elliptic_warning = !(field.beta() > 0.0);
  out.ks.resize(t_grid.size(), {0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    for (int j = 0; j < dim; ++j) {
      std::vector<double> xs(static_cast<std::size_t>(walkers));
      for (int w = 0; w < walkers; ++w) xs[static_cast<std::size_t>(w)] =
          samples[i](w, j) / N;
      const double sd = std::sqrt(std::max(0.0, t_grid[i] * Sigma(j, j)));
      out.ks[i][static_cast<std::size_t>(j)] =
          ks_distance_gaussian(xs, 0.0, sd);
    }
  }
  return out;
}

SemigroupErrors semigroup_errors(const ConductanceField& field,
                                 const TestFunction& G,
                                 const Eigen::MatrixXd& Sigma, double s_macro,
                                 double t_macro, double tol) {
  const Torus& torus = field.torus();
  const double N2 = static_cast<double>(torus.length()) * torus.length();
  const Eigen::VectorXd lattice = semigroup_apply(
      field, s_macro * N2, t_macro * N2, sample_on_torus(G, torus), tol);
  const Eigen::VectorXd limit =
      sample_on_torus(heat_semigroup(G, Sigma, t_macro - s_macro), torus);
  SemigroupErrors err;
  err.sup_error = (lattice - limit).lpNorm<Eigen::Infinity>();
  err.mean_error = (lattice - limit).lpNorm<1>() / torus.sites();
  return err;
}

std::vector<std::vector<VarianceCheck>> noise_variance_grid(
    const ConductanceField& field, const std::vector<TestFunction>& Gs,
    const Config& eta0, const std::vector<double>& t_grid_macro, int replicas,
    uint64_t master_seed) {
  const Torus& torus = field.torus();
  if (replicas < 2)
    throw UsageError("noise_variance_grid: replicas must be >= 2");
  const double N2 = static_cast<double>(torus.length()) * torus.length();
  std::vector<double> t_micro;
  for (double t : t_grid_macro) {
    if (t < 0) throw UsageError("noise_variance_grid: negative time");
    t_micro.push_back(t * N2);
  }

  // values[g][i][r] = X^N at grid time i for replica r.
  std::vector<std::vector<std::vector<double>>> values(
      Gs.size(), std::vector<std::vector<double>>(
                     t_grid_macro.size(),
                     std::vector<double>(static_cast<std::size_t>(replicas))));
  for (int r = 0; r < replicas; ++r) {
    const auto traj = stir_trajectory(field, eta0, master_seed,
                                      static_cast<uint64_t>(r), t_micro);
    for (std::size_t g = 0; g < Gs.size(); ++g)
      for (std::size_t i = 0; i < t_micro.size(); ++i)
        values[g][i][static_cast<std::size_t>(r)] =
            empirical_field(traj[i], Gs[g], torus);
  }

  std::vector<std::vector<VarianceCheck>> out(
      Gs.size(), std::vector<VarianceCheck>(t_grid_macro.size()));
  const double vol = std::pow(static_cast<double>(torus.length()),
                              static_cast<double>(torus.dim()));
  for (std::size_t g = 0; g < Gs.size(); ++g) {
    double sum_sq = 0.0;
    for (int x = 0; x < torus.sites(); ++x) {
      const double v = Gs[g](torus.macro(x));
      sum_sq += v * v;
    }
    const double bound = (1.0 / (2.0 * vol)) * (sum_sq / vol);
    for (std::size_t i = 0; i < t_grid_macro.size(); ++i) {
      const auto m = moments(values[g][i]);
      out[g][i].variance = m.var;
      out[g][i].se = m.se_var;
      out[g][i].bound = bound;
      out[g][i].replicas = replicas;
    }
  }
  return out;
}

VarianceCheck noise_variance_check(const ConductanceField& field,
                                   const TestFunction& G, const Config& eta0,
                                   double t_macro, int replicas,
                                   uint64_t master_seed) {
  return noise_variance_grid(field, {G}, eta0, {t_macro}, replicas,
                             master_seed)[0][0];
}

HydroResult hydro_experiment(const HydroSpec& spec) {
  if (spec.Ns.empty()) throw UsageError("hydro: need at least one N");
  if (spec.dictionary.empty()) throw UsageError("hydro: empty dictionary");
  if (spec.dictionary.size() != spec.dict_names.size())
    throw UsageError("hydro: dictionary names out of step");
  if (spec.t_grid.empty()) throw UsageError("hydro: empty t-grid");
  if (spec.replicas < 2) throw UsageError("hydro: replicas must be >= 2");
  validate_sigma(spec.sigma, spec.dim);
  const DensityProfile rho(spec.rho_trig);

  HydroResult result;
  for (int N : spec.Ns) {
    const Torus torus(spec.dim, N);
    const double N2 = static_cast<double>(N) * N;
    double t_max = 0.0;
    std::vector<double> t_micro;
    for (double t : spec.t_grid) {
      t_micro.push_back(t * N2);
      t_max = std::max(t_max, t);
    }
    // One quenched environment per scale; replicas vary clocks and initial
    // configurations only.
    const ConductanceField field =
        sample_environment(spec.env, torus, spec.master_seed, t_max * N2);

    std::vector<std::vector<double>> refs;  // per G, per t
    for (const auto& G : spec.dictionary)
      refs.push_back(reference_curve(rho, spec.sigma, G, spec.t_grid));

    std::vector<std::vector<double>> sups(
        spec.dictionary.size(),
        std::vector<double>(static_cast<std::size_t>(spec.replicas)));
    std::vector<std::vector<double>> abs_err(
        spec.dictionary.size(),
        std::vector<double>(spec.t_grid.size(), 0.0));

    for (int r = 0; r < spec.replicas; ++r) {
      const Config eta0 = random_config(rho, torus, spec.master_seed,
                                        static_cast<uint64_t>(r));
      const auto traj = stir_trajectory(field, eta0, spec.master_seed,
                                        static_cast<uint64_t>(r), t_micro);
      for (std::size_t g = 0; g < spec.dictionary.size(); ++g) {
        FieldTrajectory ft;
        ft.N = N;
        ft.g_name = spec.dict_names[g];
        ft.t_grid = spec.t_grid;
        ft.replica = static_cast<uint64_t>(r);
        double sup = 0.0;
        for (std::size_t i = 0; i < t_micro.size(); ++i) {
          const double x = empirical_field(traj[i], spec.dictionary[g], torus);
          ft.values.push_back(x);
          const double e = std::abs(x - refs[g][i]);
          sup = std::max(sup, e);
          abs_err[g][i] += e;
        }
        sups[g][static_cast<std::size_t>(r)] = sup;
        if (spec.keep_trajectories)
          result.trajectories.push_back(std::move(ft));
      }
    }

    for (std::size_t g = 0; g < spec.dictionary.size(); ++g) {
      HydroRow row;
      row.N = N;
      row.g_name = spec.dict_names[g];
      const auto m = moments(sups[g]);
      row.mean_sup_error = m.mean;
      row.se_sup_error = std::sqrt(m.var / spec.replicas);
      for (double delta : spec.deltas) {
        int count = 0;
        for (double s : sups[g])
          if (s > delta) ++count;
        row.exceedance.push_back(static_cast<double>(count) / spec.replicas);
      }
      for (std::size_t i = 0; i < spec.t_grid.size(); ++i)
        row.mean_error_per_t.push_back(abs_err[g][i] / spec.replicas);
      row.reference = refs[g];
      result.rows.push_back(std::move(row));
    }
  }
  return result;
}

DecayFit kernel_decay_fit(const ConductanceField& field, double s_macro,
                          double t_macro, double tol) {
  const Torus& torus = field.torus();
  const int N = torus.length();
  const double N2 = static_cast<double>(N) * N;
  const Eigen::MatrixXd P =
      kernel_forward(field, s_macro * N2, t_macro * N2, tol);

  const int r_max = torus.dim() * (N / 2);
  std::vector<double> best(static_cast<std::size_t>(r_max) + 1, 0.0);
  for (int x = 0; x < torus.sites(); ++x)
    for (int y = 0; y < torus.sites(); ++y) {
      const int r = torus.wrapped_l1(x, y);
      best[static_cast<std::size_t>(r)] =
          std::max(best[static_cast<std::size_t>(r)], P(x, y));
    }

  DecayFit fit;
  fit.scale = std::max(1.0 / N, std::sqrt(t_macro - s_macro));
  const double uniform = 1.0 / torus.sites();
  double lo = 1.0, hi = 0.0;
  for (int r = 0; r <= r_max; ++r) {
    const double p = best[static_cast<std::size_t>(r)];
    if (p <= 0.0) continue;
    fit.radii.push_back(static_cast<double>(r) / N);
    fit.max_p.push_back(p);
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  fit.saturated = hi < 10.0 * std::max(lo, uniform);

  // Fit only the strictly super-uniform part of the tail.
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < fit.radii.size(); ++i) {
    if (fit.max_p[i] < 1.5 * uniform) continue;
    xs.push_back(fit.radii[i] / fit.scale);
    ys.push_back(std::log(fit.max_p[i]));
  }
  if (xs.size() >= 3 && !fit.saturated) {
    const auto lf = linear_fit(xs, ys);
    fit.slope = lf.slope;
    fit.amplitude = std::exp(lf.intercept);
    fit.r2 = lf.r2;
  } else {
    fit.saturated = true;
  }
  return fit;
}

HoelderFit hoelder_diagnostic(const ConductanceField& field,
                              const TestFunction& G, double s_macro,
                              double t_macro,
                              const std::vector<double>& h_grid,
                              int pair_stride, double tol) {
  const Torus& torus = field.torus();
  const int N = torus.length();
  const double N2 = static_cast<double>(N) * N;
  if (pair_stride < 1) throw UsageError("hoelder: pair stride must be >= 1");
  if (!(t_macro > s_macro)) throw UsageError("hoelder: needs t > s");

  const Eigen::VectorXd sampled = sample_on_torus(G, torus);
  const Eigen::VectorXd base =
      semigroup_apply(field, s_macro * N2, t_macro * N2, sampled, tol);
  const double root_ts = std::sqrt(t_macro - s_macro);

  std::vector<double> xs, ys;
  for (double h : h_grid) {
    Eigen::VectorXd shifted = base;
    if (h > 0.0)
      shifted =
          semigroup_apply(field, s_macro * N2, (t_macro + h) * N2, sampled, tol);
    for (int x = 0; x < torus.sites(); x += pair_stride)
      for (int y = 0; y < torus.sites(); y += pair_stride) {
        const double diff = std::abs(shifted[x] - base[y]);
        const double dist =
            static_cast<double>(torus.wrapped_l1(x, y)) / N;
        const double scale = std::max(std::sqrt(h), dist) / root_ts;
        if (diff < 1e-14 || scale <= 0.0) continue;
        xs.push_back(std::log(scale));
        ys.push_back(std::log(diff));
      }
  }
  HoelderFit fit;
  fit.points = static_cast<int>(xs.size());
  if (xs.size() >= 3) {
    const auto lf = linear_fit(xs, ys);
    fit.gamma = lf.slope;
    fit.r2 = lf.r2;
  }
  return fit;
}

}  // namespace dynssep
