#include "dynssep/exclusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>
#include <utility>

#include "dynssep/rng.hpp"
#include "dynssep/walks.hpp"

namespace dynssep {

Config random_config(const DensityProfile& rho, const Torus& torus,
                     uint64_t master_seed, uint64_t replica) {
  Stream stream(master_seed, StreamPurpose::initial, replica, 0);
  Config eta(static_cast<std::size_t>(torus.sites()), 0);
  for (int x = 0; x < torus.sites(); ++x) {
    const double p = rho(torus.macro(x));
    eta[static_cast<std::size_t>(x)] = stream.uniform_co() < p ? 1 : 0;
  }
  return eta;
}

int particle_count(const Config& eta) {
  int n = 0;
  for (uint8_t v : eta) n += v;
  return n;
}

Eigen::VectorXd config_vector(const Config& eta) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(eta.size()));
  for (std::size_t i = 0; i < eta.size(); ++i) v[static_cast<Eigen::Index>(i)] = eta[i];
  return v;
}

namespace {

inline void swap_endpoints(Config& eta, const Torus& torus, int bond) {
  const int a = torus.bond_base(bond);
  const int b = torus.shift(a, torus.bond_dir(bond), 1);
  std::swap(eta[static_cast<std::size_t>(a)], eta[static_cast<std::size_t>(b)]);
}

}  // namespace

void stir(Config& eta, const GraphicalRealization& real, double s, double t) {
  if (eta.size() != static_cast<std::size_t>(real.torus.sites()))
    throw std::invalid_argument("stir: configuration size mismatch");
  auto [lo, hi] = real.window(s, t);
  for (std::size_t i = lo; i < hi; ++i)
    swap_endpoints(eta, real.torus, real.merged[i].second);
}

Config occupation_via_duality(const Config& eta0,
                              const GraphicalRealization& real, double t) {
  const std::vector<int> origin = backward_map(real, 0.0, t);
  Config eta(eta0.size());
  for (std::size_t x = 0; x < eta.size(); ++x)
    eta[x] = eta0[static_cast<std::size_t>(origin[x])];
  return eta;
}

void stream_arrows(const ConductanceField& field, uint64_t master_seed,
                   uint64_t replica, double t_end,
                   const std::function<void(double, int)>& visit) {
  const double alpha = field.alpha();
  const int bonds = field.bonds();
  if (alpha == 0.0 || t_end <= 0.0) return;

  std::vector<Stream> streams;
  streams.reserve(static_cast<std::size_t>(bonds));
  for (int b = 0; b < bonds; ++b)
    streams.emplace_back(master_seed, StreamPurpose::clocks, replica,
                         static_cast<uint64_t>(b));

  // Next kept arrow per bond, or +inf once its clock passes t_end. Draw
  // order per candidate (waiting time, then thinning uniform) matches the
  // stored construction, so the emitted sequence is identical.
  std::vector<double> clock(static_cast<std::size_t>(bonds), 0.0);
  auto next_kept = [&](int b) -> double {
    double& t = clock[static_cast<std::size_t>(b)];
    Stream& stream = streams[static_cast<std::size_t>(b)];
    for (;;) {
      t += stream.exponential(alpha);
      const double keep_u = stream.uniform_co();
      if (t > t_end) return std::numeric_limits<double>::infinity();
      if (keep_u * alpha < field.rate_at(b, t)) return t;
    }
  };

  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  for (int b = 0; b < bonds; ++b) {
    const double t = next_kept(b);
    if (std::isfinite(t)) heap.emplace(t, b);
  }
  while (!heap.empty()) {
    const auto [t, b] = heap.top();
    heap.pop();
    visit(t, b);
    const double tn = next_kept(b);
    if (std::isfinite(tn)) heap.emplace(tn, b);
  }
}

std::vector<Config> stir_trajectory(const ConductanceField& field, Config eta0,
                                    uint64_t master_seed, uint64_t replica,
                                    const std::vector<double>& record_times) {
  if (eta0.size() != static_cast<std::size_t>(field.torus().sites()))
    throw std::invalid_argument("stir_trajectory: configuration size mismatch");
  for (std::size_t i = 0; i + 1 < record_times.size(); ++i)
    if (!(record_times[i] <= record_times[i + 1]))
      throw std::invalid_argument("stir_trajectory: record times must ascend");

  std::vector<Config> out;
  out.reserve(record_times.size());
  std::size_t rec = 0;
  const double t_end = record_times.empty() ? 0.0 : record_times.back();
  stream_arrows(field, master_seed, replica, t_end, [&](double t, int bond) {
    while (rec < record_times.size() && record_times[rec] < t) {
      out.push_back(eta0);
      ++rec;
    }
    swap_endpoints(eta0, field.torus(), bond);
  });
  while (rec < record_times.size()) {
    out.push_back(eta0);
    ++rec;
  }
  return out;
}

namespace {

// Gauss–Legendre nodes/weights of order 8 on [-1, 1] (positive half; the
// rule is symmetric).
constexpr std::array<double, 4> kGlNode = {
    0.18343464249564980494, 0.52553240991632898582, 0.79666647741362673959,
    0.96028985649753623168};
constexpr std::array<double, 4> kGlWeight = {
    0.36268378337836198297, 0.31370664587788728734, 0.22238103445337447054,
    0.10122853629037625915};

using VecFn = std::function<Eigen::VectorXd(double)>;

Eigen::VectorXd gl8(const VecFn& f, double a, double b) {
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  Eigen::VectorXd acc;
  for (std::size_t i = 0; i < 4; ++i) {
    const Eigen::VectorXd lo = f(mid - half * kGlNode[i]);
    const Eigen::VectorXd hi = f(mid + half * kGlNode[i]);
    if (acc.size() == 0) acc = Eigen::VectorXd::Zero(lo.size());
    acc.noalias() += kGlWeight[i] * (lo + hi);
  }
  return half * acc;
}

Eigen::VectorXd gl8_adaptive(const VecFn& f, double a, double b, double tol,
                             int depth) {
  const Eigen::VectorXd whole = gl8(f, a, b);
  const double mid = 0.5 * (a + b);
  const Eigen::VectorXd split = gl8(f, a, mid) + gl8(f, mid, b);
  if ((whole - split).lpNorm<Eigen::Infinity>() <= tol || depth >= 24)
    return split;
  return gl8_adaptive(f, a, mid, 0.5 * tol, depth + 1) +
         gl8_adaptive(f, mid, b, 0.5 * tol, depth + 1);
}

struct JumpEvent {
  double time;
  int site_a, site_b;
  double delta;  // η_{r−}(b) − η_{r−}(a); the swap adds ±delta at a / b
};

}  // namespace

Eigen::VectorXd noise_integral(const ConductanceField& field,
                               const GraphicalRealization& real,
                               const Config& eta0, double t, double quad_tol) {
  const Torus& torus = field.torus();
  const int n = torus.sites();
  if (eta0.size() != static_cast<std::size_t>(n))
    throw std::invalid_argument("noise_integral: configuration size mismatch");
  if (t < 0.0) throw std::invalid_argument("noise_integral: t < 0");

  // Forward pass: anchors = event times ∪ environment breakpoints in (0, t),
  // plus 0 and t; per segment the configuration and all rates are constant.
  auto [lo, hi] = real.window(0.0, t);
  std::vector<double> anchors = field.merged_breakpoints(0.0, t);
  for (std::size_t i = lo; i < hi; ++i) anchors.push_back(real.merged[i].first);
  std::sort(anchors.begin(), anchors.end());
  anchors.erase(std::unique(anchors.begin(), anchors.end()), anchors.end());

  Config eta = eta0;
  std::vector<JumpEvent> jumps;  // indexed like anchors; quiet anchors skipped
  jumps.reserve(hi - lo);
  std::vector<Eigen::VectorXd> drift(anchors.size() - 1);  // A_r η on segment
  {
    std::size_t ev = lo;
    for (std::size_t j = 0; j < anchors.size(); ++j) {
      const double r = anchors[j];
      while (ev < hi && real.merged[ev].first == r) {
        const int bond = real.merged[ev].second;
        const int a = torus.bond_base(bond);
        const int b = torus.shift(a, torus.bond_dir(bond), 1);
        JumpEvent jump;
        jump.time = r;
        jump.site_a = a;
        jump.site_b = b;
        jump.delta = static_cast<double>(eta[static_cast<std::size_t>(b)]) -
                     static_cast<double>(eta[static_cast<std::size_t>(a)]);
        jumps.push_back(jump);
        std::swap(eta[static_cast<std::size_t>(a)],
                  eta[static_cast<std::size_t>(b)]);
        ++ev;
      }
      if (j + 1 < anchors.size())
        drift[j] = generator_apply(field, anchors[j], config_vector(eta));
    }
  }

  // Backward pass: track Φ_r = p̂_{r,t} = p_{r,t}ᵀ, marched down from
  // Φ_t = I. Earlier piece factors multiply p_{r,t} on the left, hence Φ on
  // the right: Φ_u = Φ_v · exp((v−u)A) since every factor is symmetric.
  Eigen::MatrixXd phi = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd noise = Eigen::VectorXd::Zero(n);
  const std::size_t segments = anchors.size() - 1;
  const double seg_tol =
      std::max(quad_tol / static_cast<double>(std::max<std::size_t>(segments, 1)),
               4e-16);
  const double expm_tol = std::min(1e-13, seg_tol);

  std::size_t jump_idx = jumps.size();
  for (std::size_t j = segments; j-- > 0;) {
    const double u = anchors[j], v = anchors[j + 1];
    // Jumps sit at segment upper ends (the window is open at 0), and the
    // jump at time v is transported by Φ_v.
    while (jump_idx > 0 && jumps[jump_idx - 1].time == v) {
      const JumpEvent& jump = jumps[jump_idx - 1];
      noise.noalias() += jump.delta * (phi.col(jump.site_a) - phi.col(jump.site_b));
      --jump_idx;
    }
    // Rates are constant on (u, v): no breakpoint lies strictly inside.
    const GeneratorPiece piece = make_piece(field, u, v);

    // Compensator on (u, v): ∫ Φ_r c dr with c = A η constant on the
    // segment. Φ_r c = Φ_v exp((v−r)A) c, and the dense factor Φ_v commutes
    // with the quadrature sum.
    const Eigen::VectorXd& c = drift[j];
    if (c.lpNorm<Eigen::Infinity>() > 0.0) {
      const VecFn h = [&](double r) {
        Eigen::VectorXd w = c;
        exp_apply_left(w, piece, v - r, expm_tol);
        return w;
      };
      const Eigen::VectorXd integral = gl8_adaptive(h, u, v, seg_tol, 0);
      noise.noalias() -= phi * integral;
    }

    exp_apply_right(phi, piece, v - u, expm_tol);
  }
  return noise;
}

Eigen::VectorXd mild_residuals(const ConductanceField& field,
                               const GraphicalRealization& real,
                               const Config& eta0, double t, double quad_tol) {
  Config eta_t = eta0;
  stir(eta_t, real, 0.0, t);
  const Eigen::VectorXd lhs = config_vector(eta_t);
  const Eigen::VectorXd transported = semigroup_apply_backward(
      field, 0.0, t, config_vector(eta0), std::min(1e-13, quad_tol));
  const Eigen::VectorXd noise = noise_integral(field, real, eta0, t, quad_tol);
  return lhs - transported - noise;
}

Eigen::VectorXd mean_occupation_exact(const ConductanceField& field,
                                      const Config& eta0, double t,
                                      double tol) {
  return semigroup_apply_backward(field, 0.0, t, config_vector(eta0), tol);
}

}  // namespace dynssep
