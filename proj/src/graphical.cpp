#include "dynssep/graphical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dynssep/errors.hpp"
#include "dynssep/rng.hpp"
#include "dynssep/stats.hpp"

namespace dynssep {

std::pair<size_t, size_t> GraphicalRealization::window(double s,
                                                       double t) const {
  const auto lo = std::upper_bound(
      merged.begin(), merged.end(), s,
      [](double v, const std::pair<double, int>& e) { return v < e.first; });
  const auto hi = std::upper_bound(
      merged.begin(), merged.end(), t,
      [](double v, const std::pair<double, int>& e) { return v < e.first; });
  return {size_t(lo - merged.begin()), size_t(hi - merged.begin())};
}

GraphicalRealization build_graphical(const ConductanceField& field,
                                     uint64_t master_seed, uint64_t replica) {
  GraphicalRealization real(field.torus());
  real.horizon = field.horizon();
  const int nb = real.torus.bonds();
  const double alpha = field.alpha();
  real.bond_times.resize(nb);
  for (int b = 0; b < nb; ++b) {
    Stream rng(master_seed, StreamPurpose::clocks, replica, b);
    const auto& ts = field.bond_times(b);
    const auto& vs = field.bond_values(b);
    size_t cursor = 0;
    double t = 0.0;
    while (true) {
      t += rng.exponential(alpha);
      const double keep_u = rng.uniform_co();
      if (t > real.horizon) break;
      while (cursor + 1 < ts.size() && ts[cursor + 1] <= t) ++cursor;
      if (keep_u * alpha < vs[cursor]) real.bond_times[b].push_back(t);
    }
  }
  size_t total = 0;
  for (const auto& v : real.bond_times) total += v.size();
  real.merged.reserve(total);
  for (int b = 0; b < nb; ++b)
    for (double t : real.bond_times[b]) real.merged.emplace_back(t, b);
  std::sort(real.merged.begin(), real.merged.end());
  return real;
}

double compensator(const ConductanceField& field, int bond, double s,
                   double t) {
  return field.integral(bond, s, t);
}

namespace {

int uf_find(std::vector<int>& parent, int x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

void uf_union(std::vector<int>& parent, int a, int b) {
  a = uf_find(parent, a);
  b = uf_find(parent, b);
  if (a != b) parent[std::max(a, b)] = std::min(a, b);
}

}  // namespace

std::vector<int> active_islands(const GraphicalRealization& real, double s,
                                double t) {
  std::vector<int> parent(real.torus.sites());
  std::iota(parent.begin(), parent.end(), 0);
  for (int b = 0; b < real.torus.bonds(); ++b) {
    const auto& ts = real.bond_times[b];
    const auto lo = std::upper_bound(ts.begin(), ts.end(), s);
    if (lo != ts.end() && *lo <= t) {
      const auto [x, y] = real.torus.bond_sites(b);
      uf_union(parent, x, y);
    }
  }
  for (int x = 0; x < real.torus.sites(); ++x) parent[x] = uf_find(parent, x);
  return parent;
}

IslandSurvey island_radius_survey(const ConductanceField& field,
                                  double window_h, int replicas,
                                  uint64_t master_seed) {
  if (replicas < 1) throw UsageError("island survey: replicas must be >= 1");
  if (!(window_h > 0.0) || window_h > field.horizon())
    throw UsageError("island survey: window must lie in (0, horizon]");
  const Torus& torus = field.torus();
  const int max_r = torus.dim() * (torus.length() / 2);
  std::vector<int> radius_count(max_r + 1, 0);
  int spanning = 0;
  for (int r = 0; r < replicas; ++r) {
    // Restrict sampling to the window by building on a horizon-h copy of the
    // tracks; cheaper: build the full realization only up to window_h.
    GraphicalRealization real(torus);
    real.horizon = window_h;
    real.bond_times.resize(torus.bonds());
    for (int b = 0; b < torus.bonds(); ++b) {
      Stream rng(master_seed, StreamPurpose::clocks, r, b);
      const auto& ts = field.bond_times(b);
      const auto& vs = field.bond_values(b);
      size_t cursor = 0;
      double t = 0.0;
      while (true) {
        t += rng.exponential(field.alpha());
        const double keep_u = rng.uniform_co();
        if (t > window_h) break;
        while (cursor + 1 < ts.size() && ts[cursor + 1] <= t) ++cursor;
        if (keep_u * field.alpha() < vs[cursor]) real.bond_times[b].push_back(t);
      }
    }
    const auto comp = active_islands(real, 0.0, window_h);
    const int root0 = comp[0];
    int radius = 0;
    for (int y = 0; y < torus.sites(); ++y)
      if (comp[y] == root0) radius = std::max(radius, torus.wrapped_l1(0, y));
    radius_count[radius] += 1;
    if (radius >= torus.length() / 2) spanning += 1;
  }
  IslandSurvey out;
  out.replicas = replicas;
  out.window = window_h;
  out.tail.resize(max_r + 1);
  out.tail_se.resize(max_r + 1);
  int above = replicas;
  for (int n = 0; n <= max_r; ++n) {
    out.tail[n] = double(above) / replicas;
    out.tail_se[n] =
        std::sqrt(std::max(0.0, out.tail[n] * (1.0 - out.tail[n]) / replicas));
    above -= radius_count[n];
  }
  // log-linear tail fit over n >= 1 with enough mass for a stable log
  std::vector<double> xs, ys;
  for (int n = 1; n <= max_r; ++n) {
    if (out.tail[n] * replicas >= 5.0) {
      xs.push_back(n);
      ys.push_back(std::log(out.tail[n]));
    }
  }
  if (xs.size() >= 2) {
    const auto fit = linear_fit(xs, ys);
    out.chi_hat = -fit.slope;
    out.r2 = fit.r2;
  }
  out.flagged = (xs.size() < 2) || out.chi_hat <= 0.0 ||
                (2 * spanning >= replicas);
  return out;
}

PoissonCountStats event_count_stats(const ConductanceField& field,
                                    int replicas, uint64_t master_seed) {
  if (replicas < 2) throw UsageError("event count stats: replicas must be >= 2");
  std::vector<double> counts(replicas);
  for (int r = 0; r < replicas; ++r) {
    const auto real = build_graphical(field, master_seed, r);
    counts[r] = real.total_events();
  }
  PoissonCountStats st;
  st.replicas = replicas;
  for (int b = 0; b < field.torus().bonds(); ++b)
    st.expected += field.integral(b, 0.0, field.horizon());
  const auto m = moments(counts);
  st.sample_mean = m.mean;
  st.sample_var = m.var;
  st.se_mean = std::sqrt(m.var / replicas);
  st.se_var = m.se_var;
  return st;
}

nlohmann::json realization_json(const GraphicalRealization& real) {
  nlohmann::json j;
  j["schema"] = 1;
  j["torus"] = torus_json(real.torus);
  j["horizon"] = real.horizon;
  j["events"] = real.bond_times;
  return j;
}

GraphicalRealization realization_from_json(const nlohmann::json& j) {
  GraphicalRealization real(torus_from_json(j.at("torus")),
                            j.at("horizon").get<double>(), {});
  real.bond_times = j.at("events").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(real.bond_times.size()) != real.torus.bonds())
    throw UsageError("realization: need one event list per bond");
  for (int b = 0; b < real.torus.bonds(); ++b) {
    const auto& times = real.bond_times[static_cast<std::size_t>(b)];
    for (std::size_t i = 0; i < times.size(); ++i) {
      if (times[i] <= 0.0 || times[i] > real.horizon ||
          (i > 0 && times[i] <= times[i - 1]))
        throw UsageError("realization: event times must be strictly "
                         "increasing within (0, horizon]");
      real.merged.emplace_back(times[i], b);
    }
  }
  std::sort(real.merged.begin(), real.merged.end());
  return real;
}

}  // namespace dynssep
