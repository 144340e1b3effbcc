#include "dynssep/environment.hpp"

#include <algorithm>
#include <cmath>

#include "dynssep/errors.hpp"
#include "dynssep/rng.hpp"
#include "json.hpp"

namespace dynssep {

std::string environment_kind_name(EnvironmentKind k) {
  switch (k) {
    case EnvironmentKind::static_levels: return "static";
    case EnvironmentKind::piecewise_deterministic: return "piecewise";
    case EnvironmentKind::markov_flip: return "markov_flip";
  }
  throw UsageError("environment kind: unknown enum value");
}

EnvironmentKind environment_kind_from_name(const std::string& s) {
  if (s == "static") return EnvironmentKind::static_levels;
  if (s == "piecewise") return EnvironmentKind::piecewise_deterministic;
  if (s == "markov_flip") return EnvironmentKind::markov_flip;
  throw UsageError("environment kind: expected static|piecewise|markov_flip, got \"" + s + "\"");
}

void EnvironmentSpec::validate() const {
  if (levels.empty()) throw UsageError("environment: levels must be non-empty");
  for (double v : levels)
    if (!(v >= 0.0)) throw UsageError("environment: levels must be >= 0");
  if (!(horizon > 0.0)) throw UsageError("environment: horizon must be > 0");
  const double mx = *std::max_element(levels.begin(), levels.end());
  if (alpha != 0.0 && alpha < mx)
    throw UsageError("environment: alpha must dominate every level");
  if (kind == EnvironmentKind::markov_flip) {
    if (levels.size() != 2)
      throw UsageError("environment: markov_flip takes exactly 2 levels");
    if (!(flip_rate > 0.0))
      throw UsageError("environment: markov_flip needs flip_rate > 0");
  }
  if (kind == EnvironmentKind::piecewise_deterministic && !(period > 0.0))
    throw UsageError("environment: piecewise needs period > 0");
  if (mx == 0.0) {
    // λ ≡ 0 is allowed (degenerate checks use it) but alpha must be positive
    // for the dominating clocks to make sense.
    if (alpha == 0.0)
      throw UsageError("environment: all-zero levels need explicit alpha > 0");
  }
}

double EnvironmentSpec::effective_alpha() const {
  if (alpha != 0.0) return alpha;
  return *std::max_element(levels.begin(), levels.end());
}

ConductanceField::ConductanceField(const Torus& torus, double alpha,
                                   double horizon,
                                   std::vector<std::vector<double>> times,
                                   std::vector<std::vector<double>> values)
    : torus_(torus),
      alpha_(alpha),
      horizon_(horizon),
      times_(std::move(times)),
      values_(std::move(values)) {
  if (!(alpha_ > 0.0)) throw UsageError("field: alpha must be > 0");
  if (!(horizon_ > 0.0)) throw UsageError("field: horizon must be > 0");
  if (int(times_.size()) != torus_.bonds() || values_.size() != times_.size())
    throw UsageError("field: need one track per bond");
  beta_ = alpha_;
  for (int b = 0; b < torus_.bonds(); ++b) {
    const auto& ts = times_[b];
    const auto& vs = values_[b];
    if (ts.empty() || ts.size() != vs.size())
      throw UsageError("field: malformed track on bond " + std::to_string(b));
    if (ts.front() != 0.0)
      throw UsageError("field: track must start at time 0");
    for (size_t i = 0; i < ts.size(); ++i) {
      if (i + 1 < ts.size() && !(ts[i] < ts[i + 1]))
        throw UsageError("field: track times must be strictly increasing");
      if (ts[i] >= horizon_ && i > 0)
        throw UsageError("field: track time beyond horizon");
      if (!(vs[i] >= 0.0) || vs[i] > alpha_ * (1.0 + 1e-12))
        throw UsageError("field: rate outside [0, alpha]");
      beta_ = std::min(beta_, vs[i]);
    }
  }
}

ConductanceField ConductanceField::uniform(const Torus& torus, double level,
                                           double horizon) {
  std::vector<std::vector<double>> ts(torus.bonds(), {0.0});
  std::vector<std::vector<double>> vs(torus.bonds(), {level});
  const double alpha = level > 0.0 ? level : 1.0;
  return ConductanceField(torus, alpha, horizon, std::move(ts), std::move(vs));
}

int ConductanceField::max_track_length() const {
  size_t mx = 0;
  for (const auto& t : times_) mx = std::max(mx, t.size());
  return int(mx);
}

void ConductanceField::check_time(double t) const {
  if (t < 0.0 || t > horizon_ * (1.0 + 1e-12))
    throw UsageError("field: time " + std::to_string(t) +
                     " outside [0, horizon]");
}

double ConductanceField::rate_at(int bond, double t) const {
  check_time(t);
  const auto& ts = times_[bond];
  // piece containing t: last breakpoint <= t
  const auto it = std::upper_bound(ts.begin(), ts.end(), t);
  return values_[bond][size_t(it - ts.begin()) - 1];
}

double ConductanceField::rate_before(int bond, double t) const {
  check_time(t);
  const auto& ts = times_[bond];
  if (t == 0.0) return values_[bond][0];
  // last breakpoint strictly below t
  const auto it = std::lower_bound(ts.begin(), ts.end(), t);
  const size_t idx = size_t(it - ts.begin());
  return values_[bond][idx > 0 ? idx - 1 : 0];
}

double ConductanceField::integral(int bond, double s, double t) const {
  check_time(s);
  check_time(t);
  if (t < s) throw UsageError("field: integral needs s <= t");
  const auto& ts = times_[bond];
  const auto& vs = values_[bond];
  double acc = 0.0;
  size_t i = size_t(std::upper_bound(ts.begin(), ts.end(), s) - ts.begin()) - 1;
  double left = s;
  for (; i < ts.size(); ++i) {
    const double right = (i + 1 < ts.size()) ? std::min(ts[i + 1], t) : t;
    if (right <= left) break;
    acc += vs[i] * (right - left);
    left = right;
    if (left >= t) break;
  }
  return acc;
}

std::vector<double> ConductanceField::merged_breakpoints(double s,
                                                         double t) const {
  check_time(s);
  check_time(t);
  if (t < s) throw UsageError("field: breakpoint window needs s <= t");
  std::vector<double> grid;
  grid.push_back(s);
  for (const auto& ts : times_) {
    auto lo = std::upper_bound(ts.begin(), ts.end(), s);
    auto hi = std::lower_bound(ts.begin(), ts.end(), t);
    grid.insert(grid.end(), lo, hi);
  }
  grid.push_back(t);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

bool ConductanceField::time_constant() const {
  for (const auto& t : times_)
    if (t.size() > 1) return false;
  return true;
}

ConductanceField sample_environment(const EnvironmentSpec& spec,
                                    const Torus& torus, uint64_t master_seed,
                                    double min_horizon) {
  spec.validate();
  const double horizon = std::max(spec.horizon, min_horizon);
  const double alpha = spec.effective_alpha();
  const int nb = torus.bonds();
  std::vector<std::vector<double>> ts(nb), vs(nb);

  switch (spec.kind) {
    case EnvironmentKind::static_levels: {
      for (int b = 0; b < nb; ++b) {
        ts[b] = {0.0};
        if (spec.levels.size() == 1) {
          vs[b] = {spec.levels[0]};
        } else {
          Stream rng(master_seed, StreamPurpose::environment, spec.seed, b);
          vs[b] = {spec.levels[rng.below(int(spec.levels.size()))]};
        }
      }
      break;
    }
    case EnvironmentKind::piecewise_deterministic: {
      // All bonds share the cyclic schedule levels[j mod k] on windows of
      // length `period`; deterministic, the seed is unused.
      std::vector<double> sched_t{0.0}, sched_v{spec.levels[0]};
      size_t j = 1;
      for (double t = spec.period; t < horizon; t += spec.period, ++j) {
        sched_t.push_back(t);
        sched_v.push_back(spec.levels[j % spec.levels.size()]);
      }
      for (int b = 0; b < nb; ++b) {
        ts[b] = sched_t;
        vs[b] = sched_v;
      }
      break;
    }
    case EnvironmentKind::markov_flip: {
      for (int b = 0; b < nb; ++b) {
        Stream rng(master_seed, StreamPurpose::environment, spec.seed, b);
        int state = rng.uniform_co() < 0.5 ? 0 : 1;
        ts[b].push_back(0.0);
        vs[b].push_back(spec.levels[state]);
        double t = 0.0;
        while (true) {
          t += rng.exponential(spec.flip_rate);
          if (t >= horizon) break;
          state = 1 - state;
          ts[b].push_back(t);
          vs[b].push_back(spec.levels[state]);
        }
      }
      break;
    }
  }
  return ConductanceField(torus, alpha, horizon, std::move(ts), std::move(vs));
}

std::string environment_spec_json(const EnvironmentSpec& s) {
  nlohmann::json j{{"kind", environment_kind_name(s.kind)},
                   {"levels", s.levels},
                   {"flip_rate", s.flip_rate},
                   {"period", s.period},
                   {"alpha", s.alpha},
                   {"horizon", s.horizon},
                   {"seed", s.seed}};
  return j.dump();
}

EnvironmentSpec environment_spec_from_json(const std::string& str) {
  const auto j = nlohmann::json::parse(str);
  EnvironmentSpec s;
  s.kind = environment_kind_from_name(j.at("kind").get<std::string>());
  s.levels = j.at("levels").get<std::vector<double>>();
  s.flip_rate = j.value("flip_rate", 0.0);
  s.period = j.value("period", 1.0);
  s.alpha = j.value("alpha", 0.0);
  s.horizon = j.at("horizon").get<double>();
  s.seed = j.value("seed", uint64_t(0));
  s.validate();
  return s;
}

std::string field_json(const ConductanceField& f) {
  nlohmann::json j;
  j["schema"] = 1;
  j["torus"] = {{"dim", f.torus().dim()}, {"L", f.torus().length()}};
  j["alpha"] = f.alpha();
  j["horizon"] = f.horizon();
  nlohmann::json tracks = nlohmann::json::array();
  for (int b = 0; b < f.torus().bonds(); ++b)
    tracks.push_back({{"t", f.bond_times(b)}, {"v", f.bond_values(b)}});
  j["tracks"] = std::move(tracks);
  return j.dump();
}

ConductanceField field_from_json(const std::string& str) {
  const auto j = nlohmann::json::parse(str);
  const Torus torus(j.at("torus").at("dim").get<int>(),
                    j.at("torus").at("L").get<int>());
  std::vector<std::vector<double>> ts, vs;
  for (const auto& tr : j.at("tracks")) {
    ts.push_back(tr.at("t").get<std::vector<double>>());
    vs.push_back(tr.at("v").get<std::vector<double>>());
  }
  return ConductanceField(torus, j.at("alpha").get<double>(),
                          j.at("horizon").get<double>(), std::move(ts),
                          std::move(vs));
}

}  // namespace dynssep
