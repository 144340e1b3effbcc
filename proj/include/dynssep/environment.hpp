#pragma once
// Dynamic bond conductances: càdlàg piecewise-constant rates λ_t(b) per bond
// on a micro-time window [0, horizon], bounded 0 ≤ λ ≤ alpha.
//
// Storage is one breakpoint/value track per bond rather than a global grid ×
// bond table: a flip environment at hydrodynamic scale has ~10⁶ breakpoints
// across bonds, and the global product table would not fit in memory while
// the per-bond tracks are a few MB. The merged global grid (needed only for
// exact kernels on small lattices) is materialized on demand.
//
// Conventions:
//   rate_at(b, t)      value on the piece containing t (right-continuous;
//                      t = horizon returns the final piece's value)
//   rate_before(b, t)  left limit λ_{t−}; at t = 0 equals rate_at(b, 0)
//
// Extending the horizon of a sampled environment only appends randomness:
// the restriction of sample_environment(spec, ·, seed) to a shorter window
// is the field sampled with that shorter horizon (tested).

#include <cstdint>
#include <string>
#include <vector>

#include "dynssep/lattice.hpp"

namespace dynssep {

enum class EnvironmentKind {
  static_levels,            // time-constant; one level, or i.i.d. per bond
  piecewise_deterministic,  // global deterministic level schedule
  markov_flip,              // per-bond independent two-state flip chain
};

std::string environment_kind_name(EnvironmentKind);
EnvironmentKind environment_kind_from_name(const std::string&);

struct EnvironmentSpec {
  EnvironmentKind kind = EnvironmentKind::static_levels;
  std::vector<double> levels = {1.0};
  double flip_rate = 0.0;  // markov_flip: per-bond flip intensity
  double period = 1.0;     // piecewise_deterministic: window length (micro)
  double alpha = 0.0;      // dominating rate; 0 means max(levels)
  double horizon = 1.0;    // micro clock
  uint64_t seed = 0;       // environment sub-seed, folded into the stream key

  void validate() const;
  bool dynamic() const { return kind != EnvironmentKind::static_levels; }
  // static with a single level: the only case where Σ is known analytically
  bool homogeneous_static() const {
    return kind == EnvironmentKind::static_levels && levels.size() == 1;
  }
  double effective_alpha() const;
};

std::string environment_spec_json(const EnvironmentSpec&);
EnvironmentSpec environment_spec_from_json(const std::string&);

class ConductanceField {
 public:
  // times[b] starts at 0, strictly increasing, all < horizon;
  // values[b][i] is the rate on [times[b][i], times[b][i+1]) and the last
  // entry runs to the horizon.
  ConductanceField(const Torus& torus, double alpha, double horizon,
                   std::vector<std::vector<double>> times,
                   std::vector<std::vector<double>> values);

  static ConductanceField uniform(const Torus&, double level, double horizon);

  const Torus& torus() const { return torus_; }
  int bonds() const { return torus_.bonds(); }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }  // min realized rate
  bool elliptic() const { return beta_ > 0.0; }
  double horizon() const { return horizon_; }
  int max_track_length() const;

  double rate_at(int bond, double t) const;
  double rate_before(int bond, double t) const;
  // ∫_s^t λ_r(bond) dr, exact piecewise sum.
  double integral(int bond, double s, double t) const;

  const std::vector<double>& bond_times(int b) const { return times_[b]; }
  const std::vector<double>& bond_values(int b) const { return values_[b]; }

  // Ascending, first element s and last t, containing every track
  // breakpoint in (s, t).
  std::vector<double> merged_breakpoints(double s, double t) const;

  bool time_constant() const;  // no track has more than one piece

 private:
  void check_time(double t) const;

  Torus torus_;
  double alpha_, beta_, horizon_;
  std::vector<std::vector<double>> times_, values_;
};

ConductanceField sample_environment(const EnvironmentSpec&, const Torus&,
                                    uint64_t master_seed,
                                    double min_horizon = 0.0);

std::string field_json(const ConductanceField&);
ConductanceField field_from_json(const std::string&);

}  // namespace dynssep
