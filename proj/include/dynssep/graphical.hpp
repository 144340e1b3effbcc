#pragma once
// Harris graphical construction: one inhomogeneous Poisson arrow process per
// bond, realized by thinning a dominating homogeneous rate-alpha process —
// a candidate at time T is kept with probability λ_T(b)/alpha.
//
// The same arrow field drives every object downstream (walks, kernels Monte
// Carlo, stirring), which is what makes the duality checks exact rather
// than statistical. Event windows are half-open (s, t] throughout; arrows
// at distinct bonds with equal timestamps (never observed in practice, but
// well-defined) are ordered by bond index.
//
// Per-bond candidate streams draw alternately (waiting time, acceptance
// uniform), keyed (seed, clocks, replica, bond), so a realization is
// reproducible bond-by-bond regardless of construction order; the streaming
// stirring path in the exclusion module replays the identical draws.

#include <cstdint>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dynssep/environment.hpp"
#include "dynssep/lattice.hpp"

namespace dynssep {

struct GraphicalRealization {
  explicit GraphicalRealization(const Torus& t) : torus(t) {}
  GraphicalRealization(const Torus& t, double h,
                       std::vector<std::vector<double>> times)
      : torus(t), horizon(h), bond_times(std::move(times)) {}

  Torus torus;
  double horizon = 0.0;
  std::vector<std::vector<double>> bond_times;   // kept arrows, ascending
  std::vector<std::pair<double, int>> merged;    // (time, bond), sorted

  int total_events() const { return int(merged.size()); }

  // Index range of merged events with time in (s, t].
  std::pair<size_t, size_t> window(double s, double t) const;
};

GraphicalRealization build_graphical(const ConductanceField&,
                                     uint64_t master_seed, uint64_t replica);

// Exact replay across runs: bond index → kept-arrow time list.
nlohmann::json realization_json(const GraphicalRealization&);
GraphicalRealization realization_from_json(const nlohmann::json&);

// ∫_s^t λ_r(bond) dr — the thinned process's mean count on (s, t].
double compensator(const ConductanceField&, int bond, double s, double t);

// Connected components of the graph whose edges are bonds carrying at least
// one arrow in (s, t]; returns the component root per site (union-find).
std::vector<int> active_islands(const GraphicalRealization&, double s, double t);

struct IslandSurvey {
  std::vector<double> tail;     // tail[n] = P(radius of island(site 0) >= n)
  std::vector<double> tail_se;  // binomial standard errors
  double chi_hat = 0.0;         // -slope of ln tail[n] vs n
  double r2 = 0.0;
  bool flagged = false;         // no exponential fit: tail not decaying, or
                                // island spans the torus in most replicas
  int replicas = 0;
  double window = 0.0;
};

// Distribution of the wrapped-L¹ radius of the active island containing
// site 0 over `replicas` fresh realizations on the window (0, h].
IslandSurvey island_radius_survey(const ConductanceField&, double window_h,
                                  int replicas, uint64_t master_seed);

struct PoissonCountStats {
  double sample_mean = 0.0;
  double sample_var = 0.0;
  double expected = 0.0;  // Σ_b ∫_0^T λ_b — mean AND variance of the total
  double se_mean = 0.0;
  double se_var = 0.0;
  int replicas = 0;
};

// Total kept-arrow count per realization is Poisson with mean equal to the
// summed compensator (independent bonds); sample mean/variance vs that.
PoissonCountStats event_count_stats(const ConductanceField&, int replicas,
                                    uint64_t master_seed);

}  // namespace dynssep
