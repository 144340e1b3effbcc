#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "dynssep/environment.hpp"
#include "dynssep/errors.hpp"
#include "dynssep/graphical.hpp"
#include "dynssep/lattice.hpp"

using namespace dynssep;

namespace {

GraphicalRealization hand_realization(const Torus& torus, double horizon,
                                      std::vector<std::vector<double>> times) {
  nlohmann::json j;
  j["schema"] = 1;
  j["torus"] = torus_json(torus);
  j["horizon"] = horizon;
  j["events"] = times;
  return realization_from_json(j);
}

}  // namespace

TEST_CASE("compensator is exact on schedules and matches a Riemann sum") {
  const Torus torus(1, 4);
  EnvironmentSpec spec;
  spec.kind = EnvironmentKind::piecewise_deterministic;
  spec.levels = {1.0, 3.0};
  spec.period = 0.5;
  spec.horizon = 1.0;
  const ConductanceField f = sample_environment(spec, torus, 0);
  CHECK(compensator(f, 0, 0.0, 1.0) == doctest::Approx(2.0).epsilon(1e-15));

  // By hand: 0.29·1 + 0.43·3 = 1.58 exactly.
  const double s = 0.21, t = 0.93;
  CHECK(compensator(f, 0, s, t) == doctest::Approx(1.58).epsilon(1e-12));
  // Midpoint Riemann sanity (step integrand: breakpoint error ~ jump·Δt/2).
  const int n = 400000;
  double riemann = 0.0;
  for (int i = 0; i < n; ++i)
    riemann += f.rate_at(0, s + (t - s) * (i + 0.5) / n) * (t - s) / n;
  CHECK(compensator(f, 0, s, t) == doctest::Approx(riemann).epsilon(1e-4));
}

TEST_CASE("thinning produces the right mean count") {
  const Torus torus(1, 16);
  EnvironmentSpec spec;
  spec.kind = EnvironmentKind::markov_flip;
  spec.levels = {0.5, 2.0};
  spec.flip_rate = 2.0;
  spec.horizon = 1.5;
  const ConductanceField f = sample_environment(spec, torus, 31);

  double expected = 0.0;
  for (int b = 0; b < f.bonds(); ++b)
    expected += compensator(f, b, 0.0, f.horizon());

  const int replicas = 400;
  double total = 0.0;
  for (int r = 0; r < replicas; ++r)
    total += build_graphical(f, 8, r).total_events();
  const double mean = total / replicas;
  // Total count is Poisson(expected): se of the mean = sqrt(expected/R).
  CHECK(std::abs(mean - expected) < 4.0 * std::sqrt(expected / replicas));
}

TEST_CASE("zero conductance yields an empty realization") {
  const Torus torus(1, 8);
  EnvironmentSpec spec;
  spec.kind = EnvironmentKind::static_levels;
  spec.levels = {0.0};
  spec.alpha = 2.0;
  spec.horizon = 1.0;
  const ConductanceField f = sample_environment(spec, torus, 3);
  const GraphicalRealization real = build_graphical(f, 5, 0);
  CHECK(real.total_events() == 0);
}

TEST_CASE("event count statistics agree with the compensator") {
  const Torus torus(1, 12);
  EnvironmentSpec spec;
  spec.kind = EnvironmentKind::piecewise_deterministic;
  spec.levels = {1.0, 2.0};
  spec.period = 0.4;
  spec.horizon = 1.0;
  const ConductanceField f = sample_environment(spec, torus, 0);
  const PoissonCountStats stats = event_count_stats(f, 600, 17);
  double expected = 0.0;
  for (int b = 0; b < f.bonds(); ++b)
    expected += compensator(f, b, 0.0, 1.0);
  CHECK(stats.expected == doctest::Approx(expected).epsilon(1e-12));
  CHECK(stats.replicas == 600);
  CHECK(std::abs(stats.sample_mean - expected) < 4.0 * stats.se_mean);
  CHECK(std::abs(stats.sample_var - expected) < 4.0 * stats.se_var);
}

TEST_CASE("merged event window uses half-open-left boundaries") {
  const Torus torus(1, 4);
  const GraphicalRealization real =
      hand_realization(torus, 1.0, {{0.25, 0.5}, {0.5}, {}, {0.75}});
  CHECK(real.total_events() == 4);
  const auto [lo, hi] = real.window(0.25, 0.5);
  // (0.25, 0.5] keeps the two events at exactly 0.5, drops the one at 0.25.
  CHECK(hi - lo == 2);
  const auto all = real.window(0.0, 1.0);
  CHECK(all.second - all.first == 4);
  const auto none = real.window(0.8, 1.0);
  CHECK(none.second == none.first);
}

TEST_CASE("realization json round trip preserves every arrow") {
  const Torus torus(2, 4);
  const ConductanceField f = ConductanceField::uniform(torus, 1.0, 2.0);
  const GraphicalRealization real = build_graphical(f, 99, 7);
  const GraphicalRealization back = realization_from_json(realization_json(real));
  REQUIRE(back.bond_times.size() == real.bond_times.size());
  for (std::size_t b = 0; b < real.bond_times.size(); ++b)
    CHECK(back.bond_times[b] == real.bond_times[b]);
  CHECK(back.merged == real.merged);
  CHECK(back.horizon == real.horizon);
}

TEST_CASE("malformed realizations are rejected") {
  const Torus torus(1, 4);
  CHECK_THROWS_AS(hand_realization(torus, 1.0, {{0.5}}), UsageError);
  CHECK_THROWS_AS(
      hand_realization(torus, 1.0, {{0.5, 0.5}, {}, {}, {}}), UsageError);
  CHECK_THROWS_AS(
      hand_realization(torus, 1.0, {{1.5}, {}, {}, {}}), UsageError);
  CHECK_THROWS_AS(
      hand_realization(torus, 1.0, {{0.0}, {}, {}, {}}), UsageError);
}

TEST_CASE("active islands on a crafted realization") {
  const Torus torus(1, 8);
  // Arrows on bonds {0,1} = {0-1, 1-2} and bond 4 = {4-5}.
  const GraphicalRealization real = hand_realization(
      torus, 1.0, {{0.1}, {0.2}, {}, {}, {0.3}, {}, {}, {}});
  const auto roots = active_islands(real, 0.0, 1.0);
  CHECK(roots[0] == roots[1]);
  CHECK(roots[1] == roots[2]);
  CHECK(roots[4] == roots[5]);
  CHECK(roots[0] != roots[3]);
  CHECK(roots[0] != roots[4]);
  CHECK(roots[3] != roots[4]);
  CHECK(roots[6] != roots[0]);
  // Restricting the window below 0.3 disconnects 4-5.
  const auto early = active_islands(real, 0.0, 0.25);
  CHECK(early[4] != early[5]);
  CHECK(early[0] == early[2]);
}

TEST_CASE("island radius tail starts at one and decays") {
  const Torus torus(1, 64);
  const ConductanceField f = ConductanceField::uniform(torus, 1.0, 1.0);
  const IslandSurvey survey = island_radius_survey(f, 0.12, 500, 21);
  REQUIRE(survey.tail.size() >= 3);
  CHECK(survey.tail[0] == doctest::Approx(1.0));
  CHECK(std::is_sorted(survey.tail.rbegin(), survey.tail.rend()));
  CHECK_FALSE(survey.flagged);
  CHECK(survey.chi_hat > 0.0);
  // Single-window chain bound: P(radius >= n) <= (1 - e^{-2h})^n.
  const double p = 1.0 - std::exp(-2.0 * 0.12);
  for (std::size_t n = 1; n < survey.tail.size(); ++n)
    CHECK(survey.tail[n] <=
          std::pow(p, double(n)) + 4.0 * survey.tail_se[n] + 1e-12);
}

TEST_CASE("wide windows flag the supercritical regime") {
  const Torus torus(1, 16);
  const ConductanceField f = ConductanceField::uniform(torus, 1.0, 50.0);
  const IslandSurvey survey = island_radius_survey(f, 50.0, 60, 2);
  CHECK(survey.flagged);
}
