#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "dynssep/environment.hpp"
#include "dynssep/errors.hpp"
#include "dynssep/lattice.hpp"

using namespace dynssep;

namespace {

EnvironmentSpec base_spec(EnvironmentKind kind) {
  EnvironmentSpec s;
  s.kind = kind;
  s.levels = {0.5, 2.0};
  s.flip_rate = 3.0;
  s.period = 0.3;
  s.horizon = 2.0;
  return s;
}

}  // namespace

TEST_CASE("spec validation rejects malformed inputs") {
  EnvironmentSpec s = base_spec(EnvironmentKind::static_levels);
  CHECK_NOTHROW(s.validate());
  s.levels = {};
  CHECK_THROWS_AS(s.validate(), UsageError);
  s.levels = {-0.1};
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = base_spec(EnvironmentKind::markov_flip);
  s.levels = {1.0};
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = base_spec(EnvironmentKind::markov_flip);
  s.flip_rate = 0.0;
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = base_spec(EnvironmentKind::piecewise_deterministic);
  s.period = 0.0;
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = base_spec(EnvironmentKind::static_levels);
  s.alpha = 1.0;  // below max level 2.0
  CHECK_THROWS_AS(s.validate(), UsageError);
  s = base_spec(EnvironmentKind::static_levels);
  s.levels = {0.0};
  CHECK_THROWS_AS(s.validate(), UsageError);  // all-zero needs explicit alpha
  s.alpha = 1.0;
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("kind names round trip") {
  for (auto kind : {EnvironmentKind::static_levels,
                    EnvironmentKind::piecewise_deterministic,
                    EnvironmentKind::markov_flip})
    CHECK(environment_kind_from_name(environment_kind_name(kind)) == kind);
  CHECK_THROWS_AS(environment_kind_from_name("bogus"), UsageError);
}

TEST_CASE("static environments draw i.i.d. levels and never move") {
  const Torus torus(1, 32);
  const EnvironmentSpec spec = base_spec(EnvironmentKind::static_levels);
  const ConductanceField f = sample_environment(spec, torus, 77);
  std::set<double> seen;
  for (int b = 0; b < f.bonds(); ++b) {
    REQUIRE(f.bond_times(b).size() == 1);
    const double v = f.bond_values(b)[0];
    CHECK((v == 0.5 || v == 2.0));
    seen.insert(v);
    CHECK(f.rate_at(b, 0.0) == v);
    CHECK(f.rate_at(b, 1.7) == v);
  }
  CHECK(seen.size() == 2);  // both levels appear across 32 bonds
  CHECK(f.time_constant());
  CHECK(f.alpha() == doctest::Approx(2.0));
  CHECK(f.beta() == doctest::Approx(0.5));
}

TEST_CASE("piecewise schedule cycles the level list globally") {
  const Torus torus(1, 8);
  EnvironmentSpec spec = base_spec(EnvironmentKind::piecewise_deterministic);
  spec.levels = {1.0, 3.0, 0.5};
  spec.period = 0.25;
  spec.horizon = 2.0;
  const ConductanceField f = sample_environment(spec, torus, 5);
  for (int b = 0; b < f.bonds(); ++b) {
    for (double t : {0.0, 0.1, 0.26, 0.49, 0.51, 0.8, 1.3, 1.9}) {
      const int window = static_cast<int>(t / 0.25);
      const double expect = spec.levels[window % 3];
      CHECK(f.rate_at(b, t) == doctest::Approx(expect));
    }
    // càdlàg at a breakpoint: value jumps at 0.25, left limit keeps level 0.
    CHECK(f.rate_at(b, 0.25) == doctest::Approx(3.0));
    CHECK(f.rate_before(b, 0.25) == doctest::Approx(1.0));
    CHECK(f.rate_before(b, 0.0) == f.rate_at(b, 0.0));
  }
}

TEST_CASE("flip environments alternate levels with Poisson switch counts") {
  const Torus torus(2, 12);  // 288 bonds
  EnvironmentSpec spec = base_spec(EnvironmentKind::markov_flip);
  spec.flip_rate = 3.0;
  spec.horizon = 2.0;
  const ConductanceField f = sample_environment(spec, torus, 123);
  long flips = 0;
  long start_high = 0;
  for (int b = 0; b < f.bonds(); ++b) {
    const auto& vs = f.bond_values(b);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      CHECK((vs[i] == 0.5 || vs[i] == 2.0));
      if (i > 0) CHECK(vs[i] != vs[i - 1]);  // strict alternation
    }
    flips += static_cast<long>(vs.size()) - 1;
    start_high += vs[0] == 2.0;
  }
  // Total flips ~ Poisson(bonds · γ · T) = Poisson(1728).
  const double mean = 288 * 3.0 * 2.0;
  CHECK(std::abs(flips - mean) < 4.0 * std::sqrt(mean));
  // Initial level is Bernoulli(1/2) per bond.
  CHECK(std::abs(start_high - 144.0) < 4.0 * std::sqrt(288 * 0.25));
}

TEST_CASE("longer horizons only append randomness") {
  const Torus torus(1, 10);
  EnvironmentSpec spec = base_spec(EnvironmentKind::markov_flip);
  spec.horizon = 1.0;
  const ConductanceField shorter = sample_environment(spec, torus, 9);
  spec.horizon = 3.0;
  const ConductanceField longer = sample_environment(spec, torus, 9);
  for (int b = 0; b < shorter.bonds(); ++b) {
    const auto& st = shorter.bond_times(b);
    const auto& lt = longer.bond_times(b);
    REQUIRE(lt.size() >= st.size());
    for (std::size_t i = 0; i < st.size(); ++i) {
      CHECK(lt[i] == doctest::Approx(st[i]).epsilon(1e-15));
      CHECK(longer.bond_values(b)[i] == shorter.bond_values(b)[i]);
    }
    // No extra breakpoints were invented inside the short window.
    if (lt.size() > st.size()) CHECK(lt[st.size()] > shorter.horizon());
  }
}

TEST_CASE("min_horizon extends past the requested horizon") {
  const Torus torus(1, 6);
  EnvironmentSpec spec = base_spec(EnvironmentKind::markov_flip);
  spec.horizon = 0.5;
  const ConductanceField f = sample_environment(spec, torus, 2, 10.0);
  CHECK(f.horizon() >= 10.0);
  CHECK_NOTHROW(f.rate_at(0, 9.9));
}

TEST_CASE("rate integral is exact on piecewise tracks") {
  const Torus torus(1, 4);
  EnvironmentSpec spec = base_spec(EnvironmentKind::piecewise_deterministic);
  spec.levels = {1.0, 3.0};
  spec.period = 0.5;
  spec.horizon = 2.0;
  const ConductanceField f = sample_environment(spec, torus, 1);
  // ∫_0^2 λ = 2 windows at 1 + 2 windows at 3, each 0.5 long.
  CHECK(f.integral(0, 0.0, 2.0) == doctest::Approx(4.0).epsilon(1e-15));
  // Incommensurate window, by hand: 0.37·1 + 0.5·3 + 0.5·1 + 0.27·3 = 3.18.
  const double s = 0.13, t = 1.77;
  CHECK(f.integral(0, s, t) == doctest::Approx(3.18).epsilon(1e-12));
  // Midpoint Riemann sanity (step integrand: breakpoint error ~ jump·Δt/2).
  const int n = 200000;
  double riemann = 0.0;
  for (int i = 0; i < n; ++i)
    riemann += f.rate_at(0, s + (t - s) * (i + 0.5) / n) * (t - s) / n;
  CHECK(f.integral(0, s, t) == doctest::Approx(riemann).epsilon(1e-4));
  CHECK(f.integral(0, 0.7, 0.7) == 0.0);
  CHECK_THROWS_AS(f.integral(0, 1.0, 0.5), UsageError);
}

TEST_CASE("time domain is enforced") {
  const Torus torus(1, 4);
  const ConductanceField f = ConductanceField::uniform(torus, 1.0, 1.0);
  CHECK_THROWS_AS(f.rate_at(0, 1.5), UsageError);
  CHECK_THROWS_AS(f.rate_at(0, -0.1), UsageError);
  CHECK_NOTHROW(f.rate_at(0, 1.0));  // horizon itself is addressable
}

TEST_CASE("merged breakpoints cover the window") {
  const Torus torus(1, 4);
  EnvironmentSpec spec = base_spec(EnvironmentKind::piecewise_deterministic);
  spec.levels = {1.0, 2.0};
  spec.period = 0.4;
  spec.horizon = 2.0;
  const ConductanceField f = sample_environment(spec, torus, 0);
  const auto pts = f.merged_breakpoints(0.1, 1.3);
  REQUIRE(pts.size() >= 2);
  CHECK(pts.front() == doctest::Approx(0.1));
  CHECK(pts.back() == doctest::Approx(1.3));
  CHECK(std::is_sorted(pts.begin(), pts.end()));
  // Interior schedule points 0.4, 0.8, 1.2 all present.
  for (double brk : {0.4, 0.8, 1.2})
    CHECK(std::count_if(pts.begin(), pts.end(), [&](double x) {
            return std::abs(x - brk) < 1e-12;
          }) == 1);
}

TEST_CASE("spec and field json round trips") {
  EnvironmentSpec spec = base_spec(EnvironmentKind::markov_flip);
  const EnvironmentSpec back =
      environment_spec_from_json(environment_spec_json(spec));
  CHECK(back.kind == spec.kind);
  CHECK(back.levels == spec.levels);
  CHECK(back.flip_rate == spec.flip_rate);
  CHECK(back.horizon == spec.horizon);

  const Torus torus(1, 6);
  const ConductanceField f = sample_environment(spec, torus, 4);
  const ConductanceField g = field_from_json(field_json(f));
  CHECK(g.bonds() == f.bonds());
  CHECK(g.horizon() == doctest::Approx(f.horizon()));
  for (int b = 0; b < f.bonds(); ++b) {
    REQUIRE(g.bond_times(b).size() == f.bond_times(b).size());
    for (std::size_t i = 0; i < f.bond_times(b).size(); ++i) {
      CHECK(g.bond_times(b)[i] == doctest::Approx(f.bond_times(b)[i]).epsilon(1e-15));
      CHECK(g.bond_values(b)[i] == f.bond_values(b)[i]);
    }
  }
}

TEST_CASE("uniform field helper") {
  const Torus torus(2, 4);
  const ConductanceField f = ConductanceField::uniform(torus, 1.5, 3.0);
  CHECK(f.alpha() == doctest::Approx(1.5));
  CHECK(f.beta() == doctest::Approx(1.5));
  CHECK(f.time_constant());
  CHECK(f.rate_at(7, 2.9) == doctest::Approx(1.5));
  CHECK(f.integral(3, 0.5, 2.5) == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("effective alpha prefers the explicit bound") {
  EnvironmentSpec s = base_spec(EnvironmentKind::static_levels);
  CHECK(s.effective_alpha() == doctest::Approx(2.0));
  s.alpha = 5.0;
  CHECK(s.effective_alpha() == doctest::Approx(5.0));
}
