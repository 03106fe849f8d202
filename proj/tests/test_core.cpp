#include "doctest.h"

#include "microgrid/core.hpp"
#include "microgrid/rng.hpp"

#include <stdexcept>

using namespace microgrid;

TEST_CASE("smoothing cost matches the direct formula") {
  PowerSchedule p(4);
  p << 0, 10, 10, 0;
  CHECK(smoothing_cost(p, 1.0, 1.0, 1.0) == doctest::Approx(230.0));

  PowerSchedule flat = PowerSchedule::Constant(8, 42.0);
  CHECK(smoothing_cost(flat, 3.0, 5.0, 7.0) == doctest::Approx(0.0));

  PowerSchedule ramp(4);
  ramp << 0, 1, 2, 3;
  CHECK(smoothing_cost(ramp, 2.0, 1.0, 5.0) == doctest::Approx(9.0));
}

TEST_CASE("smoothing cost rejects short horizons") {
  PowerSchedule p(2);
  p << 1, 2;
  CHECK_THROWS_AS(smoothing_cost(p, 1, 1, 1), std::invalid_argument);
}

TEST_CASE("smoothing cost is convex and shift-invariant") {
  Rng rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const int t = rng.uniform_int(3, 12);
    PowerSchedule p(t), q(t);
    for (int i = 0; i < t; ++i) {
      p[i] = rng.uniform(-50, 50);
      q[i] = rng.uniform(-50, 50);
    }
    const double ar = rng.uniform(0, 2), ad = rng.uniform(0, 2), ac = rng.uniform(0, 2);
    const double lam = rng.uniform();
    const PowerSchedule mix = lam * p + (1 - lam) * q;
    CHECK(smoothing_cost(mix, ar, ad, ac) <=
          lam * smoothing_cost(p, ar, ad, ac) + (1 - lam) * smoothing_cost(q, ar, ad, ac) + 1e-9);

    const double shift = rng.uniform(-100, 100);
    CHECK(smoothing_cost(p.array() + shift, ar, ad, ac) ==
          doctest::Approx(smoothing_cost(p, ar, ad, ac)).epsilon(1e-9));
  }
}

TEST_CASE("power/energy conversion") {
  TimeGrid g15;  // 15-minute default
  CHECK(power_to_energy(100.0, g15) == doctest::Approx(25.0));
  CHECK(power_to_energy(0.0, g15) == doctest::Approx(0.0));
  CHECK(power_to_energy(7.2, g15) == doctest::Approx(1.8));

  TimeGrid g60 = g15;
  g60.step_minutes = 60;
  CHECK(power_to_energy(3.0, g60) == doctest::Approx(3.0));
}

TEST_CASE("time grid validation") {
  TimeGrid g;
  g.validate();
  CHECK(g.period_steps() == 96);
  CHECK(g.dt_hours() == doctest::Approx(0.25));

  TimeGrid bad = g;
  bad.step_minutes = 7;  // does not divide 24h
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = g;
  bad.horizon_steps = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("penalty weight validation") {
  PenaltyWeights w;
  w.validate();
  w.rho = 0.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
  w.rho = 1.0;
  w.alpha_diff = -0.1;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}
