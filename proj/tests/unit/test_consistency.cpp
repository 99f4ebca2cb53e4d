#include <doctest.h>

#include <cmath>
#include <random>

#include "rdlearn/consistency.hpp"
#include "rdlearn/error.hpp"

using namespace rdlearn;

TEST_CASE("wrapper leaves nonnegative values and far states untouched") {
  const auto base = std::make_shared<MlpReaction>(MlpReaction::random(MlpArchitecture{{2, 8, 2}}, 4, 2.0));
  const auto g = wrap(base, mollified_heaviside(0.1));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> state(0.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    Vector u(2);
    u << state(rng), state(rng);
    const Vector f = base->eval(u), fbar = g->eval(u);
    for (Eigen::Index n = 0; n < 2; ++n) {
      if (f[n] >= 0.0 || u[n] >= 0.15) CHECK(fbar[n] == f[n]);
      else CHECK(fbar[n] >= f[n]);
    }
  }
}

TEST_CASE("wrapped gradient matches finite differences away from kinks") {
  const auto base = std::make_shared<MlpReaction>(MlpReaction::random(MlpArchitecture{{2, 6, 2}}, 8, 2.0));
  const auto g = wrap(base, mollified_heaviside(0.5));
  const double h = 1e-6;
  int compared = 0;
  for (double a : {0.05, 0.3, 0.45, 0.6}) {
    for (double b : {0.1, 0.5, 0.9}) {
      Vector u(2);
      u << a, b;
      const Vector f = base->eval(u);
      if (f.cwiseAbs().minCoeff() < 1e-3) continue;
      const Matrix analytic = wrap_gradient(*g, u);
      for (Eigen::Index j = 0; j < 2; ++j) {
        Vector up = u, um = u;
        up[j] += h;
        um[j] -= h;
        const Vector fd = (g->eval(up) - g->eval(um)) / (2.0 * h);
        CHECK((analytic.col(j) - fd).cwiseAbs().maxCoeff() < 1e-6);
      }
      ++compared;
    }
  }
  CHECK(compared > 6);
}

TEST_CASE("wrapped catalogue term passes every sampled condition") {
  const auto lv = CatalogReaction::from_name("lotka-volterra");
  WrapOptions options;
  options.sample_box = Box::cube(2, 0.0, 1.0);
  const auto g = wrap(lv, mollified_heaviside(0.1), options);
  const ConditionReport report = check_conditions(*g, Box::cube(2, 0.0, 1.0), 2000);
  CHECK(report.quasipositive());
  CHECK(report.mass_controlled());
  CHECK(report.growth_bounded());
  CHECK(g->constants().source == LipschitzSource::certified);
  // Quadratic terms have no global bound, so without a box nothing is known.
  CHECK_FALSE(wrap(lv, mollified_heaviside(0.1))->constants().available());
}

TEST_CASE("wrapper schedule and its validation") {
  const WrapperSchedule s{2.0, 1.0, 0.5};
  CHECK(s.eps(16.0) == doctest::Approx(0.25));
  CHECK(s.preserved_rate() == doctest::Approx(1.0));
  CHECK_THROWS_AS((WrapperSchedule{1.0, 1.0, 0.5}.validate()), InvalidParameter);
  CHECK_THROWS_AS((WrapperSchedule{2.0, 1.0, 1.5}.validate()), InvalidParameter);
}

TEST_CASE("power target is strictly quasipositive with rate alpha") {
  const auto target = power_target(3.0);
  const double rate = strict_rate_estimate(*target, Box::cube(1, 0.0, 1.0), 0, {0.4, 0.2, 0.1, 0.05}, 4000);
  CHECK(rate == doctest::Approx(3.0).epsilon(0.1));
}
