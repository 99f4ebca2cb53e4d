#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>

#include "rdlearn/error.hpp"
#include "rdlearn/transition.hpp"

using namespace rdlearn;

TEST_CASE("bump kernel has unit mass against an adaptive quadrature oracle") {
  const auto kernel = MollifierKernel::standard();
  const double mass = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      [&](double x) { return kernel->density(x); }, -1.0, 1.0, 15, 1e-13);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(kernel->density(1.0) == 0.0);
  CHECK(kernel->density(-1.5) == 0.0);
}

TEST_CASE("antiderivative matches the integral of the density") {
  const auto kernel = MollifierKernel::standard();
  for (double x : {-0.9, -0.3, 0.0, 0.2, 0.75}) {
    const double reference = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double s) { return kernel->density(s); }, -1.0, x, 15, 1e-13);
    CHECK(kernel->antiderivative(x) == doctest::Approx(reference).epsilon(1e-9));
  }
  CHECK(kernel->antiderivative(0.0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(kernel->antiderivative(-2.0) == 0.0);
  CHECK(kernel->antiderivative(2.0) == 1.0);
}

TEST_CASE("mollified step is a transition function") {
  const TransitionFunction chi = mollified_heaviside(0.2);
  CHECK(chi.delta() == doctest::Approx(0.1));
  CHECK(chi(0.0) == 1.0);
  CHECK(chi(chi.ramp_begin()) == 1.0);
  CHECK(chi(chi.ramp_end()) == 0.0);
  CHECK(chi(5.0) == 0.0);
  CHECK(chi(0.2) == doctest::Approx(0.5).epsilon(1e-12));

  // Strictly decreasing inside the ramp; the flat tails are within an ulp
  // of 0 and 1 near the ends, so sample away from them.
  double previous = 1.0;
  for (int i = 10; i < 190; ++i) {
    const double x = chi.ramp_begin() + 0.2 * i / 200.0;
    const double v = chi(x);
    CHECK(v < previous);
    previous = v;
  }
}

TEST_CASE("cutoff derivative agrees with central differences") {
  const TransitionFunction chi = mollified_heaviside(0.5);
  const double h = 1e-6;
  for (double x : {0.3, 0.45, 0.5, 0.61, 0.7}) {
    const double fd = (chi(x + h) - chi(x - h)) / (2.0 * h);
    CHECK(chi.derivative(x) == doctest::Approx(fd).epsilon(1e-5));
  }
  CHECK(derivative_bound(chi) == doctest::Approx(chi.derivative_sup()).epsilon(1e-6));
}

TEST_CASE("invalid transition parameters are rejected") {
  CHECK_THROWS_AS(mollified_heaviside(0.0), InvalidParameter);
  CHECK_THROWS_AS(TransitionFunction(0.1, 0.2), InvalidParameter);
}
