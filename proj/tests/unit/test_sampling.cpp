#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "rdlearn/error.hpp"
#include "rdlearn/sampling.hpp"

using namespace rdlearn;

TEST_CASE("box parsing accepts scalar and per-axis bounds") {
  const Box a = Box::parse("0..1.5", 3);
  CHECK(a.dim() == 3);
  CHECK(a.hi[2] == 1.5);
  CHECK(a.volume() == doctest::Approx(3.375));

  const Box b = Box::parse("0,1..2,3", 2);
  CHECK(b.lo[1] == 1.0);
  CHECK(b.hi[0] == 2.0);

  CHECK_THROWS_AS(Box::parse("1..0", 1), InvalidParameter);
  CHECK_THROWS_AS(Box::parse("0..1", 0), InvalidParameter);
  CHECK_THROWS_AS(Box::parse("banana", 1), InvalidParameter);
  CHECK_THROWS_AS(Box::parse("0,0..1", 3), InvalidParameter);
}

TEST_CASE("Sobol points stay in the box and are reproducible") {
  const Box box({-1.0, 2.0}, {1.0, 5.0});
  const PointSet p = sobol_points(box, 512);
  const PointSet q = sobol_points(box, 512);
  REQUIRE(p.size() == 512);
  CHECK(p.coords() == q.coords());
  double mean0 = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(box.contains(p[i]));
    mean0 += p[i][0];
  }
  CHECK(mean0 / 512.0 == doctest::Approx(0.0).epsilon(0.02));
  CHECK(box_corners(box).size() == 4);
}

TEST_CASE("trapezoid rules integrate linear functions exactly") {
  const auto w = trapezoid_weights_1d(11, 0.1);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0));

  const WeightedGrid g = trapezoid_grid(Box({0.0, 0.0}, {2.0, 1.0}), 9);
  double integral = 0.0;
  for (std::size_t i = 0; i < g.points.size(); ++i) integral += g.weights[i] * (g.points[i][0] + 3.0 * g.points[i][1]);
  CHECK(integral == doctest::Approx(2.0 + 3.0));
}

TEST_CASE("loglog slope of a power law") {
  std::vector<double> x{1, 2, 4, 8}, y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -1.5));
  CHECK(loglog_slope(x, y) == doctest::Approx(-1.5));
}
