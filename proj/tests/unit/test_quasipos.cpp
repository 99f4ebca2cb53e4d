#include <doctest.h>

#include <cmath>
#include <vector>

#include "rdlearn/error.hpp"
#include "rdlearn/quasipos.hpp"

using namespace rdlearn;
using namespace rdlearn::quasipos;

TEST_CASE("layer membership in each mode") {
  const BoundaryLayer metric(Domain::of_box(Box::cube(2, 0.0, 1.0)), LayerMode::metric);
  const std::vector<double> near{0.05, 0.7}, far{0.4, 0.6}, edge{0.1, 0.5};
  CHECK(metric.member(near, 0.1));
  CHECK_FALSE(metric.member(far, 0.1));
  CHECK_FALSE(metric.member(edge, 0.1));  // open layer

  const BoundaryLayer second(Domain::of_box(Box::cube(2, 0.0, 1.0)), LayerMode::componentwise, 1);
  CHECK_FALSE(second.member(near, 0.1));
  CHECK(second.member(std::vector<double>{0.9, 0.1}, 0.1));  // closed layer

  const BoundaryLayer nonlinear(Domain::orthant(2), LayerMode::nonlinear);
  CHECK(nonlinear.level_value(std::vector<double>{0.25, 4.0}) == doctest::Approx(0.5 * 16.0));

  // A box away from the orthant faces has no layer at all.
  const BoundaryLayer away(Domain::of_box(Box::cube(1, 1.0, 2.0)), LayerMode::metric);
  CHECK(std::isinf(away.level_value(std::vector<double>{1.5})));
}

TEST_CASE("modified function is nonnegative on the faces and unchanged far away") {
  const BoundaryLayer layer(Domain::of_box(Box::cube(2, 0.0, 1.0)), LayerMode::metric);
  const ScalarField f = [](std::span<const double> x) { return x[0] + x[1] - 0.3; };
  const ModifiedFunction g = modify(f, layer, 0.2, 0.1);
  for (double t : {0.0, 0.1, 0.2, 0.5, 1.0}) {
    CHECK(g(std::vector<double>{0.0, t}) >= 0.0);
    CHECK(g(std::vector<double>{t, 0.0}) >= 0.0);
  }
  const std::vector<double> inside{0.5, 0.6};
  CHECK(g(inside) == f(inside));
}

TEST_CASE("unit-cube boundary measure closed form") {
  CHECK(unit_cube_measure(1, 0.3) == doctest::Approx(0.3));
  CHECK(unit_cube_measure(2, 0.5) == doctest::Approx(0.75));
  CHECK(unit_cube_measure(3, 2.0) == 1.0);
  const BoundaryLayer cube(Domain::of_box(Box::cube(2, 0.0, 1.0)), LayerMode::metric);
  const MeasureEstimate est = measure_monte_carlo(cube, 0.25, 40000, 3);
  CHECK(std::abs(est.value - unit_cube_measure(2, 0.25)) < 4.0 * est.standard_error);
  CHECK(est.half_width == doctest::Approx(1.96 * est.standard_error));
}

TEST_CASE("nonlinear section members satisfy the distance bound") {
  const PointSet members = sample_nonlinear_members(2, 0.3, 2.0, 2000, 8);
  REQUIRE(members.size() == 2000);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const auto p = members[i];
    CHECK(section_profile(p[0]) * section_profile(p[1]) <= 0.3);
    CHECK(std::min(p[0], p[1]) <= std::pow(0.3, 1.0));
  }
}

TEST_CASE("shipped examples converge without boundary violations") {
  for (const auto& name : shipped_example_names()) {
    const auto rows = approximation_experiment(shipped_example(name, 4));
    REQUIRE(rows.size() == 4);
    for (const auto& row : rows) CHECK(row.boundary_violations == 0);
    CHECK(rows.back().modified_error < rows.front().modified_error);
  }
  CHECK_THROWS_AS(shipped_example("unknown"), InvalidParameter);
  CHECK_THROWS_AS(parse_mode("sideways"), InvalidParameter);
}
