#include <doctest.h>

#include <cmath>
#include <random>

#include "rdlearn/error.hpp"
#include "rdlearn/learn.hpp"

using namespace rdlearn;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_adjoint(const MeasurementOperator& op) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  std::vector<double> x(op.input_size()), y(op.outputs()), kx(op.outputs()), kty(op.input_size(), 0.0);
  for (auto& v : x) v = normal(rng);
  for (auto& v : y) v = normal(rng);
  op.apply(x, kx);
  op.apply_adjoint(y, kty);
  CHECK(dot(kx, y) == doctest::Approx(dot(x, kty)).epsilon(1e-12));
}

}  // namespace

TEST_CASE("measurement operators and their adjoints") {
  const SpaceTimeGrid grid{{1.0, 1.0}, {9, 5}, 1.0, 8};
  check_adjoint(MeasurementOperator::full(grid, 2));
  check_adjoint(MeasurementOperator::subsample(grid, 2, 2));
  check_adjoint(MeasurementOperator::fourier(grid, 2, 3));

  const auto coarse = MeasurementOperator::for_level(MeasurementKind::subsample, grid, 1, 1, 3);
  CHECK(coarse.resolution() == 4);
  CHECK(MeasurementOperator::for_level(MeasurementKind::subsample, grid, 1, 5, 3).resolution() == 1);
}

TEST_CASE("reconstruction inverts subsampling of linear data") {
  const SpaceTimeGrid grid{{1.0}, {9}, 1.0, 4};
  const auto op = MeasurementOperator::subsample(grid, 1, 2);
  StateField field(grid, 1);
  std::vector<double> x(1);
  for (std::size_t k = 0; k <= grid.steps; ++k)
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      grid.coordinates(i, x);
      field.at(k, 0, i) = 1.0 + 2.0 * x[0] - grid.time(k);
    }
  std::vector<double> y(op.outputs());
  op.apply(field.values(), y);
  const auto back = op.reconstruct(y);
  for (std::size_t j = 0; j < back.size(); ++j) CHECK(back[j] == doctest::Approx(field.values()[j]));
}

TEST_CASE("measurement noise has the requested size") {
  const SpaceTimeGrid grid{{1.0}, {9}, 1.0, 4};
  const auto op = MeasurementOperator::full(grid, 1);
  StateField field(grid, 1);
  const auto y = generate_measurements(field, op, 0.2, 3);
  CHECK(op.norm(y) == doctest::Approx(0.18));
  CHECK(generate_measurements(field, op, 0.2, 3) == y);
}

TEST_CASE("schedule validation names the offending key") {
  ScheduleSpec spec;
  spec.gamma = 1.5;
  try {
    spec.validate();
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.key() == "schedule.gamma");
  }
  spec = {};
  spec.q = 3.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("default schedules have decreasing products") {
  const auto schedule = make_schedule(ScheduleSpec{}, {1, 2, 3});
  REQUIRE(schedule.size() == 3);
  CHECK(schedule[1].lambda > schedule[0].lambda);
  CHECK(schedule[2].delta == doctest::Approx(0.125));
  CHECK(schedule[2].eps == doctest::Approx(std::pow(3.0, -0.5)));
  CHECK_NOTHROW(check_schedule_products(schedule));
  CHECK_THROWS_AS(check_schedule_products(make_schedule(ScheduleSpec{}, {1, 2})), ValidationError);
}

TEST_CASE("objective gradient on a small problem") {
  const SpaceTimeGrid grid{{1.0}, {6}, 0.3, 3};
  const auto truth = CatalogReaction::from_name("fisher-kpp");
  const auto u0 = sample_initial(grid, 1, [](std::size_t, std::span<const double> x) { return 0.4 + 0.2 * x[0]; });
  const auto sol = solve(*truth, DiffusionSpec{{0.1}}, u0, grid);
  auto op = std::make_shared<MeasurementOperator>(MeasurementOperator::subsample(grid, 1, 1));

  ProblemSetup setup;
  setup.grid = grid;
  setup.architecture = MlpArchitecture{{1, 4, 1}};
  setup.reaction_box = Box({0.0}, {1.0});
  setup.schedule = make_schedule(ScheduleSpec{}, {1.0})[0];
  setup.measurement = op;
  setup.data.push_back(generate_measurements(sol.field, *op, 0.01, 1));
  setup.quadrature_per_axis = 7;
  setup.sup_samples_per_species = 32;
  const AllAtOnceProblem problem(setup);

  auto x = problem.initial_point(2, 0.5);
  x[problem.diffusion_offset(0)] = 0.05;
  std::vector<double> grad(x.size());
  const double f0 = problem.evaluate(x, grad).total;
  CHECK(f0 == doctest::Approx(problem.evaluate(x).total));

  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  std::vector<double> v(x.size());
  for (auto& e : v) e = normal(rng);
  auto along = [&](double h) {
    auto y = x;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += h * v[i];
    return problem.evaluate(y).total;
  };
  const double h = 1e-6;
  CHECK(dot(grad, v) == doctest::Approx((along(h) - along(-h)) / (2.0 * h)).epsilon(1e-5));

  // Projection enforces the diffusion floor.
  x[problem.diffusion_offset(0)] = -1.0;
  problem.project(x);
  CHECK(x[problem.diffusion_offset(0)] == setup.d_min);

  // A few optimizer steps never increase the objective.
  OptimizerOptions options;
  options.max_iters = 30;
  const LevelResult result = solve_level(problem, problem.initial_point(2, 0.5), options);
  for (std::size_t i = 1; i < result.history.size(); ++i) CHECK(result.history[i] <= result.history[i - 1] + 1e-9);
}
