#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "rdlearn/error.hpp"
#include "rdlearn/rdsolve.hpp"

using namespace rdlearn;

namespace {

const auto zero_reaction =
    std::make_shared<LinearReaction>(Matrix::Zero(1, 1), Vector::Zero(1));

}  // namespace

TEST_CASE("pure diffusion conserves mass under Neumann boundaries") {
  const SpaceTimeGrid grid{{2.0}, {41}, 1.0, 50};
  const auto u0 = sample_initial(grid, 1, [](std::size_t, std::span<const double> x) {
    return 1.0 + std::cos(std::numbers::pi * x[0] / 2.0);
  });
  const Solution sol = solve(*zero_reaction, DiffusionSpec{{0.3}}, u0, grid);
  const double m0 = sol.diagnostics.mass.front();
  for (double m : sol.diagnostics.mass) CHECK(m == doctest::Approx(m0).epsilon(1e-12));
  CHECK(sol.diagnostics.min_overall >= 0.0);
}

TEST_CASE("constant states are steady for a logistic reaction at its fixed point") {
  const SpaceTimeGrid grid{{1.0, 1.0}, {9, 7}, 0.5, 10};
  const auto kpp = CatalogReaction::from_name("fisher-kpp");
  const auto u0 = sample_initial(grid, 1, [](std::size_t, std::span<const double>) { return 1.0; });
  const Solution sol = solve(*kpp, DiffusionSpec{{0.1}}, u0, grid);
  for (double v : sol.field.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("Laplacian transpose is the adjoint") {
  const SpaceTimeGrid grid{{1.0, 2.0}, {6, 5}, 1.0, 1};
  const std::size_t n = grid.node_count();
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  std::vector<double> v(n), w(n), av(n), atw(n);
  for (auto& e : v) e = normal(rng);
  for (auto& e : w) e = normal(rng);
  apply_laplacian(grid, v, av);
  apply_laplacian_transpose(grid, w, atw);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    lhs += w[i] * av[i];
    rhs += v[i] * atw[i];
  }
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("Dirichlet boundaries hold their values") {
  const SpaceTimeGrid grid{{1.0}, {21}, 0.2, 20};
  SolveOptions options;
  options.boundary = BoundaryKind::dirichlet;
  options.dirichlet_values = {0.25};
  const auto u0 = sample_initial(grid, 1, [](std::size_t, std::span<const double>) { return 0.25; });
  const Solution sol = solve(*zero_reaction, DiffusionSpec{{0.5}}, u0, grid, options);
  for (std::size_t k = 0; k < sol.field.slices(); ++k) {
    CHECK(sol.field.at(k, 0, 0) == doctest::Approx(0.25));
    CHECK(sol.field.at(k, 0, 20) == doctest::Approx(0.25));
  }
}

TEST_CASE("the stability guard rejects overly large time steps") {
  const SpaceTimeGrid grid{{1.0}, {11}, 10.0, 2};
  const LinearReaction fast(Matrix::Constant(1, 1, 5.0), Vector::Zero(1));
  const auto u0 = sample_initial(grid, 1, [](std::size_t, std::span<const double>) { return 0.1; });
  CHECK_THROWS_AS(solve(fast, DiffusionSpec{{0.1}}, u0, grid), StabilityError);
  SolveOptions unguarded;
  unguarded.stability_guard = false;
  CHECK_NOTHROW(solve(fast, DiffusionSpec{{0.1}}, u0, grid, unguarded));
}

TEST_CASE("diffusion below the floor and bad grids are rejected") {
  const SpaceTimeGrid grid{{1.0}, {11}, 1.0, 10};
  const auto u0 = sample_initial(grid, 1, [](std::size_t, std::span<const double>) { return 0.1; });
  CHECK_THROWS(solve(*zero_reaction, DiffusionSpec{{1e-9}, 1e-6}, u0, grid));
  CHECK_THROWS((SpaceTimeGrid{{1.0}, {2}, 1.0, 10}.validate()));
}

TEST_CASE("manufactured solution converges at the expected orders") {
  ManufacturedSetup setup;
  setup.refinements = 3;
  const ConvergenceStudy study = manufactured_convergence(setup);
  CHECK(study.space_slope == doctest::Approx(2.0).epsilon(0.1));
  CHECK(study.time_slope == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("mass audit flags growth beyond the affine bound") {
  const SpaceTimeGrid grid{{1.0}, {11}, 1.0, 20};
  const LinearReaction growth(Matrix::Constant(1, 1, 1.0), Vector::Zero(1));
  const auto u0 = sample_initial(grid, 1, [](std::size_t, std::span<const double>) { return 1.0; });
  const Solution sol = solve(growth, DiffusionSpec{{0.1}}, u0, grid);
  const std::vector<double> c{1.0};
  CHECK(mass_audit(sol.field, c, 0.0, 1.0, 1e-6).passed());
  CHECK_FALSE(mass_audit(sol.field, c, 0.0, 0.5, 1e-6).passed());
}
