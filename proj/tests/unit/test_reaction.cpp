#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "rdlearn/error.hpp"
#include "rdlearn/reaction.hpp"

using namespace rdlearn;

namespace {

Matrix central_jacobian(const ReactionTerm& f, const Vector& u) {
  const auto n = static_cast<Eigen::Index>(f.species());
  Matrix jac(n, n);
  const double h = 1e-6;
  for (Eigen::Index j = 0; j < n; ++j) {
    Vector up = u, um = u;
    up[j] += h;
    um[j] -= h;
    jac.col(j) = (f.eval(up) - f.eval(um)) / (2.0 * h);
  }
  return jac;
}

}  // namespace

TEST_CASE("catalogue Jacobians match finite differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> state(0.0, 1.5);
  for (const char* name : {"fisher-kpp", "lotka-volterra", "gray-scott"}) {
    const auto f = CatalogReaction::from_name(name);
    for (int trial = 0; trial < 5; ++trial) {
      Vector u(static_cast<Eigen::Index>(f->species()));
      for (auto& v : u) v = state(rng);
      const Matrix diff = f->jacobian_at(u) - central_jacobian(*f, u);
      CHECK(diff.cwiseAbs().maxCoeff() < 1e-7);
    }
  }
  CHECK_THROWS_AS(CatalogReaction::from_name("brusselator"), InvalidParameter);
}

TEST_CASE("catalogue Lipschitz bounds dominate sampled quotients") {
  const Box box = Box::cube(2, 0.0, 1.0);
  for (const char* name : {"lotka-volterra", "gray-scott"}) {
    const auto f = CatalogReaction::from_name(name);
    const auto bound = f->lipschitz_bound(&box);
    REQUIRE(bound.has_value());
    CHECK(estimate_lipschitz(*f, box, 2000) <= *bound);
  }
}

TEST_CASE("network Jacobian and reverse pass agree with finite differences") {
  const MlpArchitecture arch{{3, 7, 5, 3}};
  const MlpReaction net = MlpReaction::random(arch, 42);
  const Vector u = Vector::LinSpaced(3, 0.1, 0.9);
  CHECK((net.jacobian_at(u) - central_jacobian(net, u)).cwiseAbs().maxCoeff() < 1e-7);

  // d/dtheta of <w, f(u; theta)> through backward().
  const Vector w = Vector::LinSpaced(3, -1.0, 2.0);
  MlpReaction::Workspace ws;
  net.forward(std::span<const double>(u.data(), 3), {}, ws);
  std::vector<double> grad(arch.parameter_count(), 0.0);
  net.backward(ws, std::span<const double>(w.data(), 3), {}, grad, {});

  auto objective = [&](const Vector& theta) { return w.dot(MlpReaction(arch, theta).eval(u)); };
  const double h = 1e-6;
  for (std::size_t k = 0; k < grad.size(); k += 7) {
    Vector tp = net.theta(), tm = net.theta();
    tp[static_cast<Eigen::Index>(k)] += h;
    tm[static_cast<Eigen::Index>(k)] -= h;
    CHECK(grad[k] == doctest::Approx((objective(tp) - objective(tm)) / (2.0 * h)).epsilon(1e-6));
  }
}

TEST_CASE("network Lipschitz bound is the product of layer norms") {
  const MlpReaction net = MlpReaction::random(MlpArchitecture{{2, 8, 2}}, 9);
  const auto norms = net.layer_norm_bounds();
  REQUIRE(norms.size() == 2);
  const auto bound = net.lipschitz_bound(nullptr);
  REQUIRE(bound.has_value());
  CHECK(*bound == doctest::Approx(norms[0] * norms[1]));
  CHECK(estimate_lipschitz(net, Box::cube(2, -2.0, 2.0), 2000) <= *bound);
}

TEST_CASE("parameter files round-trip exactly") {
  const MlpArchitecture arch{{2, 4, 2}};
  const MlpReaction net = MlpReaction::random(arch, 5);
  ParameterFile file{arch, 3, 77, 0.125, net.theta()};
  const auto path = (std::filesystem::temp_directory_path() / "rdlearn-test-params.txt").string();
  write_parameter_file(path, file);
  const ParameterFile back = read_parameter_file(path);
  std::filesystem::remove(path);
  CHECK(back.arch.widths == arch.widths);
  CHECK(back.level == 3);
  CHECK(back.seed == 77);
  CHECK(back.wrapper_eps == 0.125);
  CHECK(back.theta == net.theta());
}

TEST_CASE("condition checks detect quasipositivity violations") {
  const auto kpp = CatalogReaction::from_name("fisher-kpp");
  CHECK(check_conditions(*kpp, Box::cube(1, 0.0, 1.0), 500).quasipositive());

  // f(u) = -1 is negative on the face u = 0.
  const LinearReaction sink(Matrix::Zero(1, 1), Vector::Constant(1, -1.0));
  const ConditionReport report = check_conditions(sink, Box::cube(1, 0.0, 1.0), 500);
  CHECK_FALSE(report.quasipositive());
  CHECK(report.violations.front().value == -1.0);
}
