#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <vector>

#include "rdlearn/kernels.hpp"

using namespace rdlearn::kernels;

namespace {

double term(std::size_t i) { return std::sin(0.37 * static_cast<double>(i)) / (1.0 + 1e-3 * static_cast<double>(i)); }

}  // namespace

TEST_CASE("blocked sum agrees with the serial reference") {
  for (std::size_t n : {0u, 1u, 255u, 256u, 257u, 10000u}) {
    const double serial = sum(n, term, Exec::serial);
    const double parallel = sum(n, term, Exec::parallel);
    CHECK(parallel == doctest::Approx(serial).epsilon(1e-12));
  }
}

TEST_CASE("parallel reductions do not depend on the thread count") {
  const std::size_t n = 12345;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const double one = sum(n, term);
  const ArgMax best_one = argmax(n, term);
  omp_set_num_threads(4);
  const double four = sum(n, term);
  const ArgMax best_four = argmax(n, term);
  omp_set_num_threads(saved);
  CHECK(one == four);
  CHECK(best_one.index == best_four.index);
  CHECK(best_one.value == best_four.value);
}

TEST_CASE("argmax picks the lowest index on ties and flags NaN") {
  std::vector<double> v{1.0, 3.0, 2.0, 3.0};
  auto at = [&](std::size_t i) { return v[i]; };
  CHECK(argmax(v.size(), at).index == 1);
  CHECK(argmax(v.size(), at, Exec::serial).index == 1);

  v[2] = std::nan("");
  const ArgMax best = argmax(v.size(), at);
  CHECK(best.index == 2);
  CHECK(std::isinf(best.value));
  CHECK(std::isinf(max(0, at)));
}

TEST_CASE("accumulate matches the serial reference") {
  const std::size_t n = 3000, dim = 5;
  auto body = [](std::size_t i, double* acc) {
    for (std::size_t j = 0; j < dim; ++j) acc[j] += term(i * dim + j);
  };
  std::vector<double> a, b;
  accumulate(n, dim, body, a, Exec::serial);
  accumulate(n, dim, body, b, Exec::parallel);
  REQUIRE(a.size() == dim);
  for (std::size_t j = 0; j < dim; ++j) CHECK(b[j] == doctest::Approx(a[j]).epsilon(1e-12));
}

TEST_CASE("for_each_block covers the range exactly once") {
  const std::size_t n = 1000;
  std::vector<int> hits(n, 0);
  for_each_block(n, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) ++hits[i];
  });
  for (int h : hits) CHECK(h == 1);
}
