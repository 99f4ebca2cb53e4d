#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>
#include <vector>

#include "rdlearn/kernels.hpp"
#include "rdlearn/reaction.hpp"
#include "rdlearn/sampling.hpp"

using rdlearn::kernels::Exec;

namespace {

Exec exec_of(const benchmark::State& state) { return state.range(1) == 0 ? Exec::serial : Exec::parallel; }

void label(benchmark::State& state) { state.SetLabel(state.range(1) == 0 ? "serial" : "openmp"); }

void BM_Sum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::sin(static_cast<double>(i));
  for (auto _ : state) {
    benchmark::DoNotOptimize(rdlearn::kernels::sum(n, [&](std::size_t i) { return v[i] * v[i]; }, exec_of(state)));
  }
  label(state);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

/// The network evaluation sweep used by sup-norm and quadrature terms.
void BM_NetworkSup(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const rdlearn::MlpReaction net = rdlearn::MlpReaction::random(rdlearn::MlpArchitecture{{2, 32, 32, 2}}, 1);
  const rdlearn::PointSet points = rdlearn::sobol_points(rdlearn::Box::cube(2, 0.0, 1.0), n);
  for (auto _ : state) {
    const double sup = rdlearn::kernels::max(
        n,
        [&](std::size_t i) {
          double out[2];
          net.evaluate(points[i], out);
          return std::max(std::abs(out[0]), std::abs(out[1]));
        },
        exec_of(state));
    benchmark::DoNotOptimize(sup);
  }
  label(state);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Accumulate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t dim = 64;
  std::vector<double> out;
  for (auto _ : state) {
    rdlearn::kernels::accumulate(
        n, dim,
        [](std::size_t i, double* acc) {
          for (std::size_t j = 0; j < dim; ++j) acc[j] += std::cos(static_cast<double>(i + j));
        },
        out, exec_of(state));
    benchmark::DoNotOptimize(out.data());
  }
  label(state);
}

}  // namespace

BENCHMARK(BM_Sum)->ArgsProduct({{1 << 12, 1 << 16, 1 << 20}, {0, 1}});
BENCHMARK(BM_NetworkSup)->ArgsProduct({{1 << 10, 1 << 14}, {0, 1}});
BENCHMARK(BM_Accumulate)->ArgsProduct({{1 << 10, 1 << 14}, {0, 1}});

BENCHMARK_MAIN();
