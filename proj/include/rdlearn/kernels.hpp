#pragma once

// Data-parallel loop kernels. Every kernel has an OpenMP path and a plain
// serial reference path; the reference path is kept for tests and for the
// benchmark in bench/.
//
// Reductions are computed over fixed-size blocks and the block partials are
// combined in index order, so the parallel result is bit-identical for any
// thread count. The serial reference is a straight loop and may differ from
// the blocked result in the last bits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace rdlearn::kernels {

enum class Exec { serial, parallel };

inline constexpr std::size_t kBlock = 256;

inline std::size_t block_count(std::size_t n) { return (n + kBlock - 1) / kBlock; }

template <class Body>
void for_each_index(std::size_t n, Body&& body, Exec exec = Exec::parallel) {
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

/// Calls body(block, begin, end) for each fixed block of [0, n).
template <class Body>
void for_each_block(std::size_t n, Body&& body, Exec exec = Exec::parallel) {
  const std::size_t blocks = block_count(n);
  for_each_index(
      blocks,
      [&](std::size_t b) {
        const std::size_t begin = b * kBlock;
        body(b, begin, std::min(n, begin + kBlock));
      },
      exec);
}

template <class Term>
double sum(std::size_t n, Term&& term, Exec exec = Exec::parallel) {
  if (exec == Exec::serial) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += term(i);
    return acc;
  }
  std::vector<double> partial(block_count(n), 0.0);
  for_each_block(n, [&](std::size_t b, std::size_t begin, std::size_t end) {
    double acc = 0.0;
    for (std::size_t i = begin; i < end; ++i) acc += term(i);
    partial[b] = acc;
  });
  double total = 0.0;
  for (double p : partial) total += p;
  return total;
}

struct ArgMax {
  double value = -std::numeric_limits<double>::infinity();
  std::size_t index = 0;
};

/// Maximum of term(i) over [0, n); ties resolve to the lowest index. NaN
/// terms are treated as +inf so they are never silently skipped.
template <class Term>
ArgMax argmax(std::size_t n, Term&& term, Exec exec = Exec::parallel) {
  auto fold = [](ArgMax& best, double v, std::size_t i) {
    if (std::isnan(v)) v = std::numeric_limits<double>::infinity();
    if (v > best.value) best = {v, i};
  };
  if (exec == Exec::serial) {
    ArgMax best;
    for (std::size_t i = 0; i < n; ++i) fold(best, term(i), i);
    return best;
  }
  std::vector<ArgMax> partial(block_count(n));
  for_each_block(n, [&](std::size_t b, std::size_t begin, std::size_t end) {
    ArgMax best;
    for (std::size_t i = begin; i < end; ++i) fold(best, term(i), i);
    partial[b] = best;
  });
  ArgMax best;
  for (const auto& p : partial)
    if (p.value > best.value) best = p;
  return best;
}

template <class Term>
double max(std::size_t n, Term&& term, Exec exec = Exec::parallel) {
  return argmax(n, std::forward<Term>(term), exec).value;
}

/// Blocked accumulation of vector-valued contributions, e.g. parameter
/// gradients. body(i, acc) adds item i's contribution into acc (length dim).
/// Partials are summed in block order into out.
template <class Body>
void accumulate(std::size_t n, std::size_t dim, Body&& body, std::vector<double>& out,
                Exec exec = Exec::parallel) {
  out.assign(dim, 0.0);
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i, out.data());
    return;
  }
  const std::size_t blocks = block_count(n);
  std::vector<double> partial(blocks * dim, 0.0);
  for_each_block(n, [&](std::size_t b, std::size_t begin, std::size_t end) {
    double* acc = partial.data() + b * dim;
    for (std::size_t i = begin; i < end; ++i) body(i, acc);
  });
  for (std::size_t b = 0; b < blocks; ++b) {
    const double* acc = partial.data() + b * dim;
    for (std::size_t j = 0; j < dim; ++j) out[j] += acc[j];
  }
}

}  // namespace rdlearn::kernels
