#include "rdlearn/rdsolve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "rdlearn/error.hpp"
#include "rdlearn/kernels.hpp"

namespace rdlearn {

// ---------------------------------------------------------------------------
// Grid and storage

void SpaceTimeGrid::validate() const {
  if (extent.empty() || extent.size() > 2) throw InvalidParameter("grids are 1D or 2D");
  if (nodes.size() != extent.size()) throw DimensionMismatch(extent.size(), nodes.size());
  for (std::size_t a = 0; a < extent.size(); ++a) {
    if (!(extent[a] > 0.0) || !std::isfinite(extent[a])) throw InvalidParameter("domain extents must be positive");
    if (nodes[a] < 3) throw InvalidParameter("grids need at least 3 nodes per axis");
  }
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InvalidParameter("time horizon must be positive");
  if (steps == 0) throw InvalidParameter("grids need at least one time step");
}

double SpaceTimeGrid::time(std::size_t k) const {
  return k == steps ? horizon : horizon * static_cast<double>(k) / static_cast<double>(steps);
}

std::size_t SpaceTimeGrid::node_count() const {
  std::size_t n = 1;
  for (auto v : nodes) n *= v;
  return n;
}

double SpaceTimeGrid::volume() const {
  double v = 1.0;
  for (double e : extent) v *= e;
  return v;
}

void SpaceTimeGrid::coordinates(std::size_t i, std::span<double> x) const {
  for (std::size_t a = 0; a < dim(); ++a) {
    const std::size_t idx = i % nodes[a];
    i /= nodes[a];
    x[a] = idx + 1 == nodes[a] ? extent[a] : static_cast<double>(idx) * spacing(a);
  }
}

std::vector<double> SpaceTimeGrid::node_weights() const {
  std::vector<double> w(node_count(), 1.0);
  for (std::size_t a = 0, stride = 1; a < dim(); stride *= nodes[a], ++a) {
    const auto axis = trapezoid_weights_1d(nodes[a], spacing(a));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] *= axis[(i / stride) % nodes[a]];
  }
  return w;
}

SpaceTimeGrid SpaceTimeGrid::refined(std::size_t space, std::size_t time) const {
  SpaceTimeGrid g = *this;
  for (auto& n : g.nodes) n = (n - 1) * space + 1;
  g.steps *= time;
  return g;
}

StateField::StateField(SpaceTimeGrid grid, std::size_t species)
    : grid_(std::move(grid)), species_(species), nodes_(grid_.node_count()) {
  grid_.validate();
  if (species_ == 0) throw InvalidParameter("state needs at least one species");
  values_.assign(slices() * slice_size(), 0.0);
}

void DiffusionSpec::validate(std::size_t species) const {
  if (!(d_min > 0.0)) throw InvalidParameter("diffusion floor d_min must be positive");
  if (d.size() != species) throw DimensionMismatch(species, d.size());
  for (double v : d)
    if (!(v >= d_min) || !std::isfinite(v)) throw InvalidParameter(fmt::format("diffusion {} is below d_min = {}", v, d_min));
}

std::vector<double> sample_initial(const SpaceTimeGrid& grid, std::size_t species, const InitialProfile& u0) {
  grid.validate();
  const std::size_t nodes = grid.node_count();
  std::vector<double> out(species * nodes);
  std::vector<double> x(grid.dim());
  for (std::size_t i = 0; i < nodes; ++i) {
    grid.coordinates(i, x);
    for (std::size_t n = 0; n < species; ++n) out[n * nodes + i] = u0(n, x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Laplacian

namespace {

struct AxisLayout {
  std::size_t length;  // nodes along the axis
  std::size_t stride;  // distance between neighbours in the flat index
  std::size_t lines;   // number of lines along this axis
};

AxisLayout axis_layout(const SpaceTimeGrid& grid, std::size_t axis) {
  std::size_t stride = 1;
  for (std::size_t a = 0; a < axis; ++a) stride *= grid.nodes[a];
  return {grid.nodes[axis], stride, grid.node_count() / grid.nodes[axis]};
}

/// Flat index of the first node of line `line` along an axis.
std::size_t line_start(const AxisLayout& lay, std::size_t line) {
  return (line / lay.stride) * lay.stride * lay.length + line % lay.stride;
}

void laplacian_impl(const SpaceTimeGrid& grid, std::span<const double> v, std::span<double> out, bool transpose) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t axis = 0; axis < grid.dim(); ++axis) {
    const AxisLayout lay = axis_layout(grid, axis);
    const double s = 1.0 / (grid.spacing(axis) * grid.spacing(axis));
    const std::size_t n = lay.length;
    for (std::size_t line = 0; line < lay.lines; ++line) {
      const std::size_t base = line_start(lay, line);
      auto at = [&](std::size_t j) { return base + j * lay.stride; };
      if (!transpose) {
        out[at(0)] += 2.0 * s * (v[at(1)] - v[at(0)]);
        for (std::size_t j = 1; j + 1 < n; ++j) out[at(j)] += s * (v[at(j - 1)] - 2.0 * v[at(j)] + v[at(j + 1)]);
        out[at(n - 1)] += 2.0 * s * (v[at(n - 2)] - v[at(n - 1)]);
      } else {
        // Column j of A collects the coefficients of u_j in every row.
        for (std::size_t j = 0; j < n; ++j) {
          double acc = -2.0 * v[at(j)];
          if (j >= 1) acc += (j - 1 == 0 ? 2.0 : 1.0) * v[at(j - 1)];
          if (j + 1 < n) acc += (j + 1 == n - 1 ? 2.0 : 1.0) * v[at(j + 1)];
          out[at(j)] += s * acc;
        }
      }
    }
  }
}

/// Factored tridiagonal system for the implicit diffusion step along one axis.
class TridiagonalSolver {
 public:
  TridiagonalSolver(std::size_t n, double r, BoundaryKind boundary) : lower_(n), cprime_(n), inv_(n) {
    std::vector<double> a(n, -r), b(n, 1.0 + 2.0 * r), c(n, -r);
    a[0] = 0.0;
    c[n - 1] = 0.0;
    if (boundary == BoundaryKind::neumann) {
      c[0] = -2.0 * r;
      a[n - 1] = -2.0 * r;
    } else {
      b[0] = b[n - 1] = 1.0;
      c[0] = a[n - 1] = 0.0;
    }
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double denom = b[i] - a[i] * prev;
      inv_[i] = 1.0 / denom;
      cprime_[i] = c[i] * inv_[i];
      lower_[i] = a[i];
      prev = cprime_[i];
    }
  }

  void solve(double* x, std::size_t stride) const {
    const std::size_t n = inv_.size();
    double prev = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double& xi = x[i * stride];
      xi = (xi - lower_[i] * prev) * inv_[i];
      prev = xi;
    }
    for (std::size_t i = n - 1; i-- > 0;) x[i * stride] -= cprime_[i] * x[(i + 1) * stride];
  }

 private:
  std::vector<double> lower_, cprime_, inv_;
};

std::optional<Box> state_range(std::span<const double> slice, std::size_t species, std::size_t nodes) {
  std::vector<double> lo(species), hi(species);
  for (std::size_t n = 0; n < species; ++n) {
    const auto s = slice.subspan(n * nodes, nodes);
    const auto [mn, mx] = std::minmax_element(s.begin(), s.end());
    lo[n] = *mn;
    hi[n] = *mx;
  }
  // Pad by 25% of the width (or of the magnitude for flat ranges).
  for (std::size_t n = 0; n < species; ++n) {
    const double width = hi[n] - lo[n];
    const double pad = 0.25 * (width > 1e-12 ? width : std::max(1.0, std::abs(hi[n])));
    lo[n] -= pad;
    hi[n] += pad;
  }
  return Box(lo, hi);
}

bool box_covers(const Box& box, std::span<const double> slice, std::size_t species, std::size_t nodes) {
  for (std::size_t n = 0; n < species; ++n)
    for (std::size_t i = 0; i < nodes; ++i) {
      const double v = slice[n * nodes + i];
      if (v < box.lo[n] || v > box.hi[n]) return false;
    }
  return true;
}

Box box_union(const Box& a, const Box& b) {
  std::vector<double> lo(a.dim()), hi(a.dim());
  for (std::size_t j = 0; j < a.dim(); ++j) {
    lo[j] = std::min(a.lo[j], b.lo[j]);
    hi[j] = std::max(a.hi[j], b.hi[j]);
  }
  return Box(lo, hi);
}

}  // namespace

void apply_laplacian(const SpaceTimeGrid& grid, std::span<const double> v, std::span<double> out) {
  laplacian_impl(grid, v, out, false);
}

void apply_laplacian_transpose(const SpaceTimeGrid& grid, std::span<const double> v, std::span<double> out) {
  laplacian_impl(grid, v, out, true);
}

double slice_mass(const StateField& field, std::size_t k, std::span<const double> weights) {
  const auto w = field.grid().node_weights();
  double mass = 0.0;
  for (std::size_t n = 0; n < field.species(); ++n) {
    const auto s = field.species_slice(k, n);
    double m = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) m += w[i] * s[i];
    mass += (weights.empty() ? 1.0 : weights[n]) * m;
  }
  return mass;
}

// ---------------------------------------------------------------------------
// Solver

Solution solve(const ReactionTerm& f, const DiffusionSpec& diffusion, std::span<const double> u0,
               const SpaceTimeGrid& grid, const SolveOptions& options) {
  grid.validate();
  const std::size_t species = f.species();
  diffusion.validate(species);
  const std::size_t nodes = grid.node_count();
  if (u0.size() != species * nodes) throw DimensionMismatch(species * nodes, u0.size());
  for (double v : u0) {
    if (!std::isfinite(v)) throw InvalidParameter("initial data must be finite");
    if (v < 0.0) throw InvalidParameter("initial data must be nonnegative");
  }
  const bool dirichlet = options.boundary == BoundaryKind::dirichlet;
  if (dirichlet && options.dirichlet_values.size() != species)
    throw DimensionMismatch(species, options.dirichlet_values.size());
  std::vector<double> weights = options.weights.empty() ? std::vector<double>(species, 1.0) : options.weights;
  if (weights.size() != species) throw DimensionMismatch(species, weights.size());

  const double dt = grid.dt();
  Solution sol{StateField(grid, species), {}};
  StateField& field = sol.field;
  std::copy(u0.begin(), u0.end(), field.slice(0).begin());
  SolveDiagnostics& diag = sol.diagnostics;

  // Stability guard: dt * L <= 0.5 on a box containing the states.
  auto check_guard = [&](const Box& box) {
    if (auto bound = f.lipschitz_bound(&box)) {
      diag.guard_lipschitz = *bound;
      diag.guard_certified = true;
    } else {
      diag.guard_lipschitz = estimate_lipschitz(f, box, options.guard_samples);
      diag.guard_certified = false;
    }
    diag.guard_box = box;
    if (dt * diag.guard_lipschitz > 0.5) {
      const double suggested = 0.5 / diag.guard_lipschitz;
      throw StabilityError(fmt::format("time step {} violates dt * L <= 0.5 with L = {} ({}); use dt <= {}", dt,
                                       diag.guard_lipschitz, diag.guard_certified ? "certified" : "sampled",
                                       suggested),
                           suggested);
    }
  };
  if (options.stability_guard) {
    Box box = options.guard_box ? *options.guard_box : *state_range(field.slice(0), species, nodes);
    if (box.dim() != species) throw DimensionMismatch(species, box.dim());
    if (!box_covers(box, field.slice(0), species, nodes)) box = box_union(box, *state_range(field.slice(0), species, nodes));
    check_guard(box);
  }

  // Boundary masks and one factored solver per (species, axis).
  std::vector<char> on_boundary(nodes, 0);
  if (dirichlet) {
    std::vector<double> x(grid.dim());
    for (std::size_t i = 0; i < nodes; ++i) {
      std::size_t rest = i;
      for (std::size_t a = 0; a < grid.dim(); ++a) {
        const std::size_t idx = rest % grid.nodes[a];
        rest /= grid.nodes[a];
        if (idx == 0 || idx + 1 == grid.nodes[a]) on_boundary[i] = 1;
      }
    }
  }
  std::vector<std::vector<TridiagonalSolver>> solvers(species);
  for (std::size_t n = 0; n < species; ++n)
    for (std::size_t a = 0; a < grid.dim(); ++a) {
      const double h = grid.spacing(a);
      solvers[n].emplace_back(grid.nodes[a], dt * diffusion.d[n] / (h * h), options.boundary);
    }

  std::vector<double> coords;
  if (options.source) {
    coords.resize(nodes * grid.dim());
    for (std::size_t i = 0; i < nodes; ++i) grid.coordinates(i, {coords.data() + i * grid.dim(), grid.dim()});
  }

  for (std::size_t k = 0; k < grid.steps; ++k) {
    const auto cur = field.slice(k);
    auto next = field.slice(k + 1);
    const double t = grid.time(k);

    // Explicit reaction (and source) step.
    kernels::for_each_block(nodes, [&](std::size_t, std::size_t begin, std::size_t end) {
      std::vector<double> u(species), r(species);
      for (std::size_t i = begin; i < end; ++i) {
        for (std::size_t n = 0; n < species; ++n) u[n] = cur[n * nodes + i];
        f.evaluate(u, r);
        for (std::size_t n = 0; n < species; ++n) {
          double rate = r[n];
          if (options.source) rate += options.source(n, t, {coords.data() + i * grid.dim(), grid.dim()});
          next[n * nodes + i] = dirichlet && on_boundary[i] ? options.dirichlet_values[n] : u[n] + dt * rate;
        }
      }
    });

    // Implicit diffusion: one tridiagonal sweep per axis (ADI factorisation in 2D).
    for (std::size_t a = 0; a < grid.dim(); ++a) {
      const AxisLayout lay = axis_layout(grid, a);
      kernels::for_each_index(species * lay.lines, [&](std::size_t job) {
        const std::size_t n = job / lay.lines;
        const std::size_t line = job % lay.lines;
        solvers[n][a].solve(next.data() + n * nodes + line_start(lay, line), lay.stride);
      });
    }

    for (std::size_t i = 0; i < next.size(); ++i)
      if (!std::isfinite(next[i]))
        throw BlowUpError(fmt::format("non-finite state at step {} (t = {})", k + 1, grid.time(k + 1)), k + 1);

    if (options.stability_guard && !box_covers(*diag.guard_box, next, species, nodes))
      check_guard(box_union(*diag.guard_box, *state_range(next, species, nodes)));
  }

  diag.min_u.resize(field.slices());
  diag.mass.resize(field.slices());
  for (std::size_t k = 0; k < field.slices(); ++k) {
    const auto s = field.slice(k);
    diag.min_u[k] = *std::min_element(s.begin(), s.end());
    diag.mass[k] = slice_mass(field, k, weights);
  }
  diag.min_overall = *std::min_element(diag.min_u.begin(), diag.min_u.end());
  return sol;
}

// ---------------------------------------------------------------------------
// Verification

MassAudit mass_audit(const StateField& traj, std::span<const double> weights, double k0, double k1,
                     double tolerance) {
  const std::size_t species = traj.species();
  std::vector<double> ones(species, 1.0);
  if (!weights.empty() && weights.size() != species) throw DimensionMismatch(species, weights.size());
  const double dt = traj.grid().dt();
  const double volume = traj.grid().volume();
  MassAudit audit;
  audit.tolerance = tolerance;
  audit.worst_margin = -std::numeric_limits<double>::infinity();
  double prev = slice_mass(traj, 0, weights);
  for (std::size_t k = 0; k + 1 < traj.slices(); ++k) {
    const double next = slice_mass(traj, k + 1, weights);
    const double total = slice_mass(traj, k, ones);
    const double margin = (next - prev) / dt - (k0 * volume + k1 * total);
    audit.margins.push_back(margin);
    audit.worst_margin = std::max(audit.worst_margin, margin);
    prev = next;
  }
  return audit;
}

double estimate_mass_tolerance(const ReactionTerm& f, const DiffusionSpec& diffusion, const InitialProfile& u0,
                               const SpaceTimeGrid& grid, const SolveOptions& options) {
  const SpaceTimeGrid fine = grid.refined(2, 2);
  const std::size_t species = f.species();
  const auto coarse = solve(f, diffusion, sample_initial(grid, species, u0), grid, options);
  const auto refined = solve(f, diffusion, sample_initial(fine, species, u0), fine, options);
  const double dt = grid.dt();
  double worst = 0.0, scale = 1.0;
  for (std::size_t k = 0; k < grid.steps; ++k) {
    const double rc = (coarse.diagnostics.mass[k + 1] - coarse.diagnostics.mass[k]) / dt;
    const double rf = (refined.diagnostics.mass[2 * k + 2] - refined.diagnostics.mass[2 * k]) / dt;
    worst = std::max(worst, std::abs(rc - rf));
    scale = std::max({scale, std::abs(rc), std::abs(coarse.diagnostics.mass[k])});
  }
  const double h = grid.spacing(0);
  const double c = worst / (h * h + dt);
  return c * (h * h + dt) + 1e-10 * scale;
}

double manufactured_solution(double t, double x, double length) {
  return std::exp(-t) * (1.0 + std::cos(std::numbers::pi * x / length));
}

namespace {

double manufactured_error(const ManufacturedSetup& s, std::size_t nodes, std::size_t steps) {
  const SpaceTimeGrid grid{{s.length}, {nodes}, s.horizon, steps};
  const double L = s.length;
  const double k = std::numbers::pi / L;
  const double d = s.diffusion;
  const bool reaction = s.with_reaction;
  ReactionPtr f = reaction ? ReactionPtr(std::make_shared<CatalogReaction>(CatalogReaction::Model::fisher_kpp))
                           : ReactionPtr(std::make_shared<LinearReaction>(Matrix::Zero(1, 1), Vector::Zero(1)));
  SolveOptions opt;
  opt.source = [=](std::size_t, double t, std::span<const double> x) {
    const double u = manufactured_solution(t, x[0], L);
    const double lap = -std::exp(-t) * k * k * std::cos(k * x[0]);
    double s_val = -u - d * lap;
    if (reaction) s_val -= u * (1.0 - u);
    return s_val;
  };
  const auto u0 = sample_initial(grid, 1, [&](std::size_t, std::span<const double> x) {
    return manufactured_solution(0.0, x[0], L);
  });
  const auto sol = solve(*f, DiffusionSpec{{d}}, u0, grid, opt);
  const auto last = sol.field.species_slice(grid.steps, 0);
  double err = 0.0;
  std::vector<double> x(1);
  for (std::size_t i = 0; i < nodes; ++i) {
    grid.coordinates(i, x);
    err = std::max(err, std::abs(last[i] - manufactured_solution(s.horizon, x[0], L)));
  }
  return err;
}

}  // namespace

ConvergenceStudy manufactured_convergence(const ManufacturedSetup& s) {
  if (s.refinements < 1) throw InsufficientData("convergence study needs at least one refinement");
  ConvergenceStudy study;
  std::vector<double> hs, es, dts, ets;
  for (std::size_t r = 0; r <= s.refinements; ++r) {
    const std::size_t nodes = (s.base_nodes - 1) * (std::size_t{1} << r) + 1;
    const double h = s.length / static_cast<double>(nodes - 1);
    const auto steps = static_cast<std::size_t>(std::ceil(s.horizon / (s.space_dt_factor * h * h)));
    const double err = manufactured_error(s, nodes, steps);
    study.space.push_back({h, s.horizon / static_cast<double>(steps), err});
    hs.push_back(h);
    es.push_back(err);
  }
  for (std::size_t r = 0; r <= s.refinements; ++r) {
    const std::size_t steps = s.base_steps << r;
    const double err = manufactured_error(s, s.time_nodes, steps);
    const double dt = s.horizon / static_cast<double>(steps);
    study.time.push_back({s.length / static_cast<double>(s.time_nodes - 1), dt, err});
    dts.push_back(dt);
    ets.push_back(err);
  }
  study.space_slope = loglog_slope(hs, es);
  study.time_slope = loglog_slope(dts, ets);
  return study;
}

SelfConvergence self_convergence(const ReactionTerm& f, const DiffusionSpec& diffusion, const InitialProfile& u0,
                                 const SpaceTimeGrid& grid, const SolveOptions& options) {
  const std::size_t species = f.species();
  std::vector<Solution> sols;
  std::vector<SpaceTimeGrid> grids;
  for (std::size_t level = 0; level < 3; ++level) {
    const std::size_t factor = std::size_t{1} << level;
    grids.push_back(grid.refined(factor, factor * factor));
    sols.push_back(solve(f, diffusion, sample_initial(grids.back(), species, u0), grids.back(), options));
  }
  // Compare consecutive grids on the nodes of the coarsest one.
  auto fine_index = [&](const SpaceTimeGrid& fine, std::size_t coarse_i, std::size_t factor) {
    std::size_t out = 0, stride = 1, rest = coarse_i;
    for (std::size_t a = 0; a < grid.dim(); ++a) {
      const std::size_t idx = rest % grid.nodes[a];
      rest /= grid.nodes[a];
      out += idx * factor * stride;
      stride *= fine.nodes[a];
    }
    return out;
  };
  SelfConvergence sc;
  for (std::size_t level = 0; level + 1 < 3; ++level) {
    const std::size_t fa = std::size_t{1} << level;
    const std::size_t fb = fa * 2;
    double diff = 0.0;
    for (std::size_t n = 0; n < species; ++n) {
      const auto a = sols[level].field.species_slice(grids[level].steps, n);
      const auto b = sols[level + 1].field.species_slice(grids[level + 1].steps, n);
      for (std::size_t i = 0; i < grid.node_count(); ++i)
        diff = std::max(diff, std::abs(a[fine_index(grids[level], i, fa)] - b[fine_index(grids[level + 1], i, fb)]));
    }
    sc.differences.push_back(diff);
  }
  sc.order = std::log2(sc.differences[0] / sc.differences[1]);
  return sc;
}

}  // namespace rdlearn
