#pragma once

// Forward solver for reaction-diffusion systems
//
//   d_t u_n = d_n Laplace(u_n) + f_n(u) (+ s_n(t, x))
//
// on [0, L_1] x ... (1D or 2D) with homogeneous Neumann (or fixed Dirichlet)
// boundaries. Time stepping is IMEX: the diffusion part is implicit, the
// reaction part explicit,
//
//   (I - dt d_n A) u_n^{k+1} = u_n^k + dt (f_n(u^k) + s_n(t_k)),
//
// where A is the second-order mirror-ghost Laplacian.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rdlearn/reaction.hpp"
#include "rdlearn/sampling.hpp"

namespace rdlearn {

struct SpaceTimeGrid {
  std::vector<double> extent;       // domain [0, extent[a]] per axis
  std::vector<std::size_t> nodes;   // nodes per axis, >= 3
  double horizon = 1.0;             // T
  std::size_t steps = 1;

  void validate() const;
  std::size_t dim() const { return extent.size(); }
  double spacing(std::size_t axis) const { return extent[axis] / static_cast<double>(nodes[axis] - 1); }
  double dt() const { return horizon / static_cast<double>(steps); }
  double time(std::size_t k) const;
  std::size_t node_count() const;
  double volume() const;
  /// Coordinates of flat node index i (axis 0 varies fastest).
  void coordinates(std::size_t i, std::span<double> x) const;
  /// Tensor trapezoid weights for integrals over the domain.
  std::vector<double> node_weights() const;
  /// Spatial refinement by `space` (nodes - 1 multiplied) and temporal by `time`.
  SpaceTimeGrid refined(std::size_t space, std::size_t time) const;

  bool operator==(const SpaceTimeGrid&) const = default;
};

/// Trajectory storage, slice-major: value(k, n, i) for time slice k,
/// species n and node i.
class StateField {
 public:
  StateField() = default;
  StateField(SpaceTimeGrid grid, std::size_t species);

  const SpaceTimeGrid& grid() const { return grid_; }
  std::size_t species() const { return species_; }
  std::size_t slices() const { return grid_.steps + 1; }
  std::size_t nodes() const { return nodes_; }
  std::size_t slice_size() const { return species_ * nodes_; }

  double& at(std::size_t k, std::size_t n, std::size_t i) { return values_[(k * species_ + n) * nodes_ + i]; }
  double at(std::size_t k, std::size_t n, std::size_t i) const { return values_[(k * species_ + n) * nodes_ + i]; }
  std::span<double> slice(std::size_t k) { return {values_.data() + k * slice_size(), slice_size()}; }
  std::span<const double> slice(std::size_t k) const { return {values_.data() + k * slice_size(), slice_size()}; }
  std::span<double> species_slice(std::size_t k, std::size_t n) {
    return {values_.data() + (k * species_ + n) * nodes_, nodes_};
  }
  std::span<const double> species_slice(std::size_t k, std::size_t n) const {
    return {values_.data() + (k * species_ + n) * nodes_, nodes_};
  }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

 private:
  SpaceTimeGrid grid_;
  std::size_t species_ = 0;
  std::size_t nodes_ = 0;
  std::vector<double> values_;
};

struct DiffusionSpec {
  std::vector<double> d;  // per species
  double d_min = 1e-6;

  void validate(std::size_t species) const;
};

enum class BoundaryKind { neumann, dirichlet };

/// Extra forcing s_n(t, x), used by the manufactured-solution study.
using SourceTerm = std::function<double(std::size_t species, double t, std::span<const double> x)>;
/// Initial data u_{0,n}(x).
using InitialProfile = std::function<double(std::size_t species, std::span<const double> x)>;

struct SolveOptions {
  BoundaryKind boundary = BoundaryKind::neumann;
  std::vector<double> dirichlet_values;  // per species, used with BoundaryKind::dirichlet
  std::vector<double> weights;           // c_n for the mass diagnostic (default ones)
  SourceTerm source;
  bool stability_guard = true;
  /// Box of states used for the guard; default: range of u0 padded by 25%.
  /// The box is widened (and the guard re-checked) when states leave it.
  std::optional<Box> guard_box;
  /// Samples for the Lipschitz estimate when no certified bound exists.
  std::size_t guard_samples = 2000;
};

struct SolveDiagnostics {
  std::vector<double> min_u;  // per slice
  std::vector<double> mass;   // per slice: sum_n c_n * trapezoid integral of u_n
  double min_overall = 0.0;
  double guard_lipschitz = 0.0;
  bool guard_certified = false;
  std::optional<Box> guard_box;
};

struct Solution {
  StateField field;
  SolveDiagnostics diagnostics;
};

/// Samples the initial profile on the grid nodes (layout [n][i]).
std::vector<double> sample_initial(const SpaceTimeGrid& grid, std::size_t species, const InitialProfile& u0);

Solution solve(const ReactionTerm& f, const DiffusionSpec& diffusion, std::span<const double> u0,
               const SpaceTimeGrid& grid, const SolveOptions& options = {});

/// out = A v for one species field (Neumann mirror-ghost stencil).
void apply_laplacian(const SpaceTimeGrid& grid, std::span<const double> v, std::span<double> out);
/// out = A^T v.
void apply_laplacian_transpose(const SpaceTimeGrid& grid, std::span<const double> v, std::span<double> out);

/// Weighted trapezoid mass sum_n c_n int u_n of slice k.
double slice_mass(const StateField& field, std::size_t k, std::span<const double> weights);

// ---------------------------------------------------------------------------
// Verification

struct MassAudit {
  std::vector<double> margins;  // per step
  double worst_margin = 0.0;
  double tolerance = 0.0;
  bool passed() const { return worst_margin <= tolerance; }
};

/// margin_k = (M_{k+1} - M_k)/dt - (K0 |Omega| + K1 sum_n int u_n^k), with
/// M = sum_n c_n int u_n.
MassAudit mass_audit(const StateField& traj, std::span<const double> weights, double k0, double k1,
                     double tolerance);

/// Discretisation tolerance C (h^2 + dt) for the mass audit: C is the largest
/// difference between mass rates on the grid and on a grid refined twice in
/// space and time, divided by (h^2 + dt). A round-off floor of 1e-10 times the
/// rate scale is added.
double estimate_mass_tolerance(const ReactionTerm& f, const DiffusionSpec& diffusion, const InitialProfile& u0,
                               const SpaceTimeGrid& grid, const SolveOptions& options = {});

struct ConvergencePoint {
  double h = 0.0;
  double dt = 0.0;
  double error = 0.0;
};

struct ConvergenceStudy {
  std::vector<ConvergencePoint> space;
  std::vector<ConvergencePoint> time;
  double space_slope = 0.0;
  double time_slope = 0.0;
};

struct ManufacturedSetup {
  double length = 1.0;
  double horizon = 0.5;
  double diffusion = 0.1;
  std::size_t refinements = 4;          // halvings after the base grid
  std::size_t base_nodes = 17;          // spatial study: nodes on the coarsest grid
  double space_dt_factor = 0.5;         // spatial study: dt = factor * h^2
  std::size_t time_nodes = 801;         // temporal study: fixed fine grid
  std::size_t base_steps = 8;           // temporal study: steps on the coarsest grid
  bool with_reaction = true;            // Fisher-KPP reaction plus matching source
};

/// Exact solution e^{-t} (1 + cos(pi x / L)).
double manufactured_solution(double t, double x, double length);

/// Max-norm errors at the final time for successive refinements and their
/// log-log slopes against h and dt.
ConvergenceStudy manufactured_convergence(const ManufacturedSetup& setup = {});

struct SelfConvergence {
  std::vector<double> differences;  // max |u_h - u_{h/2}| on the coarse nodes at T
  double order = 0.0;
};

/// Richardson-type spatial order from three grids (h, h/2, h/4), with dt
/// scaled by 1/4 per halving.
SelfConvergence self_convergence(const ReactionTerm& f, const DiffusionSpec& diffusion, const InitialProfile& u0,
                                 const SpaceTimeGrid& grid, const SolveOptions& options = {});

}  // namespace rdlearn
