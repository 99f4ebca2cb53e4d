#pragma once

// Boundary layers near the faces {x_n = 0} of the nonnegative orthant, the
// boundary-layer modification of continuous scalar functions and the
// approximation experiments built on it.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdlearn/sampling.hpp"
#include "rdlearn/transition.hpp"

namespace rdlearn::quasipos {

enum class LayerMode {
  metric,         // distance to the orthant faces that bound the box
  componentwise,  // |x_n| <= eps for one component n
  nonlinear,      // prod_j g(x_j) <= eps on the unbounded orthant
};

LayerMode parse_mode(const std::string& name);

/// g(x) = sqrt(x) for x < 1, x^2 for x >= 1.
double section_profile(double x);

/// Either a box inside [0, inf)^N or the whole orthant (nonlinear mode).
struct Domain {
  std::size_t dim = 1;
  std::optional<Box> box;

  static Domain orthant(std::size_t dim);
  static Domain of_box(Box box);
  bool contains(std::span<const double> x) const;
};

class BoundaryLayer {
 public:
  BoundaryLayer(Domain domain, LayerMode mode, std::size_t component = 0);

  const Domain& domain() const { return domain_; }
  LayerMode mode() const { return mode_; }

  /// Scalar whose sublevel sets are the layers: the distance to the bounding
  /// faces (metric), |x_n| (componentwise) or prod g(x_j) (nonlinear). +inf
  /// when the box touches no orthant face.
  double level_value(std::span<const double> x) const;

  /// Membership in the layer of width eps. Metric layers are open
  /// (distance < eps); the other two are closed.
  bool member(std::span<const double> x, double eps) const;

 private:
  Domain domain_;
  LayerMode mode_;
  std::size_t component_;
  std::vector<std::size_t> faces_;  // axes n with lo_n = 0
};

/// Smooth indicator of the layer: 1 on the eps - delta layer, 0 outside the
/// eps + delta layer, obtained by passing level_value through the 1D ramp.
class LayerIndicator {
 public:
  LayerIndicator(BoundaryLayer layer, double eps, double delta);
  double operator()(std::span<const double> x) const;
  const BoundaryLayer& layer() const { return layer_; }
  double eps() const { return ramp_.eps(); }
  double delta() const { return ramp_.delta(); }

 private:
  BoundaryLayer layer_;
  TransitionFunction ramp_;
};

using ScalarField = std::function<double(std::span<const double>)>;

/// f_{eps,delta} = P+(f) * chi + f * (1 - chi).
class ModifiedFunction {
 public:
  ModifiedFunction(ScalarField f, LayerIndicator indicator);
  double operator()(std::span<const double> x) const;

 private:
  ScalarField f_;
  LayerIndicator indicator_;
};

ModifiedFunction modify(ScalarField f, const BoundaryLayer& layer, double eps, double delta);

// ---------------------------------------------------------------------------
// Boundary measure phi(x) = |Gamma_x|

struct MeasureEstimate {
  double value = 0.0;
  double standard_error = 0.0;
  double half_width = 0.0;  // 1.96 standard errors
};

/// Closed form for the unit cube with all lower faces on the orthant boundary.
double unit_cube_measure(std::size_t dim, double x);

/// Monte-Carlo volume of the layer of width x inside the layer's box.
MeasureEstimate measure_monte_carlo(const BoundaryLayer& layer, double x, std::size_t samples, std::uint64_t seed);

/// Volume of the nonlinear section of width eps inside [0, radius]^N.
MeasureEstimate nonlinear_section_volume(std::size_t dim, double eps, double radius, std::size_t samples,
                                         std::uint64_t seed);

/// Rejection-samples `count` members of the nonlinear section of width eps
/// from [0, radius]^N.
PointSet sample_nonlinear_members(std::size_t dim, double eps, double radius, std::size_t count,
                                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Approximation experiments

enum class ErrorNorm { sup, lp };

struct ApproximationRow {
  double m = 0.0;
  double eps = 0.0;
  double delta = 0.0;
  double raw_error = 0.0;
  double modified_error = 0.0;
  std::size_t boundary_violations = 0;  // samples on the orthant faces where the modified value < 0
};

struct ApproximationSetup {
  BoundaryLayer layer;
  ScalarField target;
  std::function<ScalarField(double m)> approximant;
  std::vector<double> levels;
  std::vector<double> eps;    // nonincreasing, same length as levels
  std::vector<double> delta;  // nonincreasing, delta < eps
  ErrorNorm norm = ErrorNorm::sup;
  double p = 2.0;
  std::size_t grid_per_axis = 200;  // tensor grid for N <= 2
  std::size_t samples = 100000;     // Sobol / Monte-Carlo for N >= 3
  std::size_t boundary_samples = 2000;
  std::uint64_t seed = 1;
};

std::vector<ApproximationRow> approximation_experiment(const ApproximationSetup& setup);

/// Shipped example problems: "uniform-1d", "uniform-2d", "lp-2d", "uniform-3d".
ApproximationSetup shipped_example(const std::string& name, std::size_t levels = 8);
std::vector<std::string> shipped_example_names();

}  // namespace rdlearn::quasipos
