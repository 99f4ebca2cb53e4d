#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace rdlearn {

/// Axis-aligned box [lo, hi] in R^N.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  Box() = default;
  Box(std::vector<double> lo_, std::vector<double> hi_);
  static Box cube(std::size_t dim, double lo, double hi);

  std::size_t dim() const { return lo.size(); }
  double width(std::size_t i) const { return hi[i] - lo[i]; }
  double volume() const;
  bool contains(std::span<const double> x) const;
  /// Parses "LO..HI" (same bounds on every axis) or "a,b..c,d".
  static Box parse(const std::string& text, std::size_t dim);
};

/// Flat storage of `size()` points of dimension `dim`.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t dim, std::vector<double> coords);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<double> mutable_point(std::size_t i) { return {coords_.data() + i * dim_, dim_}; }
  const std::vector<double>& coords() const { return coords_; }
  void append(std::span<const double> x);

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

/// Low-discrepancy Sobol points mapped into the box. `skip` drops leading
/// points of the sequence (the first Sobol point is the lower corner).
PointSet sobol_points(const Box& box, std::size_t count, std::size_t skip = 0);

/// The 2^N corners of the box.
PointSet box_corners(const Box& box);

/// Tensor grid with `per_axis` nodes per axis (endpoints included) and the
/// matching composite-trapezoid weights.
struct WeightedGrid {
  PointSet points;
  std::vector<double> weights;
};
WeightedGrid trapezoid_grid(const Box& box, std::size_t per_axis);

/// Composite-trapezoid weights for `nodes` equispaced nodes with spacing h.
std::vector<double> trapezoid_weights_1d(std::size_t nodes, double h);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace rdlearn
