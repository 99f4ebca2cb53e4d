#include "rdlearn/sampling.hpp"

#include <boost/random/sobol.hpp>

#include <cmath>
#include <sstream>

#include "rdlearn/error.hpp"

namespace rdlearn {

Box::Box(std::vector<double> lo_, std::vector<double> hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size()) throw DimensionMismatch(lo.size(), hi.size());
  if (lo.empty()) throw InvalidParameter("box must have at least one axis");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(hi[i] > lo[i])) throw InvalidParameter("degenerate box axis " + std::to_string(i));
}

Box Box::cube(std::size_t dim, double lo, double hi) {
  return Box(std::vector<double>(dim, lo), std::vector<double>(dim, hi));
}

double Box::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < dim(); ++i) v *= width(i);
  return v;
}

bool Box::contains(std::span<const double> x) const {
  if (x.size() != dim()) return false;
  for (std::size_t i = 0; i < dim(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

namespace {

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw InvalidParameter("cannot parse box bound '" + item + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos)
      throw InvalidParameter("cannot parse box bound '" + item + "'");
    out.push_back(v);
  }
  return out;
}

}  // namespace

Box Box::parse(const std::string& text, std::size_t dim) {
  const auto sep = text.find("..");
  if (sep == std::string::npos) throw InvalidParameter("box must look like LO..HI, got '" + text + "'");
  auto lo = parse_list(text.substr(0, sep));
  auto hi = parse_list(text.substr(sep + 2));
  if (lo.size() == 1) lo.assign(dim, lo[0]);
  if (hi.size() == 1) hi.assign(dim, hi[0]);
  if (lo.size() != dim || hi.size() != dim)
    throw InvalidParameter("box '" + text + "' does not have " + std::to_string(dim) + " axes");
  return Box(std::move(lo), std::move(hi));
}

PointSet::PointSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0 || coords_.size() % dim_ != 0) throw InvalidParameter("point coordinates do not match dimension");
}

void PointSet::append(std::span<const double> x) {
  if (dim_ == 0) dim_ = x.size();
  if (x.size() != dim_) throw DimensionMismatch(dim_, x.size());
  coords_.insert(coords_.end(), x.begin(), x.end());
}

PointSet sobol_points(const Box& box, std::size_t count, std::size_t skip) {
  const std::size_t dim = box.dim();
  boost::random::sobol engine(dim);
  engine.discard(skip * dim);
  std::vector<double> coords(count * dim);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double unit = std::ldexp(static_cast<double>(engine()), -64);
      coords[i * dim + j] = std::min(box.hi[j], box.lo[j] + unit * box.width(j));
    }
  }
  return PointSet(dim, std::move(coords));
}

PointSet box_corners(const Box& box) {
  const std::size_t dim = box.dim();
  const std::size_t count = std::size_t{1} << dim;
  std::vector<double> coords(count * dim);
  for (std::size_t c = 0; c < count; ++c)
    for (std::size_t j = 0; j < dim; ++j) coords[c * dim + j] = ((c >> j) & 1U) ? box.hi[j] : box.lo[j];
  return PointSet(dim, std::move(coords));
}

std::vector<double> trapezoid_weights_1d(std::size_t nodes, double h) {
  if (nodes < 2) throw InvalidParameter("trapezoid rule needs at least two nodes");
  std::vector<double> w(nodes, h);
  w.front() = w.back() = 0.5 * h;
  return w;
}

WeightedGrid trapezoid_grid(const Box& box, std::size_t per_axis) {
  const std::size_t dim = box.dim();
  std::vector<std::vector<double>> axis_w(dim);
  std::vector<double> h(dim);
  std::size_t total = 1;
  for (std::size_t j = 0; j < dim; ++j) {
    h[j] = box.width(j) / static_cast<double>(per_axis - 1);
    axis_w[j] = trapezoid_weights_1d(per_axis, h[j]);
    total *= per_axis;
  }
  std::vector<double> coords(total * dim);
  std::vector<double> weights(total, 1.0);
  for (std::size_t p = 0; p < total; ++p) {
    std::size_t rest = p;
    for (std::size_t j = 0; j < dim; ++j) {
      const std::size_t idx = rest % per_axis;
      rest /= per_axis;
      coords[p * dim + j] = idx + 1 == per_axis ? box.hi[j] : box.lo[j] + static_cast<double>(idx) * h[j];
      weights[p] *= axis_w[j][idx];
    }
  }
  return {PointSet(dim, std::move(coords)), std::move(weights)};
}

double loglog_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DimensionMismatch(x.size(), y.size());
  if (x.size() < 2) throw InsufficientData("slope fit needs at least two points");
  double mx = 0.0, my = 0.0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(y[i]) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace rdlearn
