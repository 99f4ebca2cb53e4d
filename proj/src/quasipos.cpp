#include "rdlearn/quasipos.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rdlearn/error.hpp"
#include "rdlearn/kernels.hpp"

namespace rdlearn::quasipos {

LayerMode parse_mode(const std::string& name) {
  if (name == "metric") return LayerMode::metric;
  if (name == "componentwise") return LayerMode::componentwise;
  if (name == "nonlinear") return LayerMode::nonlinear;
  throw InvalidParameter("unknown layer mode '" + name + "' (metric, componentwise, nonlinear)");
}

double section_profile(double x) { return x < 1.0 ? std::sqrt(x) : x * x; }

Domain Domain::orthant(std::size_t dim) {
  if (dim == 0) throw InvalidParameter("domain needs at least one axis");
  return Domain{dim, std::nullopt};
}

Domain Domain::of_box(Box box) {
  for (double lo : box.lo)
    if (lo < 0.0) throw InvalidParameter("boundary-layer boxes must lie in the nonnegative orthant");
  const std::size_t dim = box.dim();
  return Domain{dim, std::move(box)};
}

bool Domain::contains(std::span<const double> x) const {
  if (x.size() != dim) return false;
  if (box) return box->contains(x);
  return std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0; });
}

BoundaryLayer::BoundaryLayer(Domain domain, LayerMode mode, std::size_t component)
    : domain_(std::move(domain)), mode_(mode), component_(component) {
  if (mode_ == LayerMode::metric && !domain_.box)
    throw InvalidParameter("metric layers are defined on boxes; use the nonlinear mode on the orthant");
  if (mode_ == LayerMode::componentwise && component_ >= domain_.dim)
    throw InvalidParameter("layer component out of range");
  for (std::size_t n = 0; n < domain_.dim; ++n)
    if (!domain_.box || domain_.box->lo[n] == 0.0) faces_.push_back(n);
}

double BoundaryLayer::level_value(std::span<const double> x) const {
  if (!domain_.contains(x)) throw InvalidParameter("point outside the layer's domain");
  switch (mode_) {
    case LayerMode::metric: {
      // Inside the box the nearest point of the face {x_n = 0} is the
      // projection, so the distance is x_n in any l^p metric.
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t n : faces_) d = std::min(d, x[n]);
      return d;
    }
    case LayerMode::componentwise:
      return std::abs(x[component_]);
    case LayerMode::nonlinear: {
      double prod = 1.0;
      for (double v : x) prod *= section_profile(v);
      return prod;
    }
  }
  return std::numeric_limits<double>::infinity();
}

bool BoundaryLayer::member(std::span<const double> x, double eps) const {
  if (!(eps > 0.0)) throw InvalidParameter("layer width must be positive");
  const double v = level_value(x);
  return mode_ == LayerMode::metric ? v < eps : v <= eps;
}

LayerIndicator::LayerIndicator(BoundaryLayer layer, double eps, double delta)
    : layer_(std::move(layer)), ramp_(eps, delta) {}

double LayerIndicator::operator()(std::span<const double> x) const { return ramp_.evaluate(layer_.level_value(x)); }

ModifiedFunction::ModifiedFunction(ScalarField f, LayerIndicator indicator)
    : f_(std::move(f)), indicator_(std::move(indicator)) {}

double ModifiedFunction::operator()(std::span<const double> x) const {
  const double f = f_(x);
  if (f >= 0.0) return f;
  const double chi = indicator_(x);
  return chi == 1.0 ? 0.0 : f * (1.0 - chi);
}

ModifiedFunction modify(ScalarField f, const BoundaryLayer& layer, double eps, double delta) {
  if (!(delta > 0.0) || !(delta < eps)) throw InvalidParameter("modification needs 0 < delta < eps");
  return ModifiedFunction(std::move(f), LayerIndicator(layer, eps, delta));
}

// ---------------------------------------------------------------------------

double unit_cube_measure(std::size_t dim, double x) {
  if (x < 0.0) throw InvalidParameter("measure argument must be nonnegative");
  return 1.0 - std::pow(1.0 - std::min(x, 1.0), static_cast<double>(dim));
}

namespace {

MeasureEstimate bernoulli_estimate(std::size_t hits, std::size_t samples, double volume) {
  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  MeasureEstimate est;
  est.value = volume * p;
  est.standard_error = volume * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
  est.half_width = 1.96 * est.standard_error;
  return est;
}

}  // namespace

MeasureEstimate measure_monte_carlo(const BoundaryLayer& layer, double x, std::size_t samples, std::uint64_t seed) {
  if (!layer.domain().box) throw InvalidParameter("Monte-Carlo measure needs a bounded domain");
  if (samples == 0) throw InvalidParameter("Monte-Carlo measure needs samples");
  if (x == 0.0 && layer.mode() == LayerMode::metric) return {};
  const Box& box = *layer.domain().box;
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> axes;
  for (std::size_t j = 0; j < box.dim(); ++j) axes.emplace_back(box.lo[j], box.hi[j]);
  std::vector<double> p(box.dim());
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples; ++i) {
    for (std::size_t j = 0; j < box.dim(); ++j) p[j] = axes[j](rng);
    if (layer.member(p, x)) ++hits;
  }
  return bernoulli_estimate(hits, samples, box.volume());
}

MeasureEstimate nonlinear_section_volume(std::size_t dim, double eps, double radius, std::size_t samples,
                                         std::uint64_t seed) {
  if (!(radius > 0.0)) throw InvalidParameter("section volume needs a positive radius");
  const BoundaryLayer layer(Domain::of_box(Box::cube(dim, 0.0, radius)), LayerMode::nonlinear);
  return measure_monte_carlo(layer, eps, samples, seed);
}

PointSet sample_nonlinear_members(std::size_t dim, double eps, double radius, std::size_t count,
                                  std::uint64_t seed) {
  const BoundaryLayer layer(Domain::orthant(dim), LayerMode::nonlinear);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> axis(0.0, radius);
  PointSet members(dim, {});
  std::vector<double> p(dim);
  const std::size_t max_draws = 1000 * count + 100000;
  for (std::size_t draw = 0; members.size() < count; ++draw) {
    if (draw == max_draws) throw InsufficientData("nonlinear section too thin to sample by rejection");
    for (auto& v : p) v = axis(rng);
    if (layer.member(p, eps)) members.append(p);
  }
  return members;
}

// ---------------------------------------------------------------------------

namespace {

void validate_setup(const ApproximationSetup& s) {
  const std::size_t n = s.levels.size();
  if (n == 0) throw InsufficientData("approximation experiment needs at least one level");
  if (s.eps.size() != n || s.delta.size() != n) throw DimensionMismatch(n, std::min(s.eps.size(), s.delta.size()));
  if (!s.layer.domain().box) throw InvalidParameter("approximation experiments run on bounded boxes");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(s.delta[i] > 0.0) || !(s.delta[i] < s.eps[i])) throw InvalidParameter("schedule needs 0 < delta_m < eps_m");
    if (i > 0 && (s.eps[i] > s.eps[i - 1] || s.delta[i] > s.delta[i - 1]))
      throw InvalidParameter("eps and delta schedules must be nonincreasing");
    if (i > 0 && !(s.levels[i] > s.levels[i - 1])) throw InvalidParameter("levels must increase");
  }
  if (s.norm == ErrorNorm::lp && !(s.p >= 1.0)) throw InvalidParameter("L^p error needs p >= 1");
}

struct Quadrature {
  PointSet points;
  std::vector<double> weights;
};

Quadrature error_quadrature(const ApproximationSetup& s) {
  const Box& box = *s.layer.domain().box;
  if (box.dim() <= 2) {
    WeightedGrid g = trapezoid_grid(box, s.grid_per_axis);
    return {std::move(g.points), std::move(g.weights)};
  }
  if (s.norm == ErrorNorm::sup) {
    PointSet pts = sobol_points(box, s.samples);
    const PointSet corners = box_corners(box);
    for (std::size_t i = 0; i < corners.size(); ++i) pts.append(corners[i]);
    return {std::move(pts), std::vector<double>()};
  }
  std::mt19937_64 rng(s.seed);
  std::vector<double> coords(s.samples * box.dim());
  for (std::size_t i = 0; i < s.samples; ++i)
    for (std::size_t j = 0; j < box.dim(); ++j)
      coords[i * box.dim() + j] = std::uniform_real_distribution<double>(box.lo[j], box.hi[j])(rng);
  return {PointSet(box.dim(), std::move(coords)),
          std::vector<double>(s.samples, box.volume() / static_cast<double>(s.samples))};
}

double error_norm(const ApproximationSetup& s, const Quadrature& q, const ScalarField& f, const ScalarField& g) {
  if (s.norm == ErrorNorm::sup)
    return kernels::max(q.points.size(), [&](std::size_t i) { return std::abs(f(q.points[i]) - g(q.points[i])); });
  const double integral = kernels::sum(q.points.size(), [&](std::size_t i) {
    return q.weights[i] * std::pow(std::abs(f(q.points[i]) - g(q.points[i])), s.p);
  });
  return std::pow(integral, 1.0 / s.p);
}

/// Sobol samples of every orthant face {x_n = 0} that bounds the box.
PointSet boundary_points(const ApproximationSetup& s) {
  const Box& box = *s.layer.domain().box;
  const PointSet base = sobol_points(box, s.boundary_samples);
  PointSet out(box.dim(), {});
  for (std::size_t n = 0; n < box.dim(); ++n) {
    if (box.lo[n] != 0.0) continue;
    for (std::size_t i = 0; i < base.size(); ++i) {
      std::vector<double> p(base[i].begin(), base[i].end());
      p[n] = 0.0;
      out.append(p);
    }
  }
  return out;
}

}  // namespace

std::vector<ApproximationRow> approximation_experiment(const ApproximationSetup& setup) {
  validate_setup(setup);
  const Quadrature quad = error_quadrature(setup);
  PointSet faces = boundary_points(setup);
  if (setup.layer.mode() == LayerMode::componentwise) {
    // Only the face of the selected component is covered by the layer.
    PointSet restricted(faces.dim(), {});
    for (std::size_t i = 0; i < faces.size(); ++i)
      if (setup.layer.level_value(faces[i]) == 0.0) restricted.append(faces[i]);
    faces = std::move(restricted);
  }

  std::vector<ApproximationRow> rows;
  for (std::size_t i = 0; i < setup.levels.size(); ++i) {
    const double m = setup.levels[i];
    const ScalarField approx = setup.approximant(m);
    const ModifiedFunction modified = modify(approx, setup.layer, setup.eps[i], setup.delta[i]);
    const ScalarField mod_field = [&modified](std::span<const double> x) { return modified(x); };

    ApproximationRow row;
    row.m = m;
    row.eps = setup.eps[i];
    row.delta = setup.delta[i];
    row.raw_error = error_norm(setup, quad, setup.target, approx);
    row.modified_error = error_norm(setup, quad, setup.target, mod_field);
    for (std::size_t b = 0; b < faces.size(); ++b)
      if (!(modified(faces[b]) >= 0.0)) ++row.boundary_violations;
    rows.push_back(row);
  }
  return rows;
}

std::vector<std::string> shipped_example_names() { return {"uniform-1d", "uniform-2d", "lp-2d", "uniform-3d"}; }

ApproximationSetup shipped_example(const std::string& name, std::size_t levels) {
  if (levels == 0) throw InvalidParameter("need at least one level");
  auto make = [&](Box box, ScalarField target, std::function<ScalarField(double)> approx, double eps0) {
    ApproximationSetup s{BoundaryLayer(Domain::of_box(std::move(box)), LayerMode::metric), std::move(target),
                         std::move(approx), {}, {}, {}};
    for (std::size_t i = 1; i <= levels; ++i) {
      const double m = static_cast<double>(i);
      s.levels.push_back(m);
      s.eps.push_back(eps0 / m);
      s.delta.push_back(0.5 * eps0 / m);
    }
    return s;
  };

  if (name == "uniform-1d") {
    // f(x) = x with sign-alternating constant perturbations.
    return make(
        Box({0.0}, {1.0}), [](std::span<const double> x) { return x[0]; },
        [](double m) {
          const double shift = (static_cast<long>(m) % 2 == 0 ? 1.0 : -1.0) / m;
          return ScalarField([shift](std::span<const double> x) { return x[0] + shift; });
        },
        0.4);
  }
  if (name == "uniform-2d") {
    return make(
        Box({0.0, 0.0}, {1.0, 1.0}), [](std::span<const double> x) { return x[0] * x[1] + 0.1 * x[0]; },
        [](double m) {
          return ScalarField([m](std::span<const double> x) {
            return x[0] * x[1] + 0.1 * x[0] + std::sin(7.0 * x[0]) * std::cos(5.0 * x[1]) / m;
          });
        },
        0.3);
  }
  if (name == "lp-2d") {
    auto s = make(
        Box({0.0, 0.0}, {1.0, 1.0}), [](std::span<const double> x) { return 1.0 + x[0]; },
        [](double m) {
          return ScalarField(
              [m](std::span<const double> x) { return 1.0 + x[0] + (std::cos(3.0 * x[0] + x[1]) - 1.2) / m; });
        },
        0.3);
    s.norm = ErrorNorm::lp;
    s.p = 2.0;
    return s;
  }
  if (name == "uniform-3d") {
    auto s = make(
        Box::cube(3, 0.0, 1.0), [](std::span<const double> x) { return x[0] * x[1] * x[2]; },
        [](double m) {
          return ScalarField([m](std::span<const double> x) {
            return x[0] * x[1] * x[2] - (1.0 + x[0] + x[1] + x[2]) / (4.0 * m);
          });
        },
        0.3);
    s.samples = 20000;
    return s;
  }
  throw InvalidParameter("unknown example '" + name + "'");
}

}  // namespace rdlearn::quasipos
