#include "rdlearn/consistency.hpp"

#include <algorithm>
#include <cmath>

#include "rdlearn/error.hpp"
#include "rdlearn/kernels.hpp"

namespace rdlearn {

const char* to_string(LipschitzSource source) {
  switch (source) {
    case LipschitzSource::certified:
      return "certified";
    case LipschitzSource::sampled:
      return "sampled";
    case LipschitzSource::unavailable:
      return "unavailable";
  }
  return "unavailable";
}

ConsistentReaction::ConsistentReaction(ReactionPtr base, TransitionFunction chi, const WrapOptions& options)
    : base_(std::move(base)) {
  if (!base_) throw InvalidParameter("wrapper needs a base reaction");
  chis_.assign(base_->species(), chi);
  compute_constants(options);
}

ConsistentReaction::ConsistentReaction(ReactionPtr base, std::vector<TransitionFunction> chis,
                                       const WrapOptions& options)
    : base_(std::move(base)), chis_(std::move(chis)) {
  if (!base_) throw InvalidParameter("wrapper needs a base reaction");
  if (chis_.size() != base_->species()) throw DimensionMismatch(base_->species(), chis_.size());
  compute_constants(options);
}

void ConsistentReaction::compute_constants(const WrapOptions& options) {
  const std::size_t n = species();
  auto& c = constants_;
  c.weights = options.weights.empty() ? std::vector<double>(n, 1.0) : options.weights;
  if (c.weights.size() != n) throw DimensionMismatch(n, c.weights.size());
  for (double w : c.weights)
    if (!(w > 0.0)) throw InvalidParameter("mass weights c_n must be positive");

  std::vector<double> zero(n, 0.0), f0(n);
  base_->evaluate(zero, f0);
  double csum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    c.k0 += c.weights[i] * std::max(f0[i], 0.0);
    c.max_abs_at_zero = std::max(c.max_abs_at_zero, std::abs(f0[i]));
    csum += c.weights[i];
  }

  const Box* box = options.sample_box ? &*options.sample_box : nullptr;
  if (auto bound = base_->lipschitz_bound(box)) {
    c.source = LipschitzSource::certified;
    c.lipschitz = *bound;
  } else if (box != nullptr) {
    c.source = LipschitzSource::sampled;
    c.lipschitz = estimate_lipschitz(*base_, *box, options.lipschitz_samples);
  } else {
    c.source = LipschitzSource::unavailable;
    return;
  }
  c.k1 = c.lipschitz * std::sqrt(static_cast<double>(n)) * csum;
  c.growth = 4.0 * std::max(c.lipschitz, c.max_abs_at_zero);
}

const TransitionFunction& ConsistentReaction::chi(std::size_t component) const { return chis_.at(component); }

void ConsistentReaction::wrap_values(std::span<const double> u, std::span<const double> base_values,
                                     std::span<double> out) const {
  for (std::size_t i = 0; i < base_values.size(); ++i) {
    const double f = base_values[i];
    // (P+(f) - f) vanishes for f >= 0, so only negative values are touched and
    // the chi = 0 branch returns f bit-exactly.
    if (f < 0.0) {
      const double x = chis_[i].evaluate(u[i]);
      out[i] = x == 0.0 ? f : (x == 1.0 ? 0.0 : f * (1.0 - x));
    } else {
      out[i] = f;
    }
  }
}

void ConsistentReaction::evaluate(std::span<const double> u, std::span<double> out) const {
  base_->evaluate(u, out);
  wrap_values(u, out, out);
}

void ConsistentReaction::jacobian(std::span<const double> u, Matrix& jac) const {
  const std::size_t n = species();
  base_->jacobian(u, jac);
  std::vector<double> f(n);
  base_->evaluate(u, f);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(f[i] < 0.0)) continue;
    const auto row = static_cast<Eigen::Index>(i);
    jac.row(row) *= 1.0 - chis_[i].evaluate(u[i]);
    jac(row, row) -= f[i] * chis_[i].derivative(u[i]);
  }
}

std::optional<double> ConsistentReaction::lipschitz_bound(const Box* box) const {
  if (box == nullptr) return std::nullopt;
  const auto base_bound = base_->lipschitz_bound(box);
  if (!base_bound) return std::nullopt;
  const double lip = *base_bound;
  const std::size_t n = species();
  std::vector<double> centre(n), fc(n);
  double half_diag2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    centre[i] = 0.5 * (box->lo[i] + box->hi[i]);
    half_diag2 += 0.25 * box->width(i) * box->width(i);
  }
  base_->evaluate(centre, fc);
  double fmax = 0.0;
  for (double v : fc) fmax = std::max(fmax, std::abs(v));
  fmax += lip * std::sqrt(half_diag2);
  double slope = 0.0;
  for (const auto& chi : chis_) slope = std::max(slope, chi.derivative_sup());
  return std::sqrt(static_cast<double>(n)) * (fmax * slope + 2.0 * lip);
}

std::shared_ptr<ConsistentReaction> wrap(ReactionPtr base, TransitionFunction chi, const WrapOptions& options) {
  return std::make_shared<ConsistentReaction>(std::move(base), std::move(chi), options);
}

Matrix wrap_gradient(const ConsistentReaction& g, const Vector& u) { return g.jacobian_at(u); }

// ---------------------------------------------------------------------------

void WrapperSchedule::validate() const {
  if (!(alpha > 1.0)) throw InvalidParameter("wrapper schedule needs alpha > 1");
  if (!(beta > 0.0)) throw InvalidParameter("wrapper schedule needs beta > 0");
  if (!(gamma > 0.0) || gamma > beta) throw InvalidParameter("wrapper schedule needs 0 < gamma <= beta");
}

double WrapperSchedule::eps(double m) const {
  if (!(m >= 1.0)) throw InvalidParameter("levels start at m = 1");
  return std::pow(m, -gamma);
}

TransitionFunction WrapperSchedule::chi(double m) const { return mollified_heaviside(eps(m)); }

double WrapperSchedule::preserved_rate() const { return std::min(alpha * gamma, beta); }

namespace {

PointSet sup_samples(const Box& box, std::size_t count) {
  PointSet pts = sobol_points(box, count);
  const PointSet corners = box_corners(box);
  for (std::size_t i = 0; i < corners.size(); ++i) pts.append(corners[i]);
  return pts;
}

double sup_difference(const ReactionTerm& a, const ReactionTerm& b, const PointSet& pts) {
  const std::size_t n = a.species();
  return kernels::max(pts.size(), [&](std::size_t i) {
    std::vector<double> fa(n), fb(n);
    a.evaluate(pts[i], fa);
    b.evaluate(pts[i], fb);
    double worst = 0.0;
    for (std::size_t c = 0; c < n; ++c) worst = std::max(worst, std::abs(fa[c] - fb[c]));
    return worst;
  });
}

}  // namespace

RateStudy rate_preservation_study(const ReactionTerm& target, const ApproximantFamily& family,
                                  const WrapperSchedule& schedule, const Box& box, const std::vector<double>& levels,
                                  std::size_t samples_per_species) {
  schedule.validate();
  if (levels.size() < 3) throw InsufficientData("rate study needs at least three levels");
  if (box.dim() != target.species()) throw DimensionMismatch(target.species(), box.dim());
  const PointSet pts = sup_samples(box, samples_per_species * target.species());

  RateStudy study;
  std::vector<double> ms, raw, wrapped;
  for (double m : levels) {
    const ReactionPtr approx = family(m);
    const ConsistentReaction bar(approx, schedule.chi(m));
    RateRow row{m, schedule.eps(m), sup_difference(target, *approx, pts), sup_difference(target, bar, pts)};
    study.rows.push_back(row);
    ms.push_back(m);
    raw.push_back(row.sup_error_raw);
    wrapped.push_back(row.sup_error_wrapped);
  }
  study.slope_raw = loglog_slope(ms, raw);
  study.slope_wrapped = loglog_slope(ms, wrapped);
  return study;
}

double strict_rate_estimate(const ReactionTerm& f, const Box& box, std::size_t component,
                            const std::vector<double>& eps_list, std::size_t samples) {
  const std::size_t n = f.species();
  if (box.dim() != n) throw DimensionMismatch(n, box.dim());
  if (component >= n) throw InvalidParameter("component index out of range");
  if (eps_list.size() < 3) throw InsufficientData("rate estimate needs at least three eps values");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1])) throw InvalidParameter("eps values must be strictly decreasing");

  std::vector<double> xs, ys;
  for (double eps : eps_list) {
    if (!(eps > 0.0)) throw InvalidParameter("eps values must be positive");
    Box layer = box;
    layer.lo[component] = std::max(box.lo[component], -eps);
    layer.hi[component] = std::min(box.hi[component], eps);
    if (!(layer.hi[component] > layer.lo[component])) continue;
    const PointSet pts = sup_samples(Box(layer.lo, layer.hi), samples);
    const double sup = kernels::max(pts.size(), [&](std::size_t i) {
      std::vector<double> v(n);
      f.evaluate(pts[i], v);
      return std::max(-v[component], 0.0);
    });
    if (sup < 1e-14) continue;
    xs.push_back(eps);
    ys.push_back(sup);
  }
  if (xs.empty()) return std::numeric_limits<double>::infinity();
  return loglog_slope(xs, ys);
}

std::shared_ptr<FunctionReaction> power_target(double alpha) {
  auto eval = [alpha](std::span<const double> u, std::span<double> out) {
    out[0] = -std::pow(std::abs(u[0]), alpha) * (1.0 - u[0]);
  };
  auto jac = [alpha](std::span<const double> u, Matrix& j) {
    const double x = std::abs(u[0]);
    const double s = u[0] < 0.0 ? -1.0 : 1.0;
    j(0, 0) = -alpha * std::pow(x, alpha - 1.0) * s * (1.0 - u[0]) + std::pow(x, alpha);
  };
  return std::make_shared<FunctionReaction>("power-target", 1, eval, jac);
}

ApproximantFamily shifted_family(double alpha, double beta) {
  return [alpha, beta](double m) -> ReactionPtr {
    const double shift = std::pow(m, -beta);
    auto target = power_target(alpha);
    auto eval = [target, shift](std::span<const double> u, std::span<double> out) {
      target->evaluate(u, out);
      out[0] -= shift;
    };
    auto jac = [target](std::span<const double> u, Matrix& j) { target->jacobian(u, j); };
    // |f'| <= alpha + 1 on [0, 1].
    return std::make_shared<FunctionReaction>("shifted-power", 1, eval, jac, alpha + 1.0);
  };
}

}  // namespace rdlearn
