#include "rdlearn/transition.hpp"

#include <algorithm>
#include <cmath>

#include "rdlearn/error.hpp"
#include "rdlearn/kernels.hpp"

namespace rdlearn {

namespace {

double bump(double x) {
  if (!(std::abs(x) < 1.0)) return 0.0;
  return std::exp(1.0 / (x * x - 1.0));
}

double bump_derivative(double x) {
  if (!(std::abs(x) < 1.0)) return 0.0;
  const double s = x * x - 1.0;
  return bump(x) * (-2.0 * x / (s * s));
}

}  // namespace

MollifierKernel::MollifierKernel(std::size_t panels) {
  if (panels < 2048) throw InvalidParameter("mollifier table needs at least 2048 panels");
  step_ = 2.0 / static_cast<double>(panels);
  table_.assign(panels + 1, 0.0);
  slope_.assign(panels + 1, 0.0);

  // Composite Simpson on each panel (midpoint included), accumulated left to
  // right; the total mass fixes the normalisation.
  double acc = 0.0;
  for (std::size_t i = 0; i < panels; ++i) {
    const double a = -1.0 + static_cast<double>(i) * step_;
    const double b = i + 1 == panels ? 1.0 : a + step_;
    acc += (b - a) / 6.0 * (bump(a) + 4.0 * bump(0.5 * (a + b)) + bump(b));
    table_[i + 1] = acc;
  }
  c_ = 1.0 / acc;
  for (std::size_t i = 0; i <= panels; ++i) {
    table_[i] *= c_;
    slope_[i] = density(-1.0 + static_cast<double>(i) * step_);
  }
  table_.front() = 0.0;
  table_.back() = 1.0;

  derivative_sup_ = kernels::max(200001, [&](std::size_t i) {
    return std::abs(density_derivative(-1.0 + 2.0 * static_cast<double>(i) / 200000.0));
  });
}

std::shared_ptr<const MollifierKernel> MollifierKernel::standard() {
  static const auto instance = std::make_shared<const MollifierKernel>();
  return instance;
}

double MollifierKernel::density(double x) const { return c_ * bump(x); }

double MollifierKernel::density_derivative(double x) const { return c_ * bump_derivative(x); }

double MollifierKernel::antiderivative(double x) const {
  if (x <= -1.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const std::size_t last = table_.size() - 1;
  std::size_t i = static_cast<std::size_t>((x + 1.0) / step_);
  i = std::min(i, last - 1);
  const double x0 = -1.0 + static_cast<double>(i) * step_;
  const double h = i + 1 == last ? 1.0 - x0 : step_;
  const double y0 = table_[i];
  const double y1 = table_[i + 1];
  const double secant = (y1 - y0) / h;

  // Cubic Hermite with the exact slopes, limited per interval so that the
  // interpolant stays monotone (Fritsch-Carlson).
  double d0 = 0.0, d1 = 0.0;
  if (secant > 0.0) {
    d0 = slope_[i];
    d1 = slope_[i + 1];
    const double a = d0 / secant;
    const double b = d1 / secant;
    const double r2 = a * a + b * b;
    if (r2 > 9.0) {
      const double tau = 3.0 / std::sqrt(r2);
      d0 = tau * a * secant;
      d1 = tau * b * secant;
    }
  }
  const double t = std::clamp((x - x0) / h, 0.0, 1.0);
  const double t2 = t * t;
  const double t3 = t2 * t;
  const double value = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 +
                       (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1;
  return std::clamp(value, y0, y1);
}

TransitionFunction::TransitionFunction(double eps, double delta, std::shared_ptr<const MollifierKernel> kernel)
    : eps_(eps), delta_(delta), kernel_(std::move(kernel)) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidParameter("transition centre eps must be positive");
  if (!(delta > 0.0) || !(delta < eps)) throw InvalidParameter("transition half-width needs 0 < delta < eps");
  if (!kernel_) throw InvalidParameter("transition function needs a kernel");
}

double TransitionFunction::evaluate(double x) const {
  if (x <= eps_ - delta_) return 1.0;
  if (x >= eps_ + delta_) return 0.0;
  return std::clamp(1.0 - kernel_->antiderivative((x - eps_) / delta_), 0.0, 1.0);
}

double TransitionFunction::derivative(double x) const {
  if (x <= eps_ - delta_ || x >= eps_ + delta_) return 0.0;
  return -kernel_->density((x - eps_) / delta_) / delta_;
}

TransitionFunction mollified_heaviside(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidParameter("mollified step needs eps > 0");
  return TransitionFunction(eps, 0.5 * eps);
}

double derivative_bound(const TransitionFunction& chi, std::size_t grid_points) {
  if (grid_points < 3) throw InvalidParameter("derivative grid needs at least 3 points");
  if (grid_points % 2 == 0) ++grid_points;  // odd count keeps the centre on the grid
  const double a = chi.ramp_begin();
  const double width = chi.ramp_end() - a;
  const double n = static_cast<double>(grid_points - 1);
  return kernels::max(grid_points, [&](std::size_t i) {
    const double x = i == (grid_points - 1) / 2 ? chi.eps() : a + width * static_cast<double>(i) / n;
    return std::abs(chi.derivative(x));
  });
}

}  // namespace rdlearn
