#pragma once

// Smooth cutoff ("transition") functions built from mollified step functions.
//
// A transition function chi with centre eps and half-width delta equals 1 on
// (-inf, eps - delta], 0 on [eps + delta, inf) and decreases strictly in
// between. The mollified step h_eps * eta_eps has the closed form
//
//   chi(x) = 1 - E((x - eps) / delta),   delta = eps / 2,
//
// where E is the antiderivative of the bump kernel eta on [-1, 1].

#include <cstddef>
#include <memory>
#include <vector>

namespace rdlearn {

/// The classical bump kernel eta(x) = c * exp(1 / (x^2 - 1)) on (-1, 1),
/// normalised to unit mass, with a tabulated antiderivative.
class MollifierKernel {
 public:
  static constexpr std::size_t kDefaultPanels = 16384;

  explicit MollifierKernel(std::size_t panels = kDefaultPanels);

  /// Process-wide immutable instance with the default table size.
  static std::shared_ptr<const MollifierKernel> standard();

  double normalization() const { return c_; }
  std::size_t panels() const { return table_.size() - 1; }

  double density(double x) const;
  double density_derivative(double x) const;
  /// E(x) = integral of eta over (-inf, x]; 0 for x <= -1, 1 for x >= 1.
  double antiderivative(double x) const;

  /// sup |eta'|, measured once on a dense grid at construction.
  double derivative_sup() const { return derivative_sup_; }
  /// eta(0), the maximum of eta.
  double peak() const { return density(0.0); }

  const std::vector<double>& table() const { return table_; }

 private:
  double c_ = 1.0;
  double step_ = 0.0;
  double derivative_sup_ = 0.0;
  std::vector<double> table_;  // E at nodes -1 + i * step_
  std::vector<double> slope_;  // eta at the nodes
};

class TransitionFunction {
 public:
  /// General transition with ramp (eps - delta, eps + delta); 0 < delta < eps.
  TransitionFunction(double eps, double delta,
                     std::shared_ptr<const MollifierKernel> kernel = MollifierKernel::standard());

  double eps() const { return eps_; }
  double delta() const { return delta_; }
  double ramp_begin() const { return eps_ - delta_; }
  double ramp_end() const { return eps_ + delta_; }
  const MollifierKernel& kernel() const { return *kernel_; }

  double operator()(double x) const { return evaluate(x); }
  double evaluate(double x) const;
  double derivative(double x) const;

  /// Exact sup |chi'| = eta(0) / delta (the kernel peaks at 0).
  double derivative_sup() const { return kernel_->peak() / delta_; }

 private:
  double eps_;
  double delta_;
  std::shared_ptr<const MollifierKernel> kernel_;
};

/// h_eps * eta_eps with eta_eps(x) = 2/eps * eta(2x/eps): the transition
/// function with centre eps and half-width eps / 2.
TransitionFunction mollified_heaviside(double eps);

/// Measured sup |chi'| over a dense grid through the ramp (the grid contains
/// the ramp centre). Bounded above by 4 sup|eta'| / eps for the mollified step.
double derivative_bound(const TransitionFunction& chi, std::size_t grid_points = 200001);

}  // namespace rdlearn
