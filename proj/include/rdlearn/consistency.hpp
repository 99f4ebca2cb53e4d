#pragma once

// The consistency wrapper
//
//   fbar_n(u) = (P+(f_n(u)) - f_n(u)) * chi(u_n) + f_n(u),
//
// which turns a Lipschitz reaction term into one that is quasipositive, mass
// controlled and of at most quadratic growth, together with its a.e. gradient,
// its derived constants and the level-indexed wrapper schedule.

#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "rdlearn/reaction.hpp"
#include "rdlearn/transition.hpp"

namespace rdlearn {

enum class LipschitzSource { certified, sampled, unavailable };

const char* to_string(LipschitzSource source);

struct ConsistencyConstants {
  std::vector<double> weights;  // c_n
  LipschitzSource source = LipschitzSource::unavailable;
  double lipschitz = 0.0;       // L of the base term
  double max_abs_at_zero = 0.0; // max_n |f_n(0)|
  double k0 = 0.0;              // sum c_n P+(f_n(0))
  double k1 = 0.0;              // L sqrt(N) sum c_n
  double growth = 0.0;          // 4 max(L, max_n |f_n(0)|)

  bool available() const { return source != LipschitzSource::unavailable; }
};

struct WrapOptions {
  std::vector<double> weights;     // default: all ones
  /// Box used to estimate L by sampling when the base has no certified bound.
  std::optional<Box> sample_box;
  std::size_t lipschitz_samples = 10000;
};

class ConsistentReaction : public ReactionTerm {
 public:
  ConsistentReaction(ReactionPtr base, TransitionFunction chi, const WrapOptions& options = {});
  /// One cutoff per component instead of a shared one.
  ConsistentReaction(ReactionPtr base, std::vector<TransitionFunction> chis, const WrapOptions& options = {});

  std::size_t species() const override { return base_->species(); }
  std::string name() const override { return "wrapped " + base_->name(); }
  void evaluate(std::span<const double> u, std::span<double> out) const override;
  bool has_jacobian() const override { return true; }
  /// A.e. gradient; the indicator 1{f_n < 0} is false at f_n = 0.
  void jacobian(std::span<const double> u, Matrix& jac) const override;

  /// Local bound on the box: sqrt(N) [ F sup|chi'| + 2 L ], where L bounds the
  /// base on the box and F = max_n |f_n(centre)| + L * half-diagonal bounds
  /// |f_n| there. Needs a box and a certified base bound.
  std::optional<double> lipschitz_bound(const Box* box) const override;

  const ReactionTerm& base() const { return *base_; }
  ReactionPtr base_ptr() const { return base_; }
  const TransitionFunction& chi(std::size_t component) const;
  const ConsistencyConstants& constants() const { return constants_; }

  /// Applies the wrapper to already evaluated base values f(u).
  void wrap_values(std::span<const double> u, std::span<const double> base_values, std::span<double> out) const;

 private:
  void compute_constants(const WrapOptions& options);

  ReactionPtr base_;
  std::vector<TransitionFunction> chis_;
  ConsistencyConstants constants_;
};

std::shared_ptr<ConsistentReaction> wrap(ReactionPtr base, TransitionFunction chi, const WrapOptions& options = {});

/// Gradient of the wrapped term: row n is
///   (1 - chi(u_n) 1{f_n(u) < 0}) grad f_n(u) - P-(f_n(u)) chi'(u_n) e_n^T.
Matrix wrap_gradient(const ConsistentReaction& g, const Vector& u);

// ---------------------------------------------------------------------------
// Level-indexed wrapper schedule and rate experiments

struct WrapperSchedule {
  double alpha = 2.0;  // strict quasipositivity rate of the target, > 1
  double beta = 1.0;   // approximation rate of the family, > 0
  double gamma = 0.5;  // cutoff exponent, 0 < gamma <= beta

  void validate() const;
  double eps(double m) const;
  /// The mollified step with centre eps(m).
  TransitionFunction chi(double m) const;
  /// min(alpha gamma, beta).
  double preserved_rate() const;
};

struct RateRow {
  double m = 0.0;
  double eps = 0.0;
  double sup_error_raw = 0.0;
  double sup_error_wrapped = 0.0;
};

struct RateStudy {
  std::vector<RateRow> rows;
  double slope_raw = 0.0;
  double slope_wrapped = 0.0;
};

using ApproximantFamily = std::function<ReactionPtr(double m)>;

/// Sup errors of raw and wrapped approximants against the target over U,
/// sampled on samples_per_species * N Sobol points plus the corners of U.
RateStudy rate_preservation_study(const ReactionTerm& target, const ApproximantFamily& family,
                                  const WrapperSchedule& schedule, const Box& box, const std::vector<double>& levels,
                                  std::size_t samples_per_species = 10000);

/// Least-squares slope of log sup|P-(f_n)| over {u in U : |u_n| <= eps} against
/// log eps. Levels whose sup is below 1e-14 are ignored; if all are, the
/// result is +infinity.
double strict_rate_estimate(const ReactionTerm& f, const Box& box, std::size_t component,
                            const std::vector<double>& eps_list, std::size_t samples = 10000);

/// The synthetic family used by the rate experiments:
///   target f(u) = -u^alpha (1 - u) on [0, 1],  approximants f - m^-beta.
std::shared_ptr<FunctionReaction> power_target(double alpha);
ApproximantFamily shifted_family(double alpha, double beta);

}  // namespace rdlearn
