#pragma once

// All-at-once learning of a wrapped network reaction term from noisy,
// level-indexed measurements of reaction-diffusion trajectories.
//
// Decision variables: network parameters theta (shared by all trajectories)
// and, per trajectory l, diffusion coefficients D^l, initial state u0^l and the
// whole space-time state u^l. The discrete objective is
//
//   R0 + nu |theta| + |fbar|^2_{L2(U)} + max_U |grad fbar|_F
//      + lambda sum_l ( |residual^l|_W^q + |u^l(0) - u0^l|_H^2 )
//      + mu sum_l |K u^l - y^l|_Y^r,
//
//   R0 = sum_l ( |D^l|^2 + |u^l|_V^p + |u0^l|_H^2 ),
//
// where the residual is the IMEX defect of the forward solver,
//   (u_{k+1} - u_k)/dt - D A u_{k+1} - fbar(u_k).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdlearn/consistency.hpp"
#include "rdlearn/rdsolve.hpp"

namespace rdlearn {

// ---------------------------------------------------------------------------
// Measurements

enum class MeasurementKind { full, subsample, fourier };

MeasurementKind parse_measurement_kind(const std::string& name);
const char* to_string(MeasurementKind kind);

/// Linear observation of a trajectory (flat StateField values) with a
/// weighted Euclidean norm |y|_Y^2 = sum_j w_j y_j^2 approximating a
/// space-time L2 norm.
class MeasurementOperator {
 public:
  /// Every node of every slice; trapezoid weights in space and time.
  static MeasurementOperator full(const SpaceTimeGrid& grid, std::size_t species);
  /// Every stride-th slice and node along each axis; trapezoid weights of the
  /// coarse lattice.
  static MeasurementOperator subsample(const SpaceTimeGrid& grid, std::size_t species, std::size_t stride);
  /// Coefficients of the first `modes` cosine modes per axis for every slice.
  static MeasurementOperator fourier(const SpaceTimeGrid& grid, std::size_t species, std::size_t modes);
  /// Level rule: stride 2^max(0, full_level - m); modes = nodes / stride.
  static MeasurementOperator for_level(MeasurementKind kind, const SpaceTimeGrid& grid, std::size_t species,
                                       std::size_t level, std::size_t full_level);

  MeasurementKind kind() const { return kind_; }
  std::size_t resolution() const { return resolution_; }  // stride or mode count
  std::size_t outputs() const { return weights_.size(); }
  std::size_t input_size() const { return input_size_; }
  const std::vector<double>& weights() const { return weights_; }

  void apply(std::span<const double> traj, std::span<double> y) const;
  /// traj_grad += K^T ybar.
  void apply_adjoint(std::span<const double> ybar, std::span<double> traj_grad) const;
  double norm(std::span<const double> y) const;

  /// A full trajectory consistent with the data: the data itself, linear
  /// interpolation of the subsampled lattice, or the cosine synthesis.
  std::vector<double> reconstruct(std::span<const double> y) const;

 private:
  MeasurementOperator(MeasurementKind kind, const SpaceTimeGrid& grid, std::size_t species, std::size_t resolution);

  MeasurementKind kind_;
  SpaceTimeGrid grid_;
  std::size_t species_;
  std::size_t resolution_;
  std::size_t input_size_;
  // Sparse rows: outputs j use entries [row_ptr_[j], row_ptr_[j+1]).
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_;
  std::vector<double> coef_;
  std::vector<double> weights_;
  std::vector<double> mode_norm2_;  // fourier rows: discrete |phi_j|^2
};

/// y = K(truth) + noise, the noise Gaussian and rescaled to Y-norm 0.9 delta.
std::vector<double> generate_measurements(const StateField& truth, const MeasurementOperator& op, double delta,
                                          std::uint64_t seed);

// ---------------------------------------------------------------------------
// Level schedules

struct ScheduleSpec {
  double alpha = 2.0;
  double beta = 1.0;
  double gamma = 0.5;
  double p = 2.0;
  double q = 2.0;
  double r = 2.0;
  double q_hat = 2.0;  // spatial exponent of the residual norm
  // Scale constants in front of the default rules.
  double lambda0 = 3000.0;
  double mu0 = 3000.0;
  double nu0 = 1.0;
  std::function<double(double)> noise = [](double m) { return std::pow(2.0, -m); };  // delta(m)
  std::function<double(double)> psi = [](double m) { return 10.0 * m; };            // parameter bound

  void validate() const;
};

struct LevelSchedule {
  double m = 1.0;
  double eps = 1.0;
  double lambda = 1.0;
  double mu = 1.0;
  double nu = 1.0;
  double delta = 0.0;
  double psi = 1.0;
  double alpha = 2.0, beta = 1.0, gamma = 0.5;
  double p = 2.0, q = 2.0, r = 2.0, q_hat = 2.0;

  double preserved_rate() const { return std::min(alpha * gamma, beta); }
};

/// lambda = lambda0 m^(min(alpha gamma, beta) q / 2), mu = mu0 delta(m)^(-r/2),
/// nu = nu0 min(1/m, 1/(psi(m) m)), eps = m^-gamma.
std::vector<LevelSchedule> make_schedule(const ScheduleSpec& spec, const std::vector<double>& levels);

struct ScheduleProducts {
  std::vector<double> lambda;  // lambda m^(-min(alpha gamma, beta) q)
  std::vector<double> mu;      // mu delta^r
  std::vector<double> nu;      // nu psi
};
ScheduleProducts schedule_products(const std::vector<LevelSchedule>& schedule);
/// Throws ValidationError (key learn.levels) unless every product strictly decreases and ends
/// below half its initial value (needs two or more levels).
void check_schedule_products(const std::vector<LevelSchedule>& schedule);

// ---------------------------------------------------------------------------
// The all-at-once problem

struct ProblemSetup {
  SpaceTimeGrid grid;
  std::size_t species = 1;
  MlpArchitecture architecture;
  Box reaction_box;  // U
  LevelSchedule schedule;
  std::shared_ptr<const MeasurementOperator> measurement;
  std::vector<std::vector<double>> data;  // y^l per trajectory
  double d_min = 1e-6;
  bool enforce_parameter_bound = false;   // project theta onto |theta| <= psi(m)
  std::size_t quadrature_per_axis = 33;   // |fbar|_{L2(U)} grid (N <= 2)
  std::size_t sup_samples_per_species = 4096;
};

struct ObjectiveTerms {
  double regularization = 0.0;  // R0
  double theta_norm = 0.0;      // nu |theta|
  double reaction_l2 = 0.0;     // |fbar|^2_{L2(U)}
  double gradient_sup = 0.0;    // max |grad fbar|_F
  double residual = 0.0;        // sum_l |residual|_W^q (without lambda)
  double initial_misfit = 0.0;  // sum_l |u(0) - u0|_H^2 (without lambda)
  double misfit = 0.0;          // sum_l |K u - y|_Y^r (without mu)
  double total = 0.0;
};

class AllAtOnceProblem {
 public:
  explicit AllAtOnceProblem(ProblemSetup setup);

  const ProblemSetup& setup() const { return setup_; }
  std::size_t trajectories() const { return setup_.data.size(); }
  std::size_t size() const { return theta_size_ + trajectories() * per_traj_; }

  // Offsets into the flat decision vector.
  std::size_t theta_offset() const { return 0; }
  std::size_t theta_size() const { return theta_size_; }
  std::size_t diffusion_offset(std::size_t l) const { return theta_size_ + l * per_traj_; }
  std::size_t initial_offset(std::size_t l) const { return diffusion_offset(l) + setup_.species; }
  std::size_t state_offset(std::size_t l) const { return initial_offset(l) + nodes_ * setup_.species; }
  std::size_t state_size() const { return (setup_.grid.steps + 1) * nodes_ * setup_.species; }

  /// Default iterate: states reconstructed from the data, u0 = first slice,
  /// D = d_min, theta small random.
  std::vector<double> initial_point(std::uint64_t seed, double theta_scale = 0.1) const;

  ObjectiveTerms evaluate(std::span<const double> x) const;
  /// Objective value and its gradient (grad has size()).
  ObjectiveTerms evaluate(std::span<const double> x, std::span<double> grad) const;

  /// D >= d_min and, if enabled, |theta| <= psi(m).
  void project(std::span<double> x) const;

  MlpReaction reaction(std::span<const double> x) const;
  std::shared_ptr<ConsistentReaction> wrapped_reaction(std::span<const double> x) const;
  const TransitionFunction& cutoff() const { return chi_; }
  std::span<const double> sup_points() const { return sup_points_.coords(); }

 private:
  ProblemSetup setup_;
  TransitionFunction chi_;
  std::size_t nodes_;
  std::size_t theta_size_;
  std::size_t per_traj_;
  std::vector<double> node_weights_;
  std::vector<double> time_weights_;
  PointSet quad_points_;
  std::vector<double> quad_weights_;
  PointSet sup_points_;
  // Grid edges for the gradient part of the state norm; the weight already
  // includes 1/h^2 of the edge direction.
  std::vector<std::size_t> edge_from_;
  std::vector<std::size_t> edge_to_;
  std::vector<double> edge_weight_;
};

// ---------------------------------------------------------------------------
// Optimisation

struct OptimizerOptions {
  double step = 1e-2;
  std::size_t max_iters = 20000;
  double rel_tol = 1e-8;
  std::size_t window = 50;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_backtracks = 30;
  double divergence_factor = 10.0;
};

struct LevelResult {
  std::vector<double> x;
  std::vector<double> history;  // objective per accepted iterate
  ObjectiveTerms terms;
  std::size_t iterations = 0;
  std::string stop_reason;
};

/// Adam with projection and a monotone acceptance test: a step is accepted
/// when f_new <= f_old + 1e-12 max(1, |f_old|); otherwise the step is halved
/// and the moments are reset.
LevelResult solve_level(const AllAtOnceProblem& problem, std::vector<double> x0, const OptimizerOptions& options);

/// sup over U (Sobol points plus corners) of max_n |fbar_n - f_n|.
double reaction_sup_error(const ReactionTerm& learned, const ReactionTerm& truth, const Box& box,
                          std::size_t samples_per_species = 10000);

// ---------------------------------------------------------------------------
// Level sweeps

struct LearningExperiment {
  SpaceTimeGrid grid;
  ReactionPtr truth;
  std::vector<double> true_diffusion;
  std::vector<InitialProfile> initial;  // one per trajectory
  double d_min = 1e-6;
  MeasurementKind measurement = MeasurementKind::subsample;
  std::size_t full_level = 3;
  ScheduleSpec schedule;
  std::vector<std::size_t> hidden;  // hidden layer widths
  Box reaction_box;
  OptimizerOptions optimizer;
  bool enforce_parameter_bound = false;
  bool warm_start = true;
  std::size_t quadrature_per_axis = 33;
  std::size_t sup_samples_per_species = 4096;
  double theta_scale = 0.1;
  std::uint64_t seed = 1;
};

struct SweepRow {
  double m = 0.0;
  double objective = 0.0;
  double residual_term = 0.0;  // lambda * (residual + initial misfit)
  double misfit_term = 0.0;    // mu * misfit
  double sup_error_f = 0.0;
  double d_error = 0.0;        // max |D - D_true|
  // Share of learned state values outside U; the box is an input, so this is
  // the only evidence that it covered the states the reaction was fed.
  double outside_fraction = 0.0;
  std::size_t iterations = 0;
  std::string stop_reason;
  ParameterFile parameters;
};

using SweepObserver = std::function<void(const SweepRow&)>;

std::vector<SweepRow> run_level_sweep(const LearningExperiment& experiment, const std::vector<std::size_t>& levels,
                                      const SweepObserver& observer = {});

}  // namespace rdlearn
