#include "rdlearn/learn.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <fmt/format.h>

#include "rdlearn/error.hpp"
#include "rdlearn/kernels.hpp"

namespace rdlearn {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  // splitmix64 finaliser over the combined inputs
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (a + 1) + 0xBF58476D1CE4E5B9ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// |x|^e with the convention 0^e = 0 (also for e <= 0).
double safe_pow(double x, double e) { return x == 0.0 ? 0.0 : std::pow(x, e); }

std::vector<double> lattice_weights(std::size_t count, double spacing) {
  if (count == 1) return {spacing};
  return trapezoid_weights_1d(count, spacing);
}

}  // namespace

// ---------------------------------------------------------------------------
// Measurements

MeasurementKind parse_measurement_kind(const std::string& name) {
  if (name == "full") return MeasurementKind::full;
  if (name == "subsample") return MeasurementKind::subsample;
  if (name == "fourier") return MeasurementKind::fourier;
  throw InvalidParameter("unknown measurement kind '" + name + "' (full, subsample, fourier)");
}

const char* to_string(MeasurementKind kind) {
  switch (kind) {
    case MeasurementKind::full:
      return "full";
    case MeasurementKind::subsample:
      return "subsample";
    case MeasurementKind::fourier:
      return "fourier";
  }
  return "full";
}

MeasurementOperator::MeasurementOperator(MeasurementKind kind, const SpaceTimeGrid& grid, std::size_t species,
                                         std::size_t resolution)
    : kind_(kind),
      grid_(grid),
      species_(species),
      resolution_(resolution),
      input_size_((grid.steps + 1) * species * grid.node_count()) {
  grid_.validate();
  if (species_ == 0) throw InvalidParameter("measurements need at least one species");
  if (resolution_ == 0) throw InvalidParameter("measurement stride / mode count must be positive");
  row_ptr_.push_back(0);
}

MeasurementOperator MeasurementOperator::full(const SpaceTimeGrid& grid, std::size_t species) {
  MeasurementOperator op(MeasurementKind::full, grid, species, 1);
  const auto w = grid.node_weights();
  const auto tau = trapezoid_weights_1d(grid.steps + 1, grid.dt());
  const std::size_t nodes = grid.node_count();
  for (std::size_t k = 0; k <= grid.steps; ++k)
    for (std::size_t n = 0; n < species; ++n)
      for (std::size_t i = 0; i < nodes; ++i) {
        op.col_.push_back((k * species + n) * nodes + i);
        op.coef_.push_back(1.0);
        op.row_ptr_.push_back(op.col_.size());
        op.weights_.push_back(tau[k] * w[i]);
      }
  return op;
}

MeasurementOperator MeasurementOperator::subsample(const SpaceTimeGrid& grid, std::size_t species,
                                                   std::size_t stride) {
  MeasurementOperator op(MeasurementKind::subsample, grid, species, stride);
  const std::size_t nodes = grid.node_count();
  const std::size_t slices = grid.steps / stride + 1;
  const auto tau = lattice_weights(slices, grid.dt() * static_cast<double>(stride));
  std::vector<std::size_t> counts(grid.dim());
  std::vector<std::vector<double>> axis_w(grid.dim());
  std::size_t coarse_nodes = 1;
  for (std::size_t a = 0; a < grid.dim(); ++a) {
    counts[a] = (grid.nodes[a] - 1) / stride + 1;
    axis_w[a] = lattice_weights(counts[a], grid.spacing(a) * static_cast<double>(stride));
    coarse_nodes *= counts[a];
  }
  for (std::size_t kc = 0; kc < slices; ++kc)
    for (std::size_t n = 0; n < species; ++n)
      for (std::size_t c = 0; c < coarse_nodes; ++c) {
        std::size_t rest = c, fine = 0, fstride = 1;
        double w = tau[kc];
        for (std::size_t a = 0; a < grid.dim(); ++a) {
          const std::size_t idx = rest % counts[a];
          rest /= counts[a];
          fine += idx * stride * fstride;
          fstride *= grid.nodes[a];
          w *= axis_w[a][idx];
        }
        op.col_.push_back((kc * stride * species + n) * nodes + fine);
        op.coef_.push_back(1.0);
        op.row_ptr_.push_back(op.col_.size());
        op.weights_.push_back(w);
      }
  return op;
}

MeasurementOperator MeasurementOperator::fourier(const SpaceTimeGrid& grid, std::size_t species, std::size_t modes) {
  MeasurementOperator op(MeasurementKind::fourier, grid, species, modes);
  const std::size_t nodes = grid.node_count();
  const auto w = grid.node_weights();
  const auto tau = trapezoid_weights_1d(grid.steps + 1, grid.dt());
  std::vector<std::size_t> per_axis(grid.dim());
  std::size_t total_modes = 1;
  for (std::size_t a = 0; a < grid.dim(); ++a) {
    per_axis[a] = std::min(modes, grid.nodes[a]);
    total_modes *= per_axis[a];
  }
  // Mode values phi_j(x_i) and their discrete norms.
  std::vector<double> phi(total_modes * nodes), norm2(total_modes, 0.0), x(grid.dim());
  for (std::size_t j = 0; j < total_modes; ++j)
    for (std::size_t i = 0; i < nodes; ++i) {
      grid.coordinates(i, x);
      std::size_t rest = j;
      double v = 1.0;
      for (std::size_t a = 0; a < grid.dim(); ++a) {
        const std::size_t ja = rest % per_axis[a];
        rest /= per_axis[a];
        v *= std::cos(static_cast<double>(ja) * std::numbers::pi * x[a] / grid.extent[a]);
      }
      phi[j * nodes + i] = v;
      norm2[j] += w[i] * v * v;
    }
  for (std::size_t k = 0; k <= grid.steps; ++k)
    for (std::size_t n = 0; n < species; ++n)
      for (std::size_t j = 0; j < total_modes; ++j) {
        for (std::size_t i = 0; i < nodes; ++i) {
          op.col_.push_back((k * species + n) * nodes + i);
          op.coef_.push_back(w[i] * phi[j * nodes + i] / norm2[j]);
        }
        op.row_ptr_.push_back(op.col_.size());
        op.weights_.push_back(tau[k] * norm2[j]);
        op.mode_norm2_.push_back(norm2[j]);
      }
  return op;
}

MeasurementOperator MeasurementOperator::for_level(MeasurementKind kind, const SpaceTimeGrid& grid,
                                                   std::size_t species, std::size_t level, std::size_t full_level) {
  const std::size_t shift = full_level > level ? full_level - level : 0;
  const std::size_t stride = std::size_t{1} << std::min<std::size_t>(shift, 30);
  switch (kind) {
    case MeasurementKind::full:
      return full(grid, species);
    case MeasurementKind::subsample:
      return subsample(grid, species, stride);
    case MeasurementKind::fourier: {
      const std::size_t modes = (grid.nodes[0] - 1 + stride - 1) / stride + 1;
      return fourier(grid, species, std::min(modes, grid.nodes[0]));
    }
  }
  throw InvalidParameter("unknown measurement kind");
}

void MeasurementOperator::apply(std::span<const double> traj, std::span<double> y) const {
  if (traj.size() != input_size_) throw DimensionMismatch(input_size_, traj.size());
  if (y.size() != outputs()) throw DimensionMismatch(outputs(), y.size());
  kernels::for_each_index(outputs(), [&](std::size_t j) {
    double acc = 0.0;
    for (std::size_t e = row_ptr_[j]; e < row_ptr_[j + 1]; ++e) acc += coef_[e] * traj[col_[e]];
    y[j] = acc;
  });
}

void MeasurementOperator::apply_adjoint(std::span<const double> ybar, std::span<double> traj_grad) const {
  if (traj_grad.size() != input_size_) throw DimensionMismatch(input_size_, traj_grad.size());
  for (std::size_t j = 0; j < outputs(); ++j)
    for (std::size_t e = row_ptr_[j]; e < row_ptr_[j + 1]; ++e) traj_grad[col_[e]] += coef_[e] * ybar[j];
}

double MeasurementOperator::norm(std::span<const double> y) const {
  if (y.size() != outputs()) throw DimensionMismatch(outputs(), y.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) acc += weights_[j] * y[j] * y[j];
  return std::sqrt(acc);
}

std::vector<double> MeasurementOperator::reconstruct(std::span<const double> y) const {
  if (y.size() != outputs()) throw DimensionMismatch(outputs(), y.size());
  std::vector<double> traj(input_size_, 0.0);
  const std::size_t nodes = grid_.node_count();
  switch (kind_) {
    case MeasurementKind::full:
      for (std::size_t j = 0; j < y.size(); ++j) traj[col_[row_ptr_[j]]] = y[j];
      break;
    case MeasurementKind::fourier: {
      // coef = w_i phi_j(x_i) / |phi_j|^2, so phi_j(x_i) = coef |phi_j|^2 / w_i.
      const auto w = grid_.node_weights();
      for (std::size_t j = 0; j < y.size(); ++j)
        for (std::size_t e = row_ptr_[j]; e < row_ptr_[j + 1]; ++e)
          traj[col_[e]] += y[j] * coef_[e] * mode_norm2_[j] / w[col_[e] % nodes];
      break;
    }
    case MeasurementKind::subsample: {
      const std::size_t s = resolution_;
      const std::size_t slices = grid_.steps / s + 1;
      std::vector<std::size_t> counts(grid_.dim());
      std::size_t coarse_nodes = 1;
      for (std::size_t a = 0; a < grid_.dim(); ++a) {
        counts[a] = (grid_.nodes[a] - 1) / s + 1;
        coarse_nodes *= counts[a];
      }
      // Linear interpolation weights of a fine index onto the coarse lattice.
      auto interp = [s](std::size_t idx, std::size_t count) {
        std::size_t c0 = std::min(idx / s, count - 1);
        if (c0 + 1 >= count) return std::array<std::pair<std::size_t, double>, 2>{{{c0, 1.0}, {c0, 0.0}}};
        const double t = static_cast<double>(idx - c0 * s) / static_cast<double>(s);
        return std::array<std::pair<std::size_t, double>, 2>{{{c0, 1.0 - t}, {c0 + 1, t}}};
      };
      for (std::size_t k = 0; k <= grid_.steps; ++k) {
        const auto tk = interp(k, slices);
        for (std::size_t n = 0; n < species_; ++n)
          for (std::size_t i = 0; i < nodes; ++i) {
            std::vector<std::array<std::pair<std::size_t, double>, 2>> ax(grid_.dim());
            std::size_t rest = i;
            for (std::size_t a = 0; a < grid_.dim(); ++a) {
              ax[a] = interp(rest % grid_.nodes[a], counts[a]);
              rest /= grid_.nodes[a];
            }
            double v = 0.0;
            const std::size_t combos = std::size_t{1} << (grid_.dim() + 1);
            for (std::size_t c = 0; c < combos; ++c) {
              const auto& [kc, wt] = tk[c & 1U];
              double weight = wt;
              std::size_t flat = 0, stride = 1;
              for (std::size_t a = 0; a < grid_.dim(); ++a) {
                const auto& [ic, wa] = ax[a][(c >> (a + 1)) & 1U];
                weight *= wa;
                flat += ic * stride;
                stride *= counts[a];
              }
              if (weight != 0.0) v += weight * y[(kc * species_ + n) * coarse_nodes + flat];
            }
            traj[(k * species_ + n) * nodes + i] = v;
          }
      }
      break;
    }
  }
  return traj;
}

std::vector<double> generate_measurements(const StateField& truth, const MeasurementOperator& op, double delta,
                                          std::uint64_t seed) {
  if (!(delta >= 0.0)) throw InvalidParameter("noise level must be nonnegative");
  std::vector<double> y(op.outputs());
  op.apply(truth.values(), y);
  if (delta == 0.0) return y;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise(y.size());
  for (auto& v : noise) v = normal(rng);
  const double scale = 0.9 * delta / op.norm(noise);
  for (std::size_t j = 0; j < y.size(); ++j) y[j] += scale * noise[j];
  return y;
}

}  // namespace rdlearn

namespace rdlearn {

// ---------------------------------------------------------------------------
// Level schedules

void ScheduleSpec::validate() const {
  if (!(alpha > 1.0)) throw ValidationError("schedule.alpha", "must be > 1");
  if (!(beta > 0.0)) throw ValidationError("schedule.beta", "must be > 0");
  if (!(gamma > 0.0)) throw ValidationError("schedule.gamma", "must be > 0");
  if (!(gamma < beta)) throw ValidationError("schedule.gamma", "must be < schedule.beta");
  if (!(p > 1.0)) throw ValidationError("schedule.p", "must be > 1");
  if (!(q > 1.0)) throw ValidationError("schedule.q", "must be > 1");
  if (!(q <= p)) throw ValidationError("schedule.q", "must be <= schedule.p");
  if (!(r > 1.0)) throw ValidationError("schedule.r", "must be > 1");
  if (!(q_hat >= 1.0)) throw ValidationError("schedule.q_hat", "must be >= 1");
  if (!(lambda0 > 0.0)) throw ValidationError("schedule.lambda0", "must be > 0");
  if (!(mu0 > 0.0)) throw ValidationError("schedule.mu0", "must be > 0");
  if (!(nu0 > 0.0)) throw ValidationError("schedule.nu0", "must be > 0");
  if (!noise) throw ValidationError("noise.delta", "noise schedule missing");
  if (!psi) throw ValidationError("schedule.psi", "parameter bound schedule missing");
}

std::vector<LevelSchedule> make_schedule(const ScheduleSpec& spec, const std::vector<double>& levels) {
  spec.validate();
  if (levels.empty()) throw InsufficientData("schedule needs at least one level");
  std::vector<LevelSchedule> out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double m = levels[i];
    if (!(m >= 1.0)) throw ValidationError("learn.levels", "levels start at 1");
    if (i > 0 && !(m > levels[i - 1])) throw ValidationError("learn.levels", "levels must be strictly increasing");
    LevelSchedule s;
    s.m = m;
    s.alpha = spec.alpha;
    s.beta = spec.beta;
    s.gamma = spec.gamma;
    s.p = spec.p;
    s.q = spec.q;
    s.r = spec.r;
    s.q_hat = spec.q_hat;
    s.eps = std::pow(m, -spec.gamma);
    s.delta = spec.noise(m);
    s.psi = spec.psi(m);
    if (!(s.delta > 0.0)) throw ValidationError("noise.delta", "noise level must be positive");
    if (!(s.psi > 0.0)) throw ValidationError("schedule.psi", "parameter bound must be positive");
    s.lambda = spec.lambda0 * std::pow(m, s.preserved_rate() * spec.q / 2.0);
    s.mu = spec.mu0 * std::pow(s.delta, -spec.r / 2.0);
    s.nu = spec.nu0 * std::min(1.0 / m, 1.0 / (s.psi * m));
    out.push_back(s);
  }
  return out;
}

ScheduleProducts schedule_products(const std::vector<LevelSchedule>& schedule) {
  ScheduleProducts p;
  for (const auto& s : schedule) {
    p.lambda.push_back(s.lambda * std::pow(s.m, -s.preserved_rate() * s.q));
    p.mu.push_back(s.mu * std::pow(s.delta, s.r));
    p.nu.push_back(s.nu * s.psi);
  }
  return p;
}

void check_schedule_products(const std::vector<LevelSchedule>& schedule) {
  if (schedule.size() < 2) throw InsufficientData("product checks need at least two levels");
  const ScheduleProducts p = schedule_products(schedule);
  auto check = [](const std::vector<double>& v, const char* name) {
    for (std::size_t i = 1; i < v.size(); ++i)
      if (!(v[i] < v[i - 1]))
        throw ValidationError("learn.levels",
                              fmt::format("schedule product {} does not decrease at level index {}", name, i));
    if (!(v.back() < 0.5 * v.front()))
      throw ValidationError("learn.levels", fmt::format("schedule product {} ends at {:.3g}, not below half of {:.3g}",
                                                        name, v.back(), v.front()));
  };
  check(p.lambda, "lambda m^(-rate q)");
  check(p.mu, "mu delta^r");
  check(p.nu, "nu psi");
}

// ---------------------------------------------------------------------------
// The all-at-once problem

namespace {

thread_local MlpReaction::Workspace tl_workspace;

/// Wrapped network value at one point. `a` receives the factor multiplying f
/// (1 where f >= 0, 1 - chi(s) otherwise).
void wrapped_point(const MlpReaction& net, const TransitionFunction& chi, std::span<const double> s,
                   MlpReaction::Workspace& ws, std::span<double> f, std::span<double> fbar, std::span<double> a) {
  net.forward(s, {}, ws);
  const Vector& out = MlpReaction::output(ws);
  for (std::size_t n = 0; n < s.size(); ++n) {
    const double v = out[static_cast<Eigen::Index>(n)];
    f[n] = v;
    if (v < 0.0) {
      const double x = chi.evaluate(s[n]);
      fbar[n] = x == 0.0 ? v : (x == 1.0 ? 0.0 : v * (1.0 - x));
      a[n] = 1.0 - x;
    } else {
      fbar[n] = v;
      a[n] = 1.0;
    }
  }
}

/// Pulls an adjoint g of fbar(s) back to theta and s. Uses the workspace of
/// the preceding wrapped_point call at s.
void wrapped_backward(const MlpReaction& net, const TransitionFunction& chi, std::span<const double> s,
                      const MlpReaction::Workspace& ws, std::span<const double> f, std::span<const double> a,
                      std::span<const double> g, std::span<double> grad_theta, std::span<double> grad_s) {
  const std::size_t n_sp = s.size();
  double y_adj[16];
  std::vector<double> y_heap;
  double* y = y_adj;
  if (n_sp > 16) {
    y_heap.resize(n_sp);
    y = y_heap.data();
  }
  for (std::size_t n = 0; n < n_sp; ++n) {
    y[n] = g[n] * a[n];
    if (!grad_s.empty() && f[n] < 0.0) grad_s[n] -= g[n] * f[n] * chi.derivative(s[n]);
  }
  net.backward(ws, {y, n_sp}, {}, grad_theta, grad_s);
}

}  // namespace

AllAtOnceProblem::AllAtOnceProblem(ProblemSetup setup)
    : setup_(std::move(setup)), chi_(mollified_heaviside(setup_.schedule.eps)) {
  auto& s = setup_;
  s.grid.validate();
  s.architecture.validate();
  if (s.species == 0) throw InvalidParameter("problem needs at least one species");
  if (s.architecture.species() != s.species || s.architecture.widths.back() != s.species)
    throw DimensionMismatch(s.species, s.architecture.species());
  if (s.reaction_box.dim() != s.species) throw DimensionMismatch(s.species, s.reaction_box.dim());
  if (!s.measurement) throw InvalidParameter("problem needs a measurement operator");
  if (s.data.empty()) throw InsufficientData("problem needs at least one trajectory of data");
  if (!(s.d_min > 0.0)) throw InvalidParameter("d_min must be positive");
  if (s.quadrature_per_axis < 2) throw InvalidParameter("quadrature needs at least two nodes per axis");
  if (s.sup_samples_per_species == 0) throw InvalidParameter("gradient sup needs samples");

  nodes_ = s.grid.node_count();
  theta_size_ = s.architecture.parameter_count();
  per_traj_ = s.species + s.species * nodes_ + state_size();
  if (s.measurement->input_size() != state_size()) throw DimensionMismatch(state_size(), s.measurement->input_size());
  for (const auto& y : s.data)
    if (y.size() != s.measurement->outputs()) throw DimensionMismatch(s.measurement->outputs(), y.size());

  node_weights_ = s.grid.node_weights();
  time_weights_ = trapezoid_weights_1d(s.grid.steps + 1, s.grid.dt());

  if (s.species <= 2) {
    auto grid = trapezoid_grid(s.reaction_box, s.quadrature_per_axis);
    quad_points_ = std::move(grid.points);
    quad_weights_ = std::move(grid.weights);
  } else {
    const std::size_t count = s.quadrature_per_axis * s.quadrature_per_axis * s.species;
    quad_points_ = sobol_points(s.reaction_box, count);
    quad_weights_.assign(count, s.reaction_box.volume() / static_cast<double>(count));
  }
  sup_points_ = sobol_points(s.reaction_box, s.sup_samples_per_species * s.species);
  const PointSet corners = box_corners(s.reaction_box);
  for (std::size_t i = 0; i < corners.size(); ++i) sup_points_.append(corners[i]);

  // Edges of the tensor grid with weight h_a * (trapezoid weights of the
  // other axes) / h_a^2.
  const std::size_t dim = s.grid.dim();
  std::vector<std::vector<double>> axis_w(dim);
  for (std::size_t a = 0; a < dim; ++a) axis_w[a] = trapezoid_weights_1d(s.grid.nodes[a], s.grid.spacing(a));
  std::vector<std::size_t> idx(dim);
  for (std::size_t i = 0; i < nodes_; ++i) {
    std::size_t rest = i;
    for (std::size_t a = 0; a < dim; ++a) {
      idx[a] = rest % s.grid.nodes[a];
      rest /= s.grid.nodes[a];
    }
    std::size_t stride = 1;
    for (std::size_t a = 0; a < dim; ++a) {
      if (idx[a] + 1 < s.grid.nodes[a]) {
        const double h = s.grid.spacing(a);
        double w = h;
        for (std::size_t b = 0; b < dim; ++b)
          if (b != a) w *= axis_w[b][idx[b]];
        edge_from_.push_back(i);
        edge_to_.push_back(i + stride);
        edge_weight_.push_back(w / (h * h));
      }
      stride *= s.grid.nodes[a];
    }
  }
}

std::vector<double> AllAtOnceProblem::initial_point(std::uint64_t seed, double theta_scale) const {
  std::vector<double> x(size(), 0.0);
  const MlpReaction net = MlpReaction::random(setup_.architecture, seed, theta_scale);
  std::copy(net.theta().begin(), net.theta().end(), x.begin());
  const std::size_t n_sp = setup_.species;
  for (std::size_t l = 0; l < trajectories(); ++l) {
    std::fill_n(x.begin() + static_cast<std::ptrdiff_t>(diffusion_offset(l)), n_sp, setup_.d_min);
    const std::vector<double> traj = setup_.measurement->reconstruct(setup_.data[l]);
    std::copy(traj.begin(), traj.end(), x.begin() + static_cast<std::ptrdiff_t>(state_offset(l)));
    std::copy_n(traj.begin(), n_sp * nodes_, x.begin() + static_cast<std::ptrdiff_t>(initial_offset(l)));
  }
  return x;
}

MlpReaction AllAtOnceProblem::reaction(std::span<const double> x) const {
  if (x.size() != size()) throw DimensionMismatch(size(), x.size());
  Vector theta = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(theta_size_));
  return MlpReaction(setup_.architecture, std::move(theta), static_cast<std::size_t>(setup_.schedule.m));
}

std::shared_ptr<ConsistentReaction> AllAtOnceProblem::wrapped_reaction(std::span<const double> x) const {
  return std::make_shared<ConsistentReaction>(std::make_shared<MlpReaction>(reaction(x)), chi_);
}

void AllAtOnceProblem::project(std::span<double> x) const {
  if (x.size() != size()) throw DimensionMismatch(size(), x.size());
  for (std::size_t l = 0; l < trajectories(); ++l)
    for (std::size_t n = 0; n < setup_.species; ++n) {
      double& d = x[diffusion_offset(l) + n];
      d = std::max(d, setup_.d_min);
    }
  if (setup_.enforce_parameter_bound) {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < theta_size_; ++j) norm2 += x[j] * x[j];
    const double norm = std::sqrt(norm2);
    if (norm > setup_.schedule.psi)
      for (std::size_t j = 0; j < theta_size_; ++j) x[j] *= setup_.schedule.psi / norm;
  }
}

ObjectiveTerms AllAtOnceProblem::evaluate(std::span<const double> x) const { return evaluate(x, {}); }

ObjectiveTerms AllAtOnceProblem::evaluate(std::span<const double> x, std::span<double> grad) const {
  if (x.size() != size()) throw DimensionMismatch(size(), x.size());
  const bool want_grad = !grad.empty();
  if (want_grad) {
    if (grad.size() != size()) throw DimensionMismatch(size(), grad.size());
    std::fill(grad.begin(), grad.end(), 0.0);
  }
  const auto& sched = setup_.schedule;
  const auto& grid = setup_.grid;
  const std::size_t n_sp = setup_.species;
  const std::size_t P = nodes_;
  const std::size_t K = grid.steps;
  const std::size_t L = trajectories();
  const double dt = grid.dt();
  const MlpReaction net = reaction(x);
  const std::span<double> grad_theta = want_grad ? grad.subspan(0, theta_size_) : std::span<double>{};
  ObjectiveTerms t;

  // --- regularisation R0 -------------------------------------------------
  for (std::size_t l = 0; l < L; ++l) {
    const double* d = x.data() + diffusion_offset(l);
    const double* u0 = x.data() + initial_offset(l);
    const double* u = x.data() + state_offset(l);
    for (std::size_t n = 0; n < n_sp; ++n) {
      t.regularization += d[n] * d[n];
      if (want_grad) grad[diffusion_offset(l) + n] += 2.0 * d[n];
    }
    for (std::size_t n = 0; n < n_sp; ++n)
      for (std::size_t i = 0; i < P; ++i) {
        const double v = u0[n * P + i];
        t.regularization += node_weights_[i] * v * v;
        if (want_grad) grad[initial_offset(l) + n * P + i] += 2.0 * node_weights_[i] * v;
      }
    // |u|_V^p = sum_k tau_k S_k^(p/2), S_k the squared discrete H1 norm of slice k.
    for (std::size_t k = 0; k <= K; ++k) {
      const double* uk = u + k * n_sp * P;
      double sk = 0.0;
      for (std::size_t n = 0; n < n_sp; ++n) {
        const double* v = uk + n * P;
        for (std::size_t i = 0; i < P; ++i) sk += node_weights_[i] * v[i] * v[i];
        for (std::size_t e = 0; e < edge_from_.size(); ++e) {
          const double diff = v[edge_to_[e]] - v[edge_from_[e]];
          sk += edge_weight_[e] * diff * diff;
        }
      }
      t.regularization += time_weights_[k] * safe_pow(sk, sched.p / 2.0);
      if (want_grad && sk > 0.0) {
        const double c = time_weights_[k] * sched.p / 2.0 * std::pow(sk, sched.p / 2.0 - 1.0);
        double* g = grad.data() + state_offset(l) + k * n_sp * P;
        for (std::size_t n = 0; n < n_sp; ++n) {
          const double* v = uk + n * P;
          double* gn = g + n * P;
          for (std::size_t i = 0; i < P; ++i) gn[i] += c * 2.0 * node_weights_[i] * v[i];
          for (std::size_t e = 0; e < edge_from_.size(); ++e) {
            const double diff = v[edge_to_[e]] - v[edge_from_[e]];
            gn[edge_to_[e]] += c * 2.0 * edge_weight_[e] * diff;
            gn[edge_from_[e]] -= c * 2.0 * edge_weight_[e] * diff;
          }
        }
      }
    }
  }

  // --- nu |theta| ---------------------------------------------------------
  {
    double norm2 = 0.0;
    for (std::size_t j = 0; j < theta_size_; ++j) norm2 += x[j] * x[j];
    const double norm = std::sqrt(norm2);
    t.theta_norm = sched.nu * norm;
    if (want_grad && norm > 0.0)
      for (std::size_t j = 0; j < theta_size_; ++j) grad[j] += sched.nu * x[j] / norm;
  }

  // --- |fbar|^2 on U ------------------------------------------------------
  {
    const std::size_t count = quad_points_.size();
    std::vector<double> contrib(count);
    kernels::for_each_index(count, [&](std::size_t j) {
      std::vector<double> f(n_sp), fb(n_sp), a(n_sp);
      wrapped_point(net, chi_, quad_points_[j], tl_workspace, f, fb, a);
      double acc = 0.0;
      for (double v : fb) acc += v * v;
      contrib[j] = quad_weights_[j] * acc;
    });
    for (double c : contrib) t.reaction_l2 += c;
    if (want_grad) {
      std::vector<double> acc;
      kernels::accumulate(
          count, theta_size_,
          [&](std::size_t j, double* out) {
            std::vector<double> f(n_sp), fb(n_sp), a(n_sp), g(n_sp);
            const auto s = quad_points_[j];
            wrapped_point(net, chi_, s, tl_workspace, f, fb, a);
            for (std::size_t n = 0; n < n_sp; ++n) g[n] = 2.0 * quad_weights_[j] * fb[n];
            wrapped_backward(net, chi_, s, tl_workspace, f, a, g, {out, theta_size_}, {});
          },
          acc);
      for (std::size_t j = 0; j < theta_size_; ++j) grad_theta[j] += acc[j];
    }
  }

  // --- max over U of |grad fbar|_F ----------------------------------------
  {
    // Frobenius norm of the a.e. Jacobian of fbar at s; jbar is filled
    // row-major (n, j).
    auto jac_norm = [&](std::span<const double> s, MlpReaction::Workspace& ws, std::vector<double>& f,
                        std::vector<double>& a, std::vector<double>& jbar) {
      std::vector<double> fb(n_sp), dir(n_sp, 0.0);
      wrapped_point(net, chi_, s, ws, f, fb, a);
      double g2 = 0.0;
      for (std::size_t j = 0; j < n_sp; ++j) {
        dir.assign(n_sp, 0.0);
        dir[j] = 1.0;
        net.forward(s, dir, ws);
        const Vector& df = MlpReaction::output_tangent(ws);
        for (std::size_t n = 0; n < n_sp; ++n) {
          double v = a[n] * df[static_cast<Eigen::Index>(n)];
          if (n == j && f[n] < 0.0) v -= f[n] * chi_.derivative(s[n]);
          jbar[n * n_sp + j] = v;
          g2 += v * v;
        }
      }
      return std::sqrt(g2);
    };
    const auto best = kernels::argmax(sup_points_.size(), [&](std::size_t i) {
      std::vector<double> f(n_sp), a(n_sp), jbar(n_sp * n_sp);
      return jac_norm(sup_points_[i], tl_workspace, f, a, jbar);
    });
    t.gradient_sup = best.value;
    if (want_grad && best.value > 0.0 && std::isfinite(best.value)) {
      MlpReaction::Workspace ws;
      std::vector<double> f(n_sp), a(n_sp), jbar(n_sp * n_sp), dir(n_sp), ydot(n_sp), yadj(n_sp);
      const auto s = sup_points_[best.index];
      const double G = jac_norm(s, ws, f, a, jbar);
      for (std::size_t j = 0; j < n_sp; ++j) {
        dir.assign(n_sp, 0.0);
        dir[j] = 1.0;
        net.forward(s, dir, ws);
        for (std::size_t n = 0; n < n_sp; ++n) {
          ydot[n] = jbar[n * n_sp + j] * a[n] / G;
          yadj[n] = (n == j && f[n] < 0.0) ? -chi_.derivative(s[n]) * jbar[n * n_sp + j] / G : 0.0;
        }
        net.backward(ws, yadj, ydot, grad_theta, {});
      }
    }
  }

  // --- residual and initial misfit ----------------------------------------
  {
    const double qh = sched.q_hat;
    const std::size_t items = L * K;
    std::vector<double> resid(items * n_sp * P);
    std::vector<double> slice_sum(items, 0.0);
    kernels::for_each_index(items, [&](std::size_t it) {
      const std::size_t l = it / K, k = it % K;
      const double* u = x.data() + state_offset(l);
      const double* d = x.data() + diffusion_offset(l);
      const double* uk = u + k * n_sp * P;
      const double* uk1 = uk + n_sp * P;
      double* r = resid.data() + it * n_sp * P;
      std::vector<double> lap(P), s(n_sp), f(n_sp), fb(n_sp), a(n_sp);
      for (std::size_t n = 0; n < n_sp; ++n) {
        apply_laplacian(grid, {uk1 + n * P, P}, lap);
        for (std::size_t i = 0; i < P; ++i) r[n * P + i] = (uk1[n * P + i] - uk[n * P + i]) / dt - d[n] * lap[i];
      }
      for (std::size_t i = 0; i < P; ++i) {
        for (std::size_t n = 0; n < n_sp; ++n) s[n] = uk[n * P + i];
        wrapped_point(net, chi_, s, tl_workspace, f, fb, a);
        for (std::size_t n = 0; n < n_sp; ++n) r[n * P + i] -= fb[n];
      }
      double acc = 0.0;
      for (std::size_t n = 0; n < n_sp; ++n)
        for (std::size_t i = 0; i < P; ++i) acc += node_weights_[i] * safe_pow(std::abs(r[n * P + i]), qh);
      slice_sum[it] = acc;
    });
    for (std::size_t it = 0; it < items; ++it) t.residual += dt * safe_pow(slice_sum[it], sched.q / qh);

    for (std::size_t l = 0; l < L; ++l) {
      const double* u = x.data() + state_offset(l);
      const double* u0 = x.data() + initial_offset(l);
      for (std::size_t j = 0; j < n_sp * P; ++j) {
        const double diff = u[j] - u0[j];
        const double w = node_weights_[j % P];
        t.initial_misfit += w * diff * diff;
        if (want_grad) {
          grad[state_offset(l) + j] += 2.0 * sched.lambda * w * diff;
          grad[initial_offset(l) + j] -= 2.0 * sched.lambda * w * diff;
        }
      }
    }

    if (want_grad) {
      // rho = lambda dt q S_k^(q/qh - 1) w_i |r|^(qh-1) sign(r), overwritten in resid.
      kernels::for_each_index(items, [&](std::size_t it) {
        const double c = sched.lambda * dt * sched.q * safe_pow(slice_sum[it], sched.q / qh - 1.0);
        double* r = resid.data() + it * n_sp * P;
        for (std::size_t n = 0; n < n_sp; ++n)
          for (std::size_t i = 0; i < P; ++i) {
            const double v = r[n * P + i];
            const double mag = qh == 1.0 ? (v == 0.0 ? 0.0 : 1.0) : safe_pow(std::abs(v), qh - 1.0);
            r[n * P + i] = c * node_weights_[i] * mag * (v < 0.0 ? -1.0 : 1.0);
          }
      });
      // Reaction adjoint: theta through the blocked accumulator, u_k written
      // directly (each item owns its slice).
      std::vector<double> acc;
      kernels::accumulate(
          items, theta_size_,
          [&](std::size_t it, double* out) {
            const std::size_t l = it / K, k = it % K;
            const double* uk = x.data() + state_offset(l) + k * n_sp * P;
            double* gk = grad.data() + state_offset(l) + k * n_sp * P;
            const double* rho = resid.data() + it * n_sp * P;
            std::vector<double> s(n_sp), f(n_sp), fb(n_sp), a(n_sp), g(n_sp), gs(n_sp);
            for (std::size_t i = 0; i < P; ++i) {
              for (std::size_t n = 0; n < n_sp; ++n) {
                s[n] = uk[n * P + i];
                g[n] = -rho[n * P + i];
              }
              wrapped_point(net, chi_, s, tl_workspace, f, fb, a);
              gs.assign(n_sp, 0.0);
              wrapped_backward(net, chi_, s, tl_workspace, f, a, g, {out, theta_size_}, gs);
              for (std::size_t n = 0; n < n_sp; ++n) gk[n * P + i] += gs[n];
            }
          },
          acc);
      for (std::size_t j = 0; j < theta_size_; ++j) grad_theta[j] += acc[j];
      // Linear part, serial in a fixed order.
      std::vector<double> lap(P), lapt(P);
      for (std::size_t it = 0; it < items; ++it) {
        const std::size_t l = it / K, k = it % K;
        const double* d = x.data() + diffusion_offset(l);
        const double* uk1 = x.data() + state_offset(l) + (k + 1) * n_sp * P;
        double* gk = grad.data() + state_offset(l) + k * n_sp * P;
        double* gk1 = gk + n_sp * P;
        const double* rho = resid.data() + it * n_sp * P;
        for (std::size_t n = 0; n < n_sp; ++n) {
          const std::span<const double> rn{rho + n * P, P};
          apply_laplacian_transpose(grid, rn, lapt);
          apply_laplacian(grid, {uk1 + n * P, P}, lap);
          double gd = 0.0;
          for (std::size_t i = 0; i < P; ++i) {
            gk1[n * P + i] += rn[i] / dt - d[n] * lapt[i];
            gk[n * P + i] -= rn[i] / dt;
            gd += rn[i] * lap[i];
          }
          grad[diffusion_offset(l) + n] -= gd;
        }
      }
    }
  }

  // --- data misfit ----------------------------------------------------------
  {
    const auto& op = *setup_.measurement;
    const auto& w = op.weights();
    std::vector<double> e(op.outputs());
    for (std::size_t l = 0; l < L; ++l) {
      op.apply(x.subspan(state_offset(l), state_size()), e);
      double q = 0.0;
      for (std::size_t j = 0; j < e.size(); ++j) {
        e[j] -= setup_.data[l][j];
        q += w[j] * e[j] * e[j];
      }
      t.misfit += safe_pow(q, sched.r / 2.0);
      if (want_grad && q > 0.0) {
        const double c = sched.mu * sched.r * std::pow(q, sched.r / 2.0 - 1.0);
        for (std::size_t j = 0; j < e.size(); ++j) e[j] *= c * w[j];
        op.apply_adjoint(e, grad.subspan(state_offset(l), state_size()));
      }
    }
  }

  t.total = t.regularization + t.theta_norm + t.reaction_l2 + t.gradient_sup +
            sched.lambda * (t.residual + t.initial_misfit) + sched.mu * t.misfit;
  if (!std::isfinite(t.total)) {
    const std::pair<const char*, double> parts[] = {
        {"regularization", t.regularization}, {"theta norm", t.theta_norm}, {"reaction L2", t.reaction_l2},
        {"gradient sup", t.gradient_sup},     {"residual", t.residual},     {"initial misfit", t.initial_misfit},
        {"misfit", t.misfit}};
    for (const auto& [name, v] : parts)
      if (!std::isfinite(v)) throw Error(fmt::format("objective term '{}' is not finite", name));
    throw Error("objective is not finite");
  }
  return t;
}

// ---------------------------------------------------------------------------
// Optimisation

LevelResult solve_level(const AllAtOnceProblem& problem, std::vector<double> x0, const OptimizerOptions& options) {
  if (x0.size() != problem.size()) throw DimensionMismatch(problem.size(), x0.size());
  if (!(options.step > 0.0)) throw InvalidParameter("optimizer step must be positive");
  if (options.window == 0) throw InvalidParameter("optimizer window must be positive");
  const std::size_t n = x0.size();
  LevelResult res;
  res.x = std::move(x0);
  problem.project(res.x);
  std::vector<double> grad(n), trial(n), trial_grad(n), m1(n, 0.0), m2(n, 0.0);
  res.terms = problem.evaluate(res.x, grad);
  double f = res.terms.total;
  const double f_initial = f;
  res.history.push_back(f);

  double scale = 1.0;
  std::size_t t = 0;
  std::size_t resets = 0;
  res.stop_reason = "max_iters";
  for (std::size_t iter = 0; iter < options.max_iters; ++iter) {
    ++t;
    const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(t));
    for (std::size_t j = 0; j < n; ++j) {
      m1[j] = options.beta1 * m1[j] + (1.0 - options.beta1) * grad[j];
      m2[j] = options.beta2 * m2[j] + (1.0 - options.beta2) * grad[j] * grad[j];
    }
    bool accepted = false;
    ObjectiveTerms trial_terms;
    for (std::size_t bt = 0; bt <= options.max_backtracks; ++bt) {
      const double step = options.step * scale;
      for (std::size_t j = 0; j < n; ++j)
        trial[j] = res.x[j] - step * (m1[j] / c1) / (std::sqrt(m2[j] / c2) + options.adam_eps);
      problem.project(trial);
      try {
        trial_terms = problem.evaluate(trial, trial_grad);
        if (trial_terms.total <= f + 1e-12 * std::max(1.0, std::abs(f))) {
          accepted = true;
          break;
        }
      } catch (const Error&) {
        // non-finite trial: treat as a rejected step
      }
      scale *= 0.5;
    }
    res.iterations = iter + 1;
    if (!accepted) {
      std::fill(m1.begin(), m1.end(), 0.0);
      std::fill(m2.begin(), m2.end(), 0.0);
      t = 0;
      scale = 1.0;
      if (++resets >= 2) {
        res.stop_reason = "stalled";
        break;
      }
      continue;
    }
    resets = 0;
    scale = std::min(1.0, 2.0 * scale);
    res.x.swap(trial);
    grad.swap(trial_grad);
    f = trial_terms.total;
    res.terms = trial_terms;
    res.history.push_back(f);
    if (f > options.divergence_factor * std::abs(f_initial))
      throw DivergenceError(fmt::format("objective grew from {:.6g} to {:.6g}", f_initial, f));
    if (res.history.size() > options.window) {
      const double past = res.history[res.history.size() - 1 - options.window];
      if ((past - f) <= options.rel_tol * std::max(std::abs(past), 1e-300)) {
        res.stop_reason = "converged";
        break;
      }
    }
  }
  return res;
}

double reaction_sup_error(const ReactionTerm& learned, const ReactionTerm& truth, const Box& box,
                          std::size_t samples_per_species) {
  const std::size_t n = truth.species();
  if (learned.species() != n) throw DimensionMismatch(n, learned.species());
  if (box.dim() != n) throw DimensionMismatch(n, box.dim());
  PointSet pts = sobol_points(box, samples_per_species * n);
  const PointSet corners = box_corners(box);
  for (std::size_t i = 0; i < corners.size(); ++i) pts.append(corners[i]);
  return kernels::max(pts.size(), [&](std::size_t i) {
    std::vector<double> a(n), b(n);
    learned.evaluate(pts[i], a);
    truth.evaluate(pts[i], b);
    double worst = 0.0;
    for (std::size_t c = 0; c < n; ++c) worst = std::max(worst, std::abs(a[c] - b[c]));
    return worst;
  });
}

// ---------------------------------------------------------------------------
// Level sweeps

std::vector<SweepRow> run_level_sweep(const LearningExperiment& ex, const std::vector<std::size_t>& levels,
                                      const SweepObserver& observer) {
  if (!ex.truth) throw InvalidParameter("sweep needs a true reaction");
  if (levels.empty()) throw InsufficientData("sweep needs at least one level");
  if (ex.initial.empty()) throw InsufficientData("sweep needs at least one trajectory");
  const std::size_t n_sp = ex.truth->species();
  if (ex.true_diffusion.size() != n_sp) throw DimensionMismatch(n_sp, ex.true_diffusion.size());

  std::vector<double> level_values(levels.begin(), levels.end());
  const auto schedule = make_schedule(ex.schedule, level_values);
  if (schedule.size() >= 2) check_schedule_products(schedule);

  const DiffusionSpec diffusion{ex.true_diffusion, ex.d_min};
  std::vector<StateField> truth_fields;
  for (const auto& profile : ex.initial) {
    const auto u0 = sample_initial(ex.grid, n_sp, profile);
    truth_fields.push_back(solve(*ex.truth, diffusion, u0, ex.grid).field);
  }

  MlpArchitecture arch;
  arch.widths.push_back(n_sp);
  arch.widths.insert(arch.widths.end(), ex.hidden.begin(), ex.hidden.end());
  arch.widths.push_back(n_sp);

  std::vector<SweepRow> rows;
  std::vector<double> previous;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const LevelSchedule& s = schedule[li];
    const std::size_t m = levels[li];
    auto op = std::make_shared<MeasurementOperator>(
        MeasurementOperator::for_level(ex.measurement, ex.grid, n_sp, m, ex.full_level));

    ProblemSetup setup;
    setup.grid = ex.grid;
    setup.species = n_sp;
    setup.architecture = arch;
    setup.reaction_box = ex.reaction_box;
    setup.schedule = s;
    setup.measurement = op;
    for (std::size_t l = 0; l < truth_fields.size(); ++l)
      setup.data.push_back(generate_measurements(truth_fields[l], *op, s.delta, mix_seed(ex.seed, m, l)));
    setup.d_min = ex.d_min;
    setup.enforce_parameter_bound = ex.enforce_parameter_bound;
    setup.quadrature_per_axis = ex.quadrature_per_axis;
    setup.sup_samples_per_species = ex.sup_samples_per_species;
    const AllAtOnceProblem problem(std::move(setup));

    std::vector<double> x0 = (ex.warm_start && !previous.empty())
                                 ? previous
                                 : problem.initial_point(mix_seed(ex.seed, 0, 0xFFFF), ex.theta_scale);
    LevelResult result = solve_level(problem, std::move(x0), ex.optimizer);

    SweepRow row;
    row.m = s.m;
    row.objective = result.terms.total;
    row.residual_term = s.lambda * (result.terms.residual + result.terms.initial_misfit);
    row.misfit_term = s.mu * result.terms.misfit;
    row.sup_error_f = reaction_sup_error(*problem.wrapped_reaction(result.x), *ex.truth, ex.reaction_box);
    for (std::size_t l = 0; l < problem.trajectories(); ++l)
      for (std::size_t n = 0; n < n_sp; ++n)
        row.d_error =
            std::max(row.d_error, std::abs(result.x[problem.diffusion_offset(l) + n] - ex.true_diffusion[n]));
    std::size_t outside = 0;
    const std::size_t nodes = ex.grid.node_count();
    for (std::size_t l = 0; l < problem.trajectories(); ++l)
      for (std::size_t j = 0; j < problem.state_size(); ++j) {
        const std::size_t n = (j / nodes) % n_sp;
        const double v = result.x[problem.state_offset(l) + j];
        outside += v < ex.reaction_box.lo[n] || v > ex.reaction_box.hi[n];
      }
    row.outside_fraction =
        static_cast<double>(outside) / static_cast<double>(problem.trajectories() * problem.state_size());
    row.iterations = result.iterations;
    row.stop_reason = result.stop_reason;
    row.parameters.arch = arch;
    row.parameters.level = m;
    row.parameters.seed = ex.seed;
    row.parameters.wrapper_eps = s.eps;
    row.parameters.theta = problem.reaction(result.x).theta();
    if (observer) observer(row);
    rows.push_back(std::move(row));
    previous = std::move(result.x);
  }
  return rows;
}

}  // namespace rdlearn
