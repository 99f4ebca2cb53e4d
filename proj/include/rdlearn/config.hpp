#pragma once

// Experiment configuration: an INI document with a top-level `seed` and the
// sections listed in config.cpp. Parsing is strict (unknown sections or keys
// are errors) and serialisation is canonical, so parse -> serialize -> parse
// reproduces the same document.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rdlearn/learn.hpp"
#include "rdlearn/quasipos.hpp"
#include "rdlearn/rdsolve.hpp"

namespace rdlearn {

struct DomainConfig {
  std::vector<double> extent{1.0};
  std::string boundary = "neumann";
  std::vector<double> dirichlet_values;
};

struct GridConfig {
  std::vector<std::size_t> nodes{101};
  double horizon = 1.0;
  std::size_t steps = 100;
};

struct ReactionConfig {
  std::string model = "fisher-kpp";  // catalogue name, "mlp" or "file"
  std::size_t species = 1;           // used by "mlp"; catalogue models fix their own
  std::vector<double> diffusion{0.1};
  double feed = 0.04;
  double kill = 0.06;
  std::vector<std::size_t> hidden{16, 16};
  double init_scale = 1.0;  // random network weights
  std::string parameters;   // parameter file for "file"
};

struct InitialConfig {
  std::string profile = "cosine";  // cosine | constant | random
  std::vector<double> amplitudes{0.5};
  std::vector<std::size_t> modes{1};
};

struct WrapperConfig {
  double eps = 0.0;  // 0 disables the wrapper
  std::vector<double> weights;
};

struct ScheduleConfig {
  double alpha = 2.0;
  double beta = 1.0;
  double gamma = 0.5;
  double p = 2.0;
  double q = 2.0;
  double r = 2.0;
  double q_hat = 2.0;
  double lambda0 = 3000.0;
  double mu0 = 3000.0;
  double nu0 = 1.0;
  double psi_factor = 10.0;  // psi(m) = psi_factor * m
};

struct NoiseConfig {
  std::string delta_rule = "pow2";  // pow2: delta0 2^-m, inverse: delta0 / m, constant: delta0
  double delta0 = 1.0;
};

struct MeasurementConfig {
  std::string kind = "subsample";
  std::size_t level = 3;  // level at which the operator becomes the full one
};

struct OptimizerConfig {
  double step = 1e-2;
  std::size_t max_iters = 20000;
  double rel_tol = 1e-8;
  std::size_t window = 50;
  std::size_t max_backtracks = 30;
};

struct LearnConfig {
  std::vector<std::size_t> levels{1, 2, 3};
  std::string box = "0..1";  // U, "LO..HI" with scalar or per-species bounds
  bool warm_start = true;
  bool enforce_parameter_bound = false;
  double theta_scale = 0.1;
  double d_min = 1e-6;
  std::size_t quadrature_per_axis = 33;
  std::size_t sup_samples = 4096;  // per species
};

struct CheckConfig {
  std::string box = "0..1";
  std::size_t samples = 10000;
};

struct RatesConfig {
  double alpha = 2.0;
  double beta = 1.0;
  double gamma = 0.5;
  std::vector<double> levels{4, 8, 16, 32, 64};
  std::size_t samples = 10000;  // per species
};

struct QuasiposConfig {
  std::string mode = "metric";
  std::string example = "uniform-2d";
  std::size_t dim = 2;
  std::size_t samples = 20000;
  std::size_t level_count = 8;
  std::vector<double> points{0.1, 0.25, 0.5};
};

struct TransitionConfig {
  double eps = 0.1;
  std::size_t samples = 1001;
};

struct ConvergenceConfig {
  std::size_t refinements = 4;
  std::size_t base_nodes = 17;
  std::size_t time_nodes = 801;
  std::size_t base_steps = 8;
  double diffusion = 0.1;
  double horizon = 0.5;
};

struct OutputConfig {
  std::string dir = "out";
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  DomainConfig domain;
  GridConfig grid;
  ReactionConfig reaction;
  InitialConfig initial;
  WrapperConfig wrapper;
  ScheduleConfig schedule;
  NoiseConfig noise;
  MeasurementConfig measurement;
  OptimizerConfig optimizer;
  LearnConfig learn;
  CheckConfig check;
  RatesConfig rates;
  QuasiposConfig quasipos;
  TransitionConfig transition;
  ConvergenceConfig convergence;
  OutputConfig output;

  /// Range checks; throws ValidationError naming the key.
  void validate() const;

  SpaceTimeGrid space_time_grid() const;
  std::size_t species() const;
  /// The configured reaction (unwrapped).
  ReactionPtr make_base_reaction() const;
  /// The configured reaction wrapped when wrapper.eps > 0.
  ReactionPtr make_reaction() const;
  DiffusionSpec diffusion_spec() const;
  SolveOptions solve_options() const;
  std::vector<InitialProfile> initial_profiles() const;
  ScheduleSpec schedule_spec() const;
  OptimizerOptions optimizer_options() const;
  LearningExperiment learning_experiment() const;
  Box learn_box() const;
  Box check_box() const;
};

/// Parses INI text; `origin` prefixes error messages.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "config");
ExperimentConfig load_config(const std::string& path);
/// Canonical INI text (every key, fixed order, round-trip-safe numbers).
std::string serialize_config(const ExperimentConfig& config);

/// "1..3" (inclusive integer range) or "1,2,4" (explicit list).
std::vector<std::size_t> parse_levels(const std::string& text);

}  // namespace rdlearn
