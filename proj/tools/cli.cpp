#include "cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "rdlearn/config.hpp"
#include "rdlearn/consistency.hpp"
#include "rdlearn/error.hpp"
#include "rdlearn/io.hpp"
#include "rdlearn/learn.hpp"
#include "rdlearn/quasipos.hpp"
#include "rdlearn/rdsolve.hpp"
#include "rdlearn/reaction.hpp"
#include "rdlearn/transition.hpp"

namespace rdlearn::cli {

namespace {

using io::CsvTable;
using io::format_real;
using io::OutputDirectory;

/// Flags shared by every subcommand.
struct Common {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string levels;
};

ExperimentConfig resolve_config(const Common& common, const std::string& default_out) {
  ExperimentConfig config;
  if (!common.config_path.empty()) {
    config = load_config(common.config_path);
  } else {
    config.output.dir = default_out;
  }
  if (common.seed) config.seed = *common.seed;
  if (!common.out_dir.empty()) config.output.dir = common.out_dir;
  return config;
}

/// "a..b" doubles from a up to b; otherwise a comma-separated list.
std::vector<double> parse_rate_levels(const std::string& text) {
  std::vector<double> levels;
  const auto sep = text.find("..");
  if (sep != std::string::npos) {
    const double lo = std::stod(text.substr(0, sep));
    const double hi = std::stod(text.substr(sep + 2));
    if (!(lo >= 1.0) || !(hi > lo)) throw ValidationError("--levels", "range must satisfy 1 <= m1 < mK");
    for (double m = lo; m <= hi * (1.0 + 1e-12); m *= 2.0) levels.push_back(m);
    return levels;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) levels.push_back(std::stod(item));
  return levels;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Common& common, std::ostream& out) {
  const ExperimentConfig config = resolve_config(common, "out/simulate");
  const SpaceTimeGrid grid = config.space_time_grid();
  const std::size_t n_sp = config.species();
  const ReactionPtr f = config.make_reaction();
  const auto profiles = config.initial_profiles();
  const auto u0 = sample_initial(grid, n_sp, profiles.front());
  const Solution sol = solve(*f, config.diffusion_spec(), u0, grid, config.solve_options());

  std::vector<std::string> header{"t", "x"};
  if (grid.dim() == 2) header.emplace_back("y");
  for (std::size_t n = 0; n < n_sp; ++n) header.push_back(fmt::format("u_{}", n + 1));
  CsvTable traj(header);
  std::vector<double> x(grid.dim()), row;
  for (std::size_t k = 0; k <= grid.steps; ++k)
    for (std::size_t i = 0; i < grid.node_count(); ++i) {
      grid.coordinates(i, x);
      row.assign({grid.time(k)});
      row.insert(row.end(), x.begin(), x.end());
      for (std::size_t n = 0; n < n_sp; ++n) row.push_back(sol.field.at(k, n, i));
      traj.row(row);
    }
  CsvTable diag({"t", "min_u", "mass_weighted"});
  for (std::size_t k = 0; k <= grid.steps; ++k)
    diag.row({grid.time(k), sol.diagnostics.min_u[k], sol.diagnostics.mass[k]});

  OutputDirectory dir(config.output.dir);
  dir.write("trajectory.csv", traj.str());
  dir.write("diagnostics.csv", diag.str());
  dir.write("config.ini", serialize_config(config));
  dir.write_manifest();
  out << fmt::format("simulate: {} species, {} nodes, {} steps, min u = {:.6g}\n", n_sp, grid.node_count(),
                     grid.steps, sol.diagnostics.min_overall);
  out << "wrote " << dir.path() << "\n";
  return 0;
}

struct CheckArgs {
  std::string reaction;
  std::string box;
  std::optional<std::size_t> samples;
  double wrap_eps = 0.0;
};

int cmd_check(const Common& common, const CheckArgs& args, std::ostream& out) {
  ExperimentConfig config = resolve_config(common, "out/check");
  if (!args.box.empty()) config.check.box = args.box;
  if (args.samples) config.check.samples = *args.samples;
  if (args.wrap_eps < 0.0) throw ValidationError("--wrap-eps", "must be >= 0");

  ReactionPtr f;
  std::string label;
  if (args.reaction.empty()) {
    f = config.make_base_reaction();
    label = config.reaction.model;
  } else if (args.reaction == "fisher-kpp" || args.reaction == "lotka-volterra" || args.reaction == "gray-scott") {
    f = CatalogReaction::from_name(args.reaction);
    label = args.reaction;
  } else if (std::filesystem::exists(args.reaction)) {
    const ParameterFile file = read_parameter_file(args.reaction);
    f = std::make_shared<MlpReaction>(file.arch, file.theta, file.level);
    label = args.reaction;
  } else {
    throw ValidationError("--reaction", "'" + args.reaction + "' is neither a catalogue model nor a parameter file");
  }
  if (args.wrap_eps > 0.0) {
    f = wrap(f, mollified_heaviside(args.wrap_eps));
    label += fmt::format(" (wrapped, eps = {})", format_real(args.wrap_eps));
  }

  Box box;
  try {
    box = Box::parse(config.check.box, f->species());
  } catch (const InvalidParameter& e) {
    throw ValidationError("--box", e.what());
  }
  const ConditionReport report = check_conditions(*f, box, config.check.samples, config.wrapper.weights);

  std::string text;
  text += fmt::format("reaction: {}\n", label);
  text += fmt::format("species: {}\n", f->species());
  text += fmt::format("samples: {}\n", report.samples);
  text += fmt::format("(L) sampled Lipschitz estimate: {}\n", format_real(report.lipschitz_sampled));
  text += fmt::format("(L) certified bound: {}\n",
                      report.lipschitz_certified ? format_real(*report.lipschitz_certified) : "none");
  text += fmt::format("(Q) quasipositivity violations: {} -> {}\n", report.violations.size(),
                      report.quasipositive() ? "pass" : "FAIL");
  text += fmt::format("(M) K0 = {}, K1 = {}, worst margin = {} -> {}\n", format_real(report.k0),
                      format_real(report.k1), format_real(report.mass_worst_margin),
                      report.mass_controlled() ? "pass" : "FAIL");
  text += fmt::format("(G) K = {}, worst ratio = {} -> {}\n", format_real(report.growth_constant),
                      format_real(report.growth_worst_ratio), report.growth_bounded() ? "pass" : "FAIL");

  std::vector<std::string> header;
  for (std::size_t n = 0; n < f->species(); ++n) header.push_back(fmt::format("u_{}", n + 1));
  header.emplace_back("component");
  header.emplace_back("value");
  CsvTable violations(header);
  for (const auto& v : report.violations) {
    std::vector<std::string> cells;
    for (double x : v.point) cells.push_back(format_real(x));
    cells.push_back(std::to_string(v.component + 1));
    cells.push_back(format_real(v.value));
    violations.row_text(cells);
  }

  OutputDirectory dir(config.output.dir);
  dir.write("report.txt", text);
  dir.write("violations.csv", violations.str());
  dir.write_manifest();
  out << text << "wrote " << dir.path() << "\n";
  return 0;
}

struct RateArgs {
  std::optional<double> alpha, beta, gamma;
  std::optional<std::size_t> samples;
};

int cmd_wrap_rates(const Common& common, const RateArgs& args, std::ostream& out) {
  ExperimentConfig config = resolve_config(common, "out/wrap-rates");
  if (args.alpha) config.rates.alpha = *args.alpha;
  if (args.beta) config.rates.beta = *args.beta;
  if (args.gamma) config.rates.gamma = *args.gamma;
  if (args.samples) config.rates.samples = *args.samples;
  if (!common.levels.empty()) config.rates.levels = parse_rate_levels(common.levels);
  config.validate();

  const auto& r = config.rates;
  const WrapperSchedule schedule{r.alpha, r.beta, r.gamma};
  const RateStudy study = rate_preservation_study(*power_target(r.alpha), shifted_family(r.alpha, r.beta), schedule,
                                                  Box::cube(1, 0.0, 1.0), r.levels, r.samples);
  CsvTable table({"m", "eps_m", "sup_error_raw", "sup_error_wrapped", "fitted_slope"});
  for (const auto& row : study.rows)
    table.row({row.m, row.eps, row.sup_error_raw, row.sup_error_wrapped, study.slope_wrapped});

  OutputDirectory dir(config.output.dir);
  dir.write("rates.csv", table.str());
  dir.write_manifest();
  out << fmt::format("wrap-rates: slope raw {:.4f}, wrapped {:.4f}, expected -{:.4f}\n", study.slope_raw,
                     study.slope_wrapped, schedule.preserved_rate());
  out << "wrote " << dir.path() << "\n";
  return 0;
}

struct QuasiposArgs {
  std::string mode;
  std::string example;
  std::optional<std::size_t> dim;
  std::optional<std::size_t> samples;
};

int cmd_quasipos(const Common& common, const QuasiposArgs& args, std::ostream& out) {
  ExperimentConfig config = resolve_config(common, "out/quasipos");
  if (!args.mode.empty()) config.quasipos.mode = args.mode;
  if (!args.example.empty()) config.quasipos.example = args.example;
  if (args.dim) config.quasipos.dim = *args.dim;
  if (args.samples) config.quasipos.samples = *args.samples;
  config.validate();
  const auto& q = config.quasipos;
  const quasipos::LayerMode mode = quasipos::parse_mode(q.mode);
  OutputDirectory dir(config.output.dir);

  if (mode == quasipos::LayerMode::nonlinear) {
    // Section volumes inside the unit cube; x is the layer width.
    CsvTable table({"x", "phi", "halfwidth"});
    for (double x : q.points) {
      const auto est = quasipos::nonlinear_section_volume(q.dim, x, 1.0, q.samples, config.seed);
      table.row({x, est.value, est.half_width});
    }
    dir.write("measure.csv", table.str());
  } else {
    quasipos::ApproximationSetup setup = quasipos::shipped_example(q.example, q.level_count);
    setup.layer = quasipos::BoundaryLayer(setup.layer.domain(), mode);
    setup.seed = config.seed;
    const auto rows = quasipos::approximation_experiment(setup);
    CsvTable table({"m", "eps", "delta", "raw_error", "modified_error"});
    std::size_t violations = 0;
    for (const auto& row : rows) {
      table.row({row.m, row.eps, row.delta, row.raw_error, row.modified_error});
      violations += row.boundary_violations;
    }
    dir.write("approximation.csv", table.str());

    const quasipos::BoundaryLayer cube(quasipos::Domain::of_box(Box::cube(q.dim, 0.0, 1.0)), mode);
    CsvTable measure({"x", "phi", "halfwidth"});
    for (double x : q.points) {
      const auto est = quasipos::measure_monte_carlo(cube, x, q.samples, config.seed);
      measure.row({x, est.value, est.half_width});
    }
    dir.write("measure.csv", measure.str());
    out << fmt::format("quasipos: example {} ({} levels), boundary violations: {}\n", q.example, rows.size(),
                       violations);
  }
  dir.write_manifest();
  out << "wrote " << dir.path() << "\n";
  return 0;
}

struct TransitionArgs {
  std::optional<double> eps;
  std::optional<std::size_t> samples;
};

int cmd_transition(const Common& common, const TransitionArgs& args, std::ostream& out) {
  ExperimentConfig config = resolve_config(common, "out/transition");
  if (args.eps) config.transition.eps = *args.eps;
  if (args.samples) config.transition.samples = *args.samples;
  config.validate();
  const TransitionFunction chi = mollified_heaviside(config.transition.eps);
  const std::size_t k = config.transition.samples;
  const double hi = 2.0 * config.transition.eps;
  CsvTable table({"x", "chi", "dchi"});
  for (std::size_t i = 0; i < k; ++i) {
    const double x = hi * static_cast<double>(i) / static_cast<double>(k - 1);
    table.row({x, chi.evaluate(x), chi.derivative(x)});
  }
  OutputDirectory dir(config.output.dir);
  dir.write("transition.csv", table.str());
  dir.write_manifest();
  out << fmt::format("transition: eps = {}, sup|chi'| = {:.6g} (exact {:.6g})\n", format_real(chi.eps()),
                     derivative_bound(chi), chi.derivative_sup());
  out << "wrote " << dir.path() << "\n";
  return 0;
}

int cmd_learn(const Common& common, std::ostream& out) {
  ExperimentConfig config = resolve_config(common, "out/learn");
  if (!common.levels.empty()) config.learn.levels = parse_levels(common.levels);
  config.validate();
  const LearningExperiment experiment = config.learning_experiment();

  OutputDirectory dir(config.output.dir);
  CsvTable table({"m", "objective", "residual_term", "misfit_term", "sup_error_f", "D_error"});
  const auto box = config.learn_box();
  auto observer = [&](const SweepRow& row) {
    table.row({row.m, row.objective, row.residual_term, row.misfit_term, row.sup_error_f, row.d_error});
    dir.write(fmt::format("params_m{}.txt", row.parameters.level), format_parameter_file(row.parameters));
    // The learned term is used wrapped, so its boundary check is structural.
    const auto learned = wrap(std::make_shared<MlpReaction>(row.parameters.arch, row.parameters.theta),
                              mollified_heaviside(row.parameters.wrapper_eps));
    const auto report = check_conditions(*learned, box, config.check.samples);
    out << fmt::format("level {}: objective {:.6g}, sup error {:.4g}, D error {:.4g}, {} iterations ({}), "
                       "quasipositivity violations {}, states outside learn.box {:.2f}%\n",
                       row.m, row.objective, row.sup_error_f, row.d_error, row.iterations, row.stop_reason,
                       report.violations.size(), 100.0 * row.outside_fraction);
  };
  run_level_sweep(experiment, config.learn.levels, observer);
  dir.write("learn.csv", table.str());
  dir.write("config.ini", serialize_config(config));
  dir.write_manifest();
  out << "wrote " << dir.path() << "\n";
  return 0;
}

int cmd_convergence(const Common& common, std::ostream& out) {
  const ExperimentConfig config = resolve_config(common, "out/convergence");
  ManufacturedSetup setup;
  setup.refinements = config.convergence.refinements;
  setup.base_nodes = config.convergence.base_nodes;
  setup.time_nodes = config.convergence.time_nodes;
  setup.base_steps = config.convergence.base_steps;
  setup.diffusion = config.convergence.diffusion;
  setup.horizon = config.convergence.horizon;
  const ConvergenceStudy study = manufactured_convergence(setup);

  CsvTable table({"study", "h", "dt", "error", "fitted_slope"});
  for (const auto& p : study.space)
    table.row_text({"space", format_real(p.h), format_real(p.dt), format_real(p.error), format_real(study.space_slope)});
  for (const auto& p : study.time)
    table.row_text({"time", format_real(p.h), format_real(p.dt), format_real(p.error), format_real(study.time_slope)});

  OutputDirectory dir(config.output.dir);
  dir.write("convergence.csv", table.str());
  dir.write_manifest();
  out << fmt::format("convergence-study: spatial slope {:.4f}, temporal slope {:.4f}\n", study.space_slope,
                     study.time_slope);
  out << "wrote " << dir.path() << "\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reaction-diffusion simulation, consistency checks and reaction-term learning", "rdlearn"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("--config", common.config_path, "INI configuration file");
    sub->add_option("--out", common.out_dir, "Output directory (overrides output.dir)");
    sub->add_option("--seed", common.seed, "Random seed (overrides seed)");
  };

  auto* simulate = app.add_subcommand("simulate", "Solve the configured reaction-diffusion system");
  add_common(simulate);

  CheckArgs check_args;
  auto* check = app.add_subcommand("check", "Sample the consistency conditions of a reaction term");
  add_common(check);
  check->add_option("--reaction", check_args.reaction, "Catalogue model or parameter file (default: config)");
  check->add_option("--box", check_args.box, "Sampling box LO..HI");
  check->add_option("--samples", check_args.samples, "Samples per face and box");
  check->add_option("--wrap-eps", check_args.wrap_eps, "Wrap the term with this cutoff width first");

  RateArgs rate_args;
  auto* rates = app.add_subcommand("wrap-rates", "Rate preservation of wrapped approximants");
  add_common(rates);
  rates->add_option("--alpha", rate_args.alpha, "Target vanishing order");
  rates->add_option("--beta", rate_args.beta, "Approximation rate of the family");
  rates->add_option("--gamma", rate_args.gamma, "Cutoff width exponent");
  rates->add_option("--levels", common.levels, "Levels: m1..mK doubles from m1, or a comma list");
  rates->add_option("--samples", rate_args.samples, "Sup samples per species");

  QuasiposArgs q_args;
  auto* quasipos_cmd = app.add_subcommand("quasipos", "Boundary-layer modification experiments");
  add_common(quasipos_cmd);
  quasipos_cmd->add_option("--mode", q_args.mode, "metric | componentwise | nonlinear");
  quasipos_cmd->add_option("--example", q_args.example, "Shipped approximation example");
  quasipos_cmd->add_option("--dim", q_args.dim, "Dimension of the measure study");
  quasipos_cmd->add_option("--samples", q_args.samples, "Monte-Carlo samples");

  TransitionArgs t_args;
  auto* transition = app.add_subcommand("transition", "Tabulate the smooth cutoff and its derivative");
  add_common(transition);
  transition->add_option("--eps", t_args.eps, "Cutoff centre");
  transition->add_option("--samples", t_args.samples, "Points on [0, 2 eps]");

  auto* learn = app.add_subcommand("learn", "Level sweep of the all-at-once learning problem");
  add_common(learn);
  learn->add_option("--levels", common.levels, "Levels: m1..mK or a comma list");

  auto* convergence = app.add_subcommand("convergence-study", "Manufactured-solution convergence of the solver");
  add_common(convergence);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(common, out);
    if (check->parsed()) return cmd_check(common, check_args, out);
    if (rates->parsed()) return cmd_wrap_rates(common, rate_args, out);
    if (quasipos_cmd->parsed()) return cmd_quasipos(common, q_args, out);
    if (transition->parsed()) return cmd_transition(common, t_args, out);
    if (learn->parsed()) return cmd_learn(common, out);
    if (convergence->parsed()) return cmd_convergence(common, out);
  } catch (const ValidationError& e) {
    err << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace rdlearn::cli
