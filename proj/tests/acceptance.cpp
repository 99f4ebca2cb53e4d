// Acceptance runner: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset (e.g. `acceptance 1 4`).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "cli.hpp"
#include "rdlearn/config.hpp"
#include "rdlearn/consistency.hpp"
#include "rdlearn/learn.hpp"
#include "rdlearn/quasipos.hpp"
#include "rdlearn/rdsolve.hpp"
#include "rdlearn/reaction.hpp"
#include "rdlearn/transition.hpp"

namespace fs = std::filesystem;
using namespace rdlearn;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string title;
  double time_limit_s;  // 0: no limit
  std::function<Outcome()> run;
};

// -- 1 ----------------------------------------------------------------------

Outcome quasipositivity_of_wrapped_networks() {
  std::size_t violations = 0, negative_base = 0, checks = 0;
  std::mt19937_64 rng(20240611);
  for (std::uint64_t draw = 0; draw < 100; ++draw) {
    const std::size_t n_sp = 1 + draw % 4;
    const MlpArchitecture arch{{n_sp, 16, 16, n_sp}};
    auto base = std::make_shared<MlpReaction>(MlpReaction::random(arch, 1000 + draw, 3.0));
    const double eps = 0.05 + 0.45 * static_cast<double>(draw % 10) / 9.0;
    const auto wrapped = wrap(base, mollified_heaviside(eps));

    std::uniform_real_distribution<double> state(0.0, 2.0);
    std::vector<double> u(n_sp), f(n_sp), fbar(n_sp);
    for (std::size_t n = 0; n < n_sp; ++n)
      for (int s = 0; s < 1000; ++s) {
        for (auto& v : u) v = state(rng);
        u[n] = 0.0;
        base->evaluate(u, f);
        wrapped->evaluate(u, fbar);
        negative_base += f[n] < 0.0;
        violations += fbar[n] < 0.0;
        ++checks;
      }
  }
  return {violations == 0 && negative_base > 0,
          fmt::format("{} boundary checks, {} with negative base value, {} violations", checks, negative_base,
                      violations)};
}

// -- 2 ----------------------------------------------------------------------

Outcome transition_derivative_rate() {
  const double eta_prime = MollifierKernel::standard()->derivative_sup();
  bool bounds_ok = true;
  double lo = INFINITY, hi = 0.0;
  std::string values;
  for (double eps : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
    const double s = derivative_bound(mollified_heaviside(eps));
    bounds_ok = bounds_ok && 1.0 / eps <= s && s <= 4.0 * eta_prime / eps;
    lo = std::min(lo, eps * s);
    hi = std::max(hi, eps * s);
    values += fmt::format(" {:.4g}", eps * s);
  }
  return {bounds_ok && hi / lo < 2.0,
          fmt::format("eps*sup|chi'| ={}; bounds {}; spread {:.4g}", values, bounds_ok ? "hold" : "violated", hi / lo)};
}

// -- 3 ----------------------------------------------------------------------

Outcome wrapped_rate_preservation() {
  const WrapperSchedule schedule{2.0, 1.0, 0.5};
  const RateStudy study = rate_preservation_study(*power_target(2.0), shifted_family(2.0, 1.0), schedule,
                                                  Box::cube(1, 0.0, 1.0), {4, 8, 16, 32, 64}, 10000);
  const double s = study.slope_wrapped;
  return {s >= -1.15 && s <= -0.85, fmt::format("wrapped slope {:.4f} (raw {:.4f})", s, study.slope_raw)};
}

// -- 4 ----------------------------------------------------------------------

Outcome gradient_oracle() {
  const SpaceTimeGrid grid{{1.0}, {8}, 0.5, 5};
  const auto truth = CatalogReaction::from_name("fisher-kpp");
  const auto u0 = sample_initial(grid, 1, [](std::size_t, std::span<const double> x) {
    return 0.5 + 0.3 * std::cos(3.14159 * x[0]);
  });
  const auto sol = solve(*truth, DiffusionSpec{{0.1}, 1e-6}, u0, grid);
  auto op = std::make_shared<MeasurementOperator>(MeasurementOperator::full(grid, 1));

  // Non-quadratic exponents so that no term degenerates to a special case.
  ScheduleSpec spec;
  spec.p = 3.0;
  spec.q = 2.5;
  spec.r = 3.0;
  spec.q_hat = 1.5;
  const auto schedule = make_schedule(spec, {2.0});

  ProblemSetup setup;
  setup.grid = grid;
  setup.species = 1;
  setup.architecture = MlpArchitecture{{1, 6, 1}};
  setup.reaction_box = Box({0.0}, {1.2});
  setup.schedule = schedule[0];
  setup.measurement = op;
  setup.data.push_back(generate_measurements(sol.field, *op, 0.05, 7));
  setup.quadrature_per_axis = 9;
  setup.sup_samples_per_species = 64;
  const AllAtOnceProblem problem(setup);

  auto x = problem.initial_point(3, 1.0);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal;
  for (std::size_t i = problem.theta_size(); i < x.size(); ++i) x[i] += 0.05 * normal(rng);
  x[problem.diffusion_offset(0)] = 0.08;

  std::vector<double> grad(x.size());
  const ObjectiveTerms terms = problem.evaluate(x, grad);
  const bool all_active = terms.regularization > 0 && terms.theta_norm > 0 && terms.reaction_l2 > 0 &&
                          terms.gradient_sup > 0 && terms.residual > 0 && terms.initial_misfit > 0 &&
                          terms.misfit > 0;

  // The wrapper must be engaged somewhere on the trajectory: a negative base
  // value at a state inside the cutoff's support.
  const MlpReaction net = problem.reaction(x);
  const TransitionFunction& chi = problem.cutoff();
  std::size_t engaged = 0;
  for (std::size_t i = 0; i < problem.state_size(); ++i) {
    const double u = x[problem.state_offset(0) + i];
    double f = 0.0;
    net.evaluate(std::span<const double>(&u, 1), std::span<double>(&f, 1));
    engaged += f < 0.0 && chi(u) > 0.0;
  }

  double worst = 0.0;
  for (int d = 0; d < 20; ++d) {
    std::vector<double> v(x.size());
    for (auto& e : v) e = normal(rng);
    double analytic = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) analytic += grad[i] * v[i];
    auto along = [&](double h) {
      std::vector<double> y = x;
      for (std::size_t i = 0; i < x.size(); ++i) y[i] += h * v[i];
      return problem.evaluate(y).total;
    };
    const double h = 1e-6;
    const double fd = (8.0 * (along(h) - along(-h)) - (along(2 * h) - along(-2 * h))) / (12.0 * h);
    worst = std::max(worst, std::abs(fd - analytic) / std::max(std::abs(analytic), 1e-12));
  }
  return {worst <= 1e-5 && all_active && engaged > 0,
          fmt::format("max relative error {:.3e} over 20 directions; all terms active: {}; wrapper engaged at {} "
                      "state values",
                      worst, all_active ? "yes" : "no", engaged)};
}

// -- 5 ----------------------------------------------------------------------

Outcome solver_order() {
  ManufacturedSetup setup;
  setup.refinements = 4;
  const ConvergenceStudy study = manufactured_convergence(setup);
  const bool ok = std::abs(study.space_slope - 2.0) <= 0.2 && std::abs(study.time_slope - 1.0) <= 0.2;
  return {ok, fmt::format("spatial slope {:.4f}, temporal slope {:.4f}", study.space_slope, study.time_slope)};
}

// -- 6 ----------------------------------------------------------------------

Outcome wellposed_wrapped_dynamics() {
  const SpaceTimeGrid grid{{1.0}, {200}, 0.5, 2000};
  double worst_min = INFINITY, worst_slack = -INFINITY;
  std::size_t audits_passed = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::size_t n_sp = 1 + seed % 2;
    const MlpArchitecture arch{{n_sp, 16, 16, n_sp}};
    auto base = std::make_shared<MlpReaction>(MlpReaction::random(arch, seed, 1.5));
    const auto f = wrap(base, mollified_heaviside(0.2));
    const DiffusionSpec diffusion{std::vector<double>(n_sp, 0.01), 1e-6};
    const InitialProfile u0 = [seed](std::size_t n, std::span<const double> x) {
      const double phase = static_cast<double>(seed + n);
      // Touches zero inside the domain so positivity is actually exercised.
      return 0.3 * (1.0 + std::cos(std::numbers::pi * (2.0 * x[0] + 0.3 * phase)));
    };
    const Solution sol = solve(*f, diffusion, sample_initial(grid, n_sp, u0), grid);
    const auto& c = f->constants();
    const double tol = estimate_mass_tolerance(*f, diffusion, u0, grid);
    const MassAudit audit = mass_audit(sol.field, c.weights, c.k0, c.k1, tol);
    worst_min = std::min(worst_min, sol.diagnostics.min_overall);
    worst_slack = std::max(worst_slack, audit.worst_margin - audit.tolerance);
    audits_passed += audit.passed();
  }
  return {worst_min >= -1e-8 && audits_passed == 10,
          fmt::format("min u over 10 seeds {:.3e}; mass audits passed {}/10 (worst margin - tol {:.3e})", worst_min,
                      audits_passed, worst_slack)};
}

// -- 7 ----------------------------------------------------------------------

Outcome learning_trend() {
  const ExperimentConfig config = load_config(RDLEARN_SOURCE_DIR "/configs/fisher-kpp-learn.cfg");
  const LearningExperiment experiment = config.learning_experiment();
  std::vector<double> errors;
  std::string trail;
  run_level_sweep(experiment, {1, 2, 3}, [&](const SweepRow& row) {
    errors.push_back(row.sup_error_f);
    trail += fmt::format(" m={}: {:.4g} ({} its)", row.m, row.sup_error_f, row.iterations);
    std::cout << fmt::format("    level {} sup error {:.4g}, D error {:.3g}, {} iterations ({})\n", row.m,
                             row.sup_error_f, row.d_error, row.iterations, row.stop_reason)
              << std::flush;
  });
  bool monotone = true;
  for (std::size_t i = 1; i < errors.size(); ++i) monotone = monotone && errors[i] <= errors[i - 1];
  return {monotone && errors.back() < 0.05, "sup error on [0, 1.2]:" + trail};
}

// -- 8 ----------------------------------------------------------------------

Outcome boundary_layer_experiments() {
  // (a)
  bool a_ok = true;
  std::string a_detail;
  for (const auto& name : quasipos::shipped_example_names()) {
    const auto rows = quasipos::approximation_experiment(quasipos::shipped_example(name));
    std::size_t violations = 0;
    bool monotone = true;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      violations += rows[i].boundary_violations;
      if (i > 0) monotone = monotone && rows[i].modified_error < rows[i - 1].modified_error;
    }
    a_ok = a_ok && violations == 0 && monotone;
    a_detail += fmt::format(" {}: {:.3g}->{:.3g}{}", name, rows.front().modified_error, rows.back().modified_error,
                            violations == 0 && monotone ? "" : " FAIL");
  }

  // (b)
  bool b_ok = true;
  double worst_z = 0.0;
  for (std::size_t dim : {1u, 2u, 3u}) {
    const quasipos::BoundaryLayer cube(quasipos::Domain::of_box(Box::cube(dim, 0.0, 1.0)),
                                       quasipos::LayerMode::metric);
    for (double x : {0.1, 0.25, 0.5}) {
      const auto est = quasipos::measure_monte_carlo(cube, x, 20000, 17 + dim);
      const double exact = quasipos::unit_cube_measure(dim, x);
      const double z = std::abs(est.value - exact) / est.standard_error;
      worst_z = std::max(worst_z, z);
      b_ok = b_ok && z <= 3.0;
    }
  }

  // (c)
  bool c_ok = true;
  std::size_t c_checked = 0;
  for (std::size_t dim : {2u, 3u})
    for (double eps : {0.5, 0.1}) {
      const PointSet members = quasipos::sample_nonlinear_members(dim, eps, 2.0, 10000, 5 + dim);
      const double bound = std::pow(eps, 2.0 / static_cast<double>(dim));
      for (std::size_t i = 0; i < members.size(); ++i) {
        const auto p = members[i];
        c_ok = c_ok && *std::min_element(p.begin(), p.end()) <= bound;
        ++c_checked;
      }
    }

  return {a_ok && b_ok && c_ok,
          fmt::format("(a){}; (b) worst |MC - exact| = {:.2f} SE; (c) {} members checked, bound {}", a_detail,
                      worst_z, c_checked, c_ok ? "holds" : "violated")};
}

// -- 9 ----------------------------------------------------------------------

std::map<std::string, std::string> read_directory(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::ifstream in(entry.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[entry.path().filename().string()] = ss.str();
  }
  return files;
}

Outcome cli_reproducibility() {
  const fs::path root = fs::temp_directory_path() / "rdlearn-acceptance-cli";
  fs::remove_all(root);
  const std::string configs = RDLEARN_SOURCE_DIR "/configs/";
  const std::vector<std::vector<std::string>> commands = {
      {"simulate", "--config", configs + "fisher-kpp.cfg"},
      {"simulate", "--config", configs + "gray-scott-2d.cfg"},
      {"check", "--reaction", "gray-scott", "--box", "0..1", "--samples", "2000"},
      {"check", "--reaction", "lotka-volterra", "--wrap-eps", "0.1", "--seed", "4"},
      {"wrap-rates", "--alpha", "2", "--beta", "1", "--gamma", "0.5", "--levels", "4..64"},
      {"quasipos", "--mode", "metric", "--samples", "5000"},
      {"quasipos", "--mode", "componentwise", "--example", "uniform-1d", "--samples", "5000"},
      {"quasipos", "--mode", "nonlinear", "--dim", "3", "--samples", "5000"},
      {"transition", "--eps", "0.01", "--samples", "501"},
      {"learn", "--config", configs + "learn-smoke.cfg"},
      {"convergence-study", "--seed", "2"},
  };

  std::size_t identical = 0, csv_files = 0;
  std::string failures;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    const fs::path out = root / fmt::format("run{}", c);
    std::vector<std::string> args{"rdlearn"};
    args.insert(args.end(), commands[c].begin(), commands[c].end());
    args.insert(args.end(), {"--out", out.string()});

    std::ostringstream sink;
    std::map<std::string, std::string> first;
    bool same = true;
    for (int pass = 0; pass < 2; ++pass) {
      if (cli::run(args, sink, sink) != 0) {
        failures += fmt::format(" [{} exited nonzero: {}]", commands[c][0], sink.str());
        same = false;
        break;
      }
      auto files = read_directory(out);
      if (pass == 0) {
        first = std::move(files);
        fs::remove_all(out);
      } else {
        same = files == first;
      }
    }
    if (same) {
      ++identical;
      for (const auto& [name, _] : first) csv_files += name.ends_with(".csv");
    } else if (failures.empty() || failures.back() != ']') {
      failures += fmt::format(" [{} differs]", commands[c][0]);
    }
  }
  fs::remove_all(root);
  return {identical == commands.size(),
          fmt::format("{}/{} command lines byte-identical on rerun ({} CSV files){}", identical, commands.size(),
                      csv_files, failures)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "wrapped networks are quasipositive", 10, quasipositivity_of_wrapped_networks},
      {2, "cutoff derivative scales like 1/eps", 5, transition_derivative_rate},
      {3, "wrapping preserves the approximation rate", 60, wrapped_rate_preservation},
      {4, "objective gradient matches finite differences", 10, gradient_oracle},
      {5, "solver convergence orders", 60, solver_order},
      {6, "wrapped dynamics stay nonnegative with controlled mass", 120, wellposed_wrapped_dynamics},
      {7, "learned reaction error decreases over levels", 1800, learning_trend},
      {8, "boundary-layer modification experiments", 60, boundary_layer_experiments},
      {9, "CLI reruns are byte-identical", 0, cli_reproducibility},
  };

  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::stoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.contains(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.time_limit_s == 0 || seconds < c.time_limit_s;
    const bool pass = outcome.pass && in_time;
    failed += !pass;
    std::cout << fmt::format("criterion {}: {} - {} ({:.1f} s{}) :: {}\n", c.id, pass ? "PASS" : "FAIL", c.title,
                             seconds,
                             c.time_limit_s > 0 ? fmt::format(", limit {:.0f} s", c.time_limit_s) : std::string(),
                             outcome.detail)
              << std::flush;
    if (outcome.pass && !in_time) std::cout << "    over the time limit\n";
  }
  return failed == 0 ? 0 : 1;
}
