#include "rdlearn/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include <fmt/format.h>

#include "rdlearn/consistency.hpp"
#include "rdlearn/error.hpp"

namespace rdlearn {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  if (trim(text).empty()) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ValidationError(key, "expected a number, got '" + text + "'");
  if (!std::isfinite(v)) throw ValidationError(key, "must be finite");
  return v;
}

std::uint64_t to_unsigned(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty())
    throw ValidationError(key, "expected a nonnegative integer, got '" + text + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ValidationError(key, "expected true or false, got '" + text + "'");
}

/// "a..b" (inclusive) or a comma list; strictly increasing and >= 1.
std::vector<std::size_t> parse_level_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> levels;
  const auto sep = text.find("..");
  if (sep != std::string::npos) {
    const auto lo = to_unsigned(key, text.substr(0, sep));
    const auto hi = to_unsigned(key, text.substr(sep + 2));
    if (lo < 1 || hi < lo) throw ValidationError(key, "range must satisfy 1 <= m1 <= mK");
    for (auto m = lo; m <= hi; ++m) levels.push_back(static_cast<std::size_t>(m));
    return levels;
  }
  for (const auto& item : split(text, ',')) levels.push_back(static_cast<std::size_t>(to_unsigned(key, item)));
  if (levels.empty()) throw ValidationError(key, "at least one level required");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 1) throw ValidationError(key, "levels start at 1");
    if (i > 0 && levels[i] <= levels[i - 1]) throw ValidationError(key, "levels must be strictly increasing");
  }
  return levels;
}

std::string format_double(double v) { return fmt::format("{:.17g}", v); }

template <class T, class Fmt>
std::string join(const std::vector<T>& values, Fmt&& f) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ", ";
    out += f(values[i]);
  }
  return out;
}

/// One configuration entry: how to read it from text and write it back.
struct Field {
  std::string section;  // empty for top-level keys
  std::string key;
  std::function<void(const std::string& full_key, const std::string& text)> read;
  std::function<std::string()> write;
};

class Binder {
 public:
  void section(std::string name) { section_ = std::move(name); }

  void bind(const std::string& key, double& v) {
    add(key, [&v](const std::string& k, const std::string& t) { v = to_double(k, t); },
        [&v] { return format_double(v); });
  }
  void bind(const std::string& key, std::size_t& v) {
    add(key, [&v](const std::string& k, const std::string& t) { v = static_cast<std::size_t>(to_unsigned(k, t)); },
        [&v] { return std::to_string(v); });
  }
  void bind_seed(const std::string& key, std::uint64_t& v) {
    add(key, [&v](const std::string& k, const std::string& t) { v = to_unsigned(k, t); },
        [&v] { return std::to_string(v); });
  }
  void bind(const std::string& key, bool& v) {
    add(key, [&v](const std::string& k, const std::string& t) { v = to_bool(k, t); },
        [&v] { return std::string(v ? "true" : "false"); });
  }
  void bind(const std::string& key, std::string& v) {
    add(key, [&v](const std::string&, const std::string& t) { v = trim(t); }, [&v] { return v; });
  }
  void bind(const std::string& key, std::vector<double>& v) {
    add(
        key,
        [&v](const std::string& k, const std::string& t) {
          v.clear();
          for (const auto& item : split(t, ',')) v.push_back(to_double(k, item));
        },
        [&v] { return join(v, format_double); });
  }
  void bind(const std::string& key, std::vector<std::size_t>& v) {
    add(
        key,
        [&v](const std::string& k, const std::string& t) {
          v.clear();
          for (const auto& item : split(t, ',')) v.push_back(static_cast<std::size_t>(to_unsigned(k, item)));
        },
        [&v] { return join(v, [](std::size_t x) { return std::to_string(x); }); });
  }

  void bind_levels(const std::string& key, std::vector<std::size_t>& v) {
    add(key, [&v](const std::string& k, const std::string& t) { v = parse_level_list(k, t); },
        [&v] { return join(v, [](std::size_t x) { return std::to_string(x); }); });
  }

  const std::vector<Field>& fields() const { return fields_; }

 private:
  void add(const std::string& key, std::function<void(const std::string&, const std::string&)> read,
           std::function<std::string()> write) {
    fields_.push_back({section_, key, std::move(read), std::move(write)});
  }

  std::string section_;
  std::vector<Field> fields_;
};

/// The full key table; the order here is the serialisation order.
std::vector<Field> fields_of(ExperimentConfig& c) {
  Binder b;
  b.bind_seed("seed", c.seed);

  b.section("domain");
  b.bind("extent", c.domain.extent);
  b.bind("boundary", c.domain.boundary);
  b.bind("dirichlet_values", c.domain.dirichlet_values);

  b.section("grid");
  b.bind("nodes", c.grid.nodes);
  b.bind("T", c.grid.horizon);
  b.bind("steps", c.grid.steps);

  b.section("reaction");
  b.bind("model", c.reaction.model);
  b.bind("species", c.reaction.species);
  b.bind("diffusion", c.reaction.diffusion);
  b.bind("feed", c.reaction.feed);
  b.bind("kill", c.reaction.kill);
  b.bind("hidden", c.reaction.hidden);
  b.bind("init_scale", c.reaction.init_scale);
  b.bind("parameters", c.reaction.parameters);

  b.section("initial");
  b.bind("profile", c.initial.profile);
  b.bind("amplitudes", c.initial.amplitudes);
  b.bind("modes", c.initial.modes);

  b.section("wrapper");
  b.bind("eps", c.wrapper.eps);
  b.bind("weights", c.wrapper.weights);

  b.section("schedule");
  b.bind("alpha", c.schedule.alpha);
  b.bind("beta", c.schedule.beta);
  b.bind("gamma", c.schedule.gamma);
  b.bind("p", c.schedule.p);
  b.bind("q", c.schedule.q);
  b.bind("r", c.schedule.r);
  b.bind("q_hat", c.schedule.q_hat);
  b.bind("lambda0", c.schedule.lambda0);
  b.bind("mu0", c.schedule.mu0);
  b.bind("nu0", c.schedule.nu0);
  b.bind("psi_factor", c.schedule.psi_factor);

  b.section("noise");
  b.bind("delta_rule", c.noise.delta_rule);
  b.bind("delta0", c.noise.delta0);

  b.section("measurement");
  b.bind("kind", c.measurement.kind);
  b.bind("level", c.measurement.level);

  b.section("optimizer");
  b.bind("step", c.optimizer.step);
  b.bind("max_iters", c.optimizer.max_iters);
  b.bind("rel_tol", c.optimizer.rel_tol);
  b.bind("window", c.optimizer.window);
  b.bind("max_backtracks", c.optimizer.max_backtracks);

  b.section("learn");
  b.bind_levels("levels", c.learn.levels);
  b.bind("box", c.learn.box);
  b.bind("warm_start", c.learn.warm_start);
  b.bind("enforce_parameter_bound", c.learn.enforce_parameter_bound);
  b.bind("theta_scale", c.learn.theta_scale);
  b.bind("d_min", c.learn.d_min);
  b.bind("quadrature_per_axis", c.learn.quadrature_per_axis);
  b.bind("sup_samples", c.learn.sup_samples);

  b.section("check");
  b.bind("box", c.check.box);
  b.bind("samples", c.check.samples);

  b.section("rates");
  b.bind("alpha", c.rates.alpha);
  b.bind("beta", c.rates.beta);
  b.bind("gamma", c.rates.gamma);
  b.bind("levels", c.rates.levels);
  b.bind("samples", c.rates.samples);

  b.section("quasipos");
  b.bind("mode", c.quasipos.mode);
  b.bind("example", c.quasipos.example);
  b.bind("dim", c.quasipos.dim);
  b.bind("samples", c.quasipos.samples);
  b.bind("level_count", c.quasipos.level_count);
  b.bind("points", c.quasipos.points);

  b.section("transition");
  b.bind("eps", c.transition.eps);
  b.bind("samples", c.transition.samples);

  b.section("convergence");
  b.bind("refinements", c.convergence.refinements);
  b.bind("base_nodes", c.convergence.base_nodes);
  b.bind("time_nodes", c.convergence.time_nodes);
  b.bind("base_steps", c.convergence.base_steps);
  b.bind("diffusion", c.convergence.diffusion);
  b.bind("T", c.convergence.horizon);

  b.section("output");
  b.bind("dir", c.output.dir);
  return b.fields();
}

std::string full_key(const Field& f) { return f.section.empty() ? f.key : f.section + "." + f.key; }

void require(bool ok, const std::string& key, const std::string& constraint) {
  if (!ok) throw ValidationError(key, constraint);
}

void require_positive(const std::vector<double>& v, const std::string& key) {
  for (double x : v) require(x > 0.0, key, "entries must be positive");
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig parse_config(const std::string& text, const std::string& origin) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(origin, fmt::format("line {}: {}", e.line(), e.message()));
  }

  ExperimentConfig config;
  auto fields = fields_of(config);
  std::map<std::string, const Field*> index;
  std::map<std::string, bool> sections;
  for (const auto& f : fields) {
    index[full_key(f)] = &f;
    if (!f.section.empty()) sections[f.section] = true;
  }

  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      // A top-level key.
      const auto it = index.find(name);
      if (it == index.end() || !it->second->section.empty()) throw ValidationError(name, "unknown key");
      it->second->read(name, node.data());
      continue;
    }
    if (!sections.contains(name)) throw ValidationError(name, "unknown section");
    for (const auto& [key, value] : node) {
      const std::string k = name + "." + key;
      const auto it = index.find(k);
      if (it == index.end()) throw ValidationError(k, "unknown key");
      it->second->read(k, value.data());
    }
  }
  config.validate();
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("--config", "cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

std::string serialize_config(const ExperimentConfig& config) {
  ExperimentConfig copy = config;
  const auto fields = fields_of(copy);
  std::string out;
  std::string current;
  for (const auto& f : fields) {
    if (f.section != current) {
      current = f.section;
      out += "\n[" + current + "]\n";
    }
    out += f.key + " = " + f.write() + "\n";
  }
  return out;
}

std::vector<std::size_t> parse_levels(const std::string& text) { return parse_level_list("--levels", text); }

// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  const std::size_t dim = domain.extent.size();
  require(dim == 1 || dim == 2, "domain.extent", "one or two axes supported");
  require_positive(domain.extent, "domain.extent");
  require(domain.boundary == "neumann" || domain.boundary == "dirichlet", "domain.boundary",
          "must be neumann or dirichlet");
  require(grid.nodes.size() == dim, "grid.nodes", "needs one entry per domain axis");
  for (auto n : grid.nodes) require(n >= 3, "grid.nodes", "at least 3 nodes per axis");
  require(grid.horizon > 0.0, "grid.T", "must be > 0");
  require(grid.steps >= 1, "grid.steps", "must be >= 1");

  const std::string& model = reaction.model;
  require(model == "fisher-kpp" || model == "lotka-volterra" || model == "gray-scott" || model == "mlp" ||
              model == "file",
          "reaction.model", "must be fisher-kpp, lotka-volterra, gray-scott, mlp or file");
  require(reaction.species >= 1, "reaction.species", "must be >= 1");
  require(model != "file" || !reaction.parameters.empty(), "reaction.parameters", "required for model = file");
  require(reaction.init_scale > 0.0, "reaction.init_scale", "must be > 0");
  for (auto h : reaction.hidden) require(h >= 1, "reaction.hidden", "widths must be >= 1");
  require(reaction.diffusion.size() == species(), "reaction.diffusion", "needs one entry per species");
  for (double d : reaction.diffusion) require(d >= learn.d_min, "reaction.diffusion", "entries must be >= learn.d_min");
  if (domain.boundary == "dirichlet")
    require(domain.dirichlet_values.size() == species(), "domain.dirichlet_values", "needs one entry per species");

  require(initial.profile == "cosine" || initial.profile == "constant" || initial.profile == "random",
          "initial.profile", "must be cosine, constant or random");
  require(!initial.amplitudes.empty(), "initial.amplitudes", "at least one amplitude");
  for (double a : initial.amplitudes) require(a >= 0.0, "initial.amplitudes", "entries must be >= 0");
  require(!initial.modes.empty(), "initial.modes", "at least one mode");

  require(wrapper.eps >= 0.0, "wrapper.eps", "must be >= 0 (0 disables the wrapper)");
  if (!wrapper.weights.empty()) {
    require(wrapper.weights.size() == species(), "wrapper.weights", "needs one entry per species");
    require_positive(wrapper.weights, "wrapper.weights");
  }

  require(schedule.psi_factor > 0.0, "schedule.psi_factor", "must be > 0");
  require(noise.delta_rule == "pow2" || noise.delta_rule == "inverse" || noise.delta_rule == "constant",
          "noise.delta_rule", "must be pow2, inverse or constant");
  require(noise.delta0 > 0.0, "noise.delta0", "must be > 0");
  schedule_spec().validate();

  require(measurement.kind == "full" || measurement.kind == "subsample" || measurement.kind == "fourier",
          "measurement.kind", "must be full, subsample or fourier");
  require(measurement.level >= 1, "measurement.level", "must be >= 1");

  require(optimizer.step > 0.0, "optimizer.step", "must be > 0");
  require(optimizer.max_iters >= 1, "optimizer.max_iters", "must be >= 1");
  require(optimizer.rel_tol >= 0.0, "optimizer.rel_tol", "must be >= 0");
  require(optimizer.window >= 1, "optimizer.window", "must be >= 1");

  require(!learn.levels.empty(), "learn.levels", "at least one level");
  for (std::size_t i = 0; i < learn.levels.size(); ++i) {
    require(learn.levels[i] >= 1, "learn.levels", "levels start at 1");
    require(i == 0 || learn.levels[i] > learn.levels[i - 1], "learn.levels", "must be strictly increasing");
  }
  try {
    learn_box();
  } catch (const InvalidParameter& e) {
    throw ValidationError("learn.box", e.what());
  }
  try {
    check_box();
  } catch (const InvalidParameter& e) {
    throw ValidationError("check.box", e.what());
  }
  require(learn.theta_scale > 0.0, "learn.theta_scale", "must be > 0");
  require(learn.d_min > 0.0, "learn.d_min", "must be > 0");
  require(learn.quadrature_per_axis >= 2, "learn.quadrature_per_axis", "must be >= 2");
  require(learn.sup_samples >= 1, "learn.sup_samples", "must be >= 1");

  require(check.samples >= 1, "check.samples", "must be >= 1");

  require(rates.alpha > 1.0, "rates.alpha", "must be > 1");
  require(rates.beta > 0.0, "rates.beta", "must be > 0");
  require(rates.gamma > 0.0 && rates.gamma <= rates.beta, "rates.gamma", "must satisfy 0 < gamma <= rates.beta");
  require(rates.levels.size() >= 3, "rates.levels", "at least three levels");
  for (std::size_t i = 0; i < rates.levels.size(); ++i)
    require(rates.levels[i] >= 1.0 && (i == 0 || rates.levels[i] > rates.levels[i - 1]), "rates.levels",
            "must be >= 1 and strictly increasing");
  require(rates.samples >= 1, "rates.samples", "must be >= 1");

  try {
    quasipos::parse_mode(quasipos.mode);
  } catch (const InvalidParameter&) {
    throw ValidationError("quasipos.mode", "must be metric, componentwise or nonlinear");
  }
  bool known = false;
  for (const auto& name : quasipos::shipped_example_names()) known = known || name == quasipos.example;
  require(known, "quasipos.example", "unknown example");
  require(quasipos.dim >= 1, "quasipos.dim", "must be >= 1");
  require(quasipos.samples >= 1, "quasipos.samples", "must be >= 1");
  require(quasipos.level_count >= 2, "quasipos.level_count", "must be >= 2");
  for (double x : quasipos.points) require(x > 0.0, "quasipos.points", "entries must be > 0");

  require(transition.eps > 0.0, "transition.eps", "must be > 0");
  require(transition.samples >= 2, "transition.samples", "must be >= 2");

  require(convergence.refinements >= 2, "convergence.refinements", "must be >= 2");
  require(convergence.base_nodes >= 3, "convergence.base_nodes", "must be >= 3");
  require(convergence.time_nodes >= 3, "convergence.time_nodes", "must be >= 3");
  require(convergence.base_steps >= 1, "convergence.base_steps", "must be >= 1");
  require(convergence.diffusion > 0.0, "convergence.diffusion", "must be > 0");
  require(convergence.horizon > 0.0, "convergence.T", "must be > 0");

  require(!output.dir.empty(), "output.dir", "must not be empty");
}

SpaceTimeGrid ExperimentConfig::space_time_grid() const {
  return SpaceTimeGrid{domain.extent, grid.nodes, grid.horizon, grid.steps};
}

std::size_t ExperimentConfig::species() const {
  if (reaction.model == "fisher-kpp") return 1;
  if (reaction.model == "lotka-volterra" || reaction.model == "gray-scott") return 2;
  if (reaction.model == "file") return read_parameter_file(reaction.parameters).arch.species();
  return reaction.species;
}

ReactionPtr ExperimentConfig::make_base_reaction() const {
  const std::string& model = reaction.model;
  if (model == "fisher-kpp") return std::make_shared<CatalogReaction>(CatalogReaction::Model::fisher_kpp);
  if (model == "lotka-volterra") return std::make_shared<CatalogReaction>(CatalogReaction::Model::lotka_volterra);
  if (model == "gray-scott")
    return std::make_shared<CatalogReaction>(CatalogReaction::Model::gray_scott, reaction.feed, reaction.kill);
  if (model == "file") {
    ParameterFile file = read_parameter_file(reaction.parameters);
    return std::make_shared<MlpReaction>(file.arch, file.theta, file.level);
  }
  MlpArchitecture arch;
  arch.widths.push_back(reaction.species);
  arch.widths.insert(arch.widths.end(), reaction.hidden.begin(), reaction.hidden.end());
  arch.widths.push_back(reaction.species);
  return std::make_shared<MlpReaction>(MlpReaction::random(arch, seed, reaction.init_scale));
}

ReactionPtr ExperimentConfig::make_reaction() const {
  ReactionPtr base = make_base_reaction();
  if (wrapper.eps <= 0.0) return base;
  WrapOptions options;
  options.weights = wrapper.weights;
  return wrap(std::move(base), mollified_heaviside(wrapper.eps), options);
}

DiffusionSpec ExperimentConfig::diffusion_spec() const { return DiffusionSpec{reaction.diffusion, learn.d_min}; }

SolveOptions ExperimentConfig::solve_options() const {
  SolveOptions options;
  options.boundary = domain.boundary == "dirichlet" ? BoundaryKind::dirichlet : BoundaryKind::neumann;
  options.dirichlet_values = domain.dirichlet_values;
  options.weights = wrapper.weights;
  return options;
}

std::vector<InitialProfile> ExperimentConfig::initial_profiles() const {
  const std::vector<double> extent = domain.extent;
  std::vector<InitialProfile> out;
  auto product_cos = [extent](double mode, std::span<const double> x) {
    double v = 1.0;
    for (std::size_t a = 0; a < x.size(); ++a) v *= std::cos(mode * std::numbers::pi * x[a] / extent[a]);
    return v;
  };
  for (double amp : initial.amplitudes) {
    if (initial.profile == "constant") {
      out.push_back([amp](std::size_t, std::span<const double>) { return amp; });
      continue;
    }
    for (std::size_t mode : initial.modes) {
      if (initial.profile == "cosine") {
        const double j = static_cast<double>(mode);
        out.push_back([amp, j, product_cos](std::size_t, std::span<const double> x) {
          return amp + amp * product_cos(j, x);
        });
      } else {
        // Smooth positive random profile: amp (1 + 0.9 sum_k c_k cos_k / sum |c_k|).
        std::mt19937_64 rng(seed ^ (0x5DEECE66DULL * (mode + 1)));
        std::normal_distribution<double> normal(0.0, 1.0);
        std::array<double, 4> c{};
        double total = 0.0;
        for (auto& ck : c) {
          ck = normal(rng);
          total += std::abs(ck);
        }
        out.push_back([amp, c, total, product_cos](std::size_t, std::span<const double> x) {
          double s = 0.0;
          for (std::size_t k = 0; k < c.size(); ++k) s += c[k] * product_cos(static_cast<double>(k + 1), x);
          return amp * (1.0 + 0.9 * s / total);
        });
      }
    }
  }
  return out;
}

ScheduleSpec ExperimentConfig::schedule_spec() const {
  ScheduleSpec spec;
  spec.alpha = schedule.alpha;
  spec.beta = schedule.beta;
  spec.gamma = schedule.gamma;
  spec.p = schedule.p;
  spec.q = schedule.q;
  spec.r = schedule.r;
  spec.q_hat = schedule.q_hat;
  spec.lambda0 = schedule.lambda0;
  spec.mu0 = schedule.mu0;
  spec.nu0 = schedule.nu0;
  const double d0 = noise.delta0;
  if (noise.delta_rule == "pow2")
    spec.noise = [d0](double m) { return d0 * std::pow(2.0, -m); };
  else if (noise.delta_rule == "inverse")
    spec.noise = [d0](double m) { return d0 / m; };
  else
    spec.noise = [d0](double) { return d0; };
  const double psi = schedule.psi_factor;
  spec.psi = [psi](double m) { return psi * m; };
  return spec;
}

OptimizerOptions ExperimentConfig::optimizer_options() const {
  OptimizerOptions o;
  o.step = optimizer.step;
  o.max_iters = optimizer.max_iters;
  o.rel_tol = optimizer.rel_tol;
  o.window = optimizer.window;
  o.max_backtracks = optimizer.max_backtracks;
  return o;
}

Box ExperimentConfig::learn_box() const { return Box::parse(learn.box, species()); }
Box ExperimentConfig::check_box() const { return Box::parse(check.box, species()); }

LearningExperiment ExperimentConfig::learning_experiment() const {
  LearningExperiment ex;
  ex.grid = space_time_grid();
  ex.truth = make_base_reaction();
  ex.true_diffusion = reaction.diffusion;
  ex.initial = initial_profiles();
  ex.d_min = learn.d_min;
  ex.measurement = parse_measurement_kind(measurement.kind);
  ex.full_level = measurement.level;
  ex.schedule = schedule_spec();
  ex.hidden = reaction.hidden;
  ex.reaction_box = learn_box();
  ex.optimizer = optimizer_options();
  ex.enforce_parameter_bound = learn.enforce_parameter_bound;
  ex.warm_start = learn.warm_start;
  ex.quadrature_per_axis = learn.quadrature_per_axis;
  ex.sup_samples_per_species = learn.sup_samples;
  ex.theta_scale = learn.theta_scale;
  ex.seed = seed;
  return ex;
}

}  // namespace rdlearn
