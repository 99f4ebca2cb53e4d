#include "rdlearn/reaction.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "rdlearn/error.hpp"
#include "rdlearn/kernels.hpp"

namespace rdlearn {

// ---------------------------------------------------------------------------
// ReactionTerm

void ReactionTerm::jacobian(std::span<const double> u, Matrix& jac) const { finite_difference_jacobian(u, jac); }

std::optional<double> ReactionTerm::lipschitz_bound(const Box*) const { return std::nullopt; }

void ReactionTerm::finite_difference_jacobian(std::span<const double> u, Matrix& jac) const {
  const std::size_t n = species();
  jac.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  std::vector<double> x(u.begin(), u.end()), fp(n), fm(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double h = 1e-5 * (1.0 + std::abs(u[j]));
    x[j] = u[j] + h;
    evaluate(x, fp);
    x[j] = u[j] - h;
    evaluate(x, fm);
    x[j] = u[j];
    for (std::size_t i = 0; i < n; ++i)
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (fp[i] - fm[i]) / (2.0 * h);
  }
}

Vector ReactionTerm::eval(const Vector& u) const {
  if (static_cast<std::size_t>(u.size()) != species()) throw DimensionMismatch(species(), u.size());
  Vector out(u.size());
  evaluate({u.data(), static_cast<std::size_t>(u.size())}, {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

Matrix ReactionTerm::jacobian_at(const Vector& u) const {
  if (static_cast<std::size_t>(u.size()) != species()) throw DimensionMismatch(species(), u.size());
  Matrix jac;
  jacobian({u.data(), static_cast<std::size_t>(u.size())}, jac);
  return jac;
}

// ---------------------------------------------------------------------------
// FunctionReaction / LinearReaction

FunctionReaction::FunctionReaction(std::string name, std::size_t species, EvalFn eval, JacFn jac,
                                   std::optional<double> global_lipschitz)
    : name_(std::move(name)),
      species_(species),
      eval_(std::move(eval)),
      jac_(std::move(jac)),
      lipschitz_(global_lipschitz) {
  if (species_ == 0) throw InvalidParameter("reaction needs at least one species");
  if (!eval_) throw InvalidParameter("reaction needs an evaluation rule");
}

void FunctionReaction::evaluate(std::span<const double> u, std::span<double> out) const { eval_(u, out); }

void FunctionReaction::jacobian(std::span<const double> u, Matrix& jac) const {
  if (!jac_) {
    finite_difference_jacobian(u, jac);
    return;
  }
  jac.resize(static_cast<Eigen::Index>(species_), static_cast<Eigen::Index>(species_));
  jac_(u, jac);
}

std::optional<double> FunctionReaction::lipschitz_bound(const Box*) const { return lipschitz_; }

LinearReaction::LinearReaction(Matrix a, Vector b) : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != a_.cols()) throw DimensionMismatch(a_.rows(), a_.cols());
  if (b_.size() != a_.rows()) throw DimensionMismatch(a_.rows(), b_.size());
}

void LinearReaction::evaluate(std::span<const double> u, std::span<double> out) const {
  Eigen::Map<const Vector> x(u.data(), static_cast<Eigen::Index>(u.size()));
  Eigen::Map<Vector>(out.data(), static_cast<Eigen::Index>(out.size())) = a_ * x + b_;
}

void LinearReaction::jacobian(std::span<const double>, Matrix& jac) const { jac = a_; }

std::optional<double> LinearReaction::lipschitz_bound(const Box*) const { return a_.rowwise().norm().maxCoeff(); }

// ---------------------------------------------------------------------------
// CatalogReaction

CatalogReaction::CatalogReaction(Model model, double feed, double kill) : model_(model), feed_(feed), kill_(kill) {}

std::shared_ptr<CatalogReaction> CatalogReaction::from_name(const std::string& name) {
  if (name == "fisher-kpp") return std::make_shared<CatalogReaction>(Model::fisher_kpp);
  if (name == "lotka-volterra") return std::make_shared<CatalogReaction>(Model::lotka_volterra);
  if (name == "gray-scott") return std::make_shared<CatalogReaction>(Model::gray_scott);
  throw InvalidParameter("unknown reaction '" + name + "' (fisher-kpp, lotka-volterra, gray-scott)");
}

std::size_t CatalogReaction::species() const { return model_ == Model::fisher_kpp ? 1 : 2; }

std::string CatalogReaction::name() const {
  switch (model_) {
    case Model::fisher_kpp:
      return "fisher-kpp";
    case Model::lotka_volterra:
      return "lotka-volterra";
    case Model::gray_scott:
      return "gray-scott";
  }
  return "unknown";
}

void CatalogReaction::evaluate(std::span<const double> u, std::span<double> out) const {
  switch (model_) {
    case Model::fisher_kpp:
      out[0] = u[0] * (1.0 - u[0]);
      break;
    case Model::lotka_volterra:
      out[0] = u[0] * (1.0 - u[1]);
      out[1] = u[1] * (u[0] - 1.0);
      break;
    case Model::gray_scott: {
      const double uvv = u[0] * u[1] * u[1];
      out[0] = -uvv + feed_ * (1.0 - u[0]);
      out[1] = uvv - (feed_ + kill_) * u[1];
      break;
    }
  }
}

void CatalogReaction::jacobian(std::span<const double> u, Matrix& jac) const {
  const auto n = static_cast<Eigen::Index>(species());
  jac.resize(n, n);
  switch (model_) {
    case Model::fisher_kpp:
      jac(0, 0) = 1.0 - 2.0 * u[0];
      break;
    case Model::lotka_volterra:
      jac << 1.0 - u[1], -u[0], u[1], u[0] - 1.0;
      break;
    case Model::gray_scott:
      jac << -u[1] * u[1] - feed_, -2.0 * u[0] * u[1], u[1] * u[1], 2.0 * u[0] * u[1] - (feed_ + kill_);
      break;
  }
}

std::optional<double> CatalogReaction::lipschitz_bound(const Box* box) const {
  if (box == nullptr) return std::nullopt;  // none of the catalogue models is globally Lipschitz
  if (box->dim() != species()) throw DimensionMismatch(species(), box->dim());
  const PointSet corners = box_corners(*box);
  const auto n = static_cast<Eigen::Index>(species());
  Matrix entry_max = Matrix::Zero(n, n);
  Matrix jac;
  for (std::size_t c = 0; c < corners.size(); ++c) {
    jacobian(corners[c], jac);
    entry_max = entry_max.cwiseMax(jac.cwiseAbs());
  }
  return entry_max.rowwise().norm().maxCoeff();
}

// ---------------------------------------------------------------------------
// MLP

std::size_t MlpArchitecture::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) count += widths[k + 1] * (widths[k] + 1);
  return count;
}

void MlpArchitecture::validate() const {
  if (widths.size() < 2) throw InvalidParameter("network needs at least an input and an output layer");
  if (widths.front() == 0 || widths.front() != widths.back())
    throw InvalidParameter("network input and output widths must both equal the species count");
  for (auto w : widths)
    if (w == 0) throw InvalidParameter("network layer widths must be positive");
}

MlpReaction::MlpReaction(MlpArchitecture arch, Vector theta, std::size_t level, std::optional<double> parameter_bound)
    : arch_(std::move(arch)), theta_(std::move(theta)), level_(level), parameter_bound_(parameter_bound) {
  arch_.validate();
  if (static_cast<std::size_t>(theta_.size()) != arch_.parameter_count())
    throw DimensionMismatch(arch_.parameter_count(), theta_.size());
  if (parameter_bound_ && theta_.norm() > *parameter_bound_)
    throw InvalidParameter("parameter vector exceeds its declared norm bound");
  std::size_t offset = 0;
  for (std::size_t k = 0; k < arch_.layers(); ++k) {
    offsets_.push_back(offset);
    offset += arch_.widths[k + 1] * (arch_.widths[k] + 1);
  }
}

MlpReaction MlpReaction::random(const MlpArchitecture& arch, std::uint64_t seed, double scale) {
  arch.validate();
  std::mt19937_64 rng(seed);
  Vector theta(static_cast<Eigen::Index>(arch.parameter_count()));
  Eigen::Index p = 0;
  for (std::size_t k = 0; k < arch.layers(); ++k) {
    const std::size_t in = arch.widths[k];
    const std::size_t out = arch.widths[k + 1];
    std::normal_distribution<double> w(0.0, scale / std::sqrt(static_cast<double>(in)));
    std::normal_distribution<double> b(0.0, 0.25 * scale);
    for (std::size_t i = 0; i < out * in; ++i) theta[p++] = w(rng);
    for (std::size_t i = 0; i < out; ++i) theta[p++] = b(rng);
  }
  return MlpReaction(arch, std::move(theta));
}

std::vector<double> MlpReaction::layer_norm_bounds() const {
  std::vector<double> norms;
  for (std::size_t k = 0; k < arch_.layers(); ++k) {
    const std::size_t count = arch_.widths[k + 1] * arch_.widths[k];
    norms.push_back(theta_.segment(static_cast<Eigen::Index>(offsets_[k]), static_cast<Eigen::Index>(count)).norm());
  }
  return norms;
}

std::optional<double> MlpReaction::lipschitz_bound(const Box*) const {
  double bound = 1.0;
  for (double n : layer_norm_bounds()) bound *= n;
  return bound;
}

void MlpReaction::forward(std::span<const double> u, std::span<const double> direction, Workspace& ws) const {
  const std::size_t layers = arch_.layers();
  const bool tangent = !direction.empty();
  ws.z.resize(layers);
  ws.a.resize(layers);
  ws.dz.resize(tangent ? layers : 0);
  ws.da.resize(tangent ? layers : 0);
  ws.a[0] = Eigen::Map<const Vector>(u.data(), static_cast<Eigen::Index>(u.size()));
  if (tangent) ws.da[0] = Eigen::Map<const Vector>(direction.data(), static_cast<Eigen::Index>(direction.size()));

  const double* th = theta_.data();
  for (std::size_t k = 0; k < layers; ++k) {
    const std::size_t in = arch_.widths[k];
    const std::size_t out = arch_.widths[k + 1];
    const double* w = th + offsets_[k];
    const double* b = w + out * in;
    Vector& z = ws.z[k];
    z.resize(static_cast<Eigen::Index>(out));
    const Vector& a = ws.a[k];
    for (std::size_t i = 0; i < out; ++i) {
      double s = b[i];
      for (std::size_t j = 0; j < in; ++j) s += w[i * in + j] * a[static_cast<Eigen::Index>(j)];
      z[static_cast<Eigen::Index>(i)] = s;
    }
    if (tangent) {
      Vector& dz = ws.dz[k];
      dz.resize(static_cast<Eigen::Index>(out));
      const Vector& da = ws.da[k];
      for (std::size_t i = 0; i < out; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < in; ++j) s += w[i * in + j] * da[static_cast<Eigen::Index>(j)];
        dz[static_cast<Eigen::Index>(i)] = s;
      }
    }
    if (k + 1 < layers) {
      ws.a[k + 1] = z.array().tanh();
      if (tangent) ws.da[k + 1] = (1.0 - ws.a[k + 1].array().square()) * ws.dz[k].array();
    }
  }
}

void MlpReaction::backward(const Workspace& ws, std::span<const double> y_adj, std::span<const double> ydot_adj,
                           std::span<double> grad_theta, std::span<double> grad_u) const {
  const std::size_t layers = arch_.layers();
  const bool tangent = !ydot_adj.empty();
  if (tangent && ws.dz.size() != layers) throw InvalidParameter("tangent adjoint needs a tangent forward pass");

  const std::size_t n_out = arch_.widths.back();
  Vector gz(static_cast<Eigen::Index>(n_out)), gdz;
  for (std::size_t i = 0; i < n_out; ++i) gz[static_cast<Eigen::Index>(i)] = y_adj.empty() ? 0.0 : y_adj[i];
  if (tangent) gdz = Eigen::Map<const Vector>(ydot_adj.data(), static_cast<Eigen::Index>(n_out));

  const double* th = theta_.data();
  for (std::size_t k = layers; k-- > 0;) {
    const std::size_t in = arch_.widths[k];
    const std::size_t out = arch_.widths[k + 1];
    const double* w = th + offsets_[k];
    const Vector& a = ws.a[k];
    if (!grad_theta.empty()) {
      double* gw = grad_theta.data() + offsets_[k];
      double* gb = gw + out * in;
      for (std::size_t i = 0; i < out; ++i) {
        const double gzi = gz[static_cast<Eigen::Index>(i)];
        gb[i] += gzi;
        for (std::size_t j = 0; j < in; ++j) gw[i * in + j] += gzi * a[static_cast<Eigen::Index>(j)];
        if (tangent) {
          const double gdzi = gdz[static_cast<Eigen::Index>(i)];
          const Vector& da = ws.da[k];
          for (std::size_t j = 0; j < in; ++j) gw[i * in + j] += gdzi * da[static_cast<Eigen::Index>(j)];
        }
      }
    }
    // Adjoints of a[k] and da[k].
    Vector ga = Vector::Zero(static_cast<Eigen::Index>(in));
    Vector gda = tangent ? Vector::Zero(static_cast<Eigen::Index>(in)) : Vector();
    for (std::size_t i = 0; i < out; ++i) {
      const double gzi = gz[static_cast<Eigen::Index>(i)];
      const double gdzi = tangent ? gdz[static_cast<Eigen::Index>(i)] : 0.0;
      for (std::size_t j = 0; j < in; ++j) {
        ga[static_cast<Eigen::Index>(j)] += w[i * in + j] * gzi;
        if (tangent) gda[static_cast<Eigen::Index>(j)] += w[i * in + j] * gdzi;
      }
    }
    if (k == 0) {
      if (!grad_u.empty())
        for (std::size_t j = 0; j < in; ++j) grad_u[j] += ga[static_cast<Eigen::Index>(j)];
      break;
    }
    // a[k] = tanh(z[k-1]), da[k] = tanh'(z[k-1]) dz[k-1].
    const Vector& t = ws.a[k];
    const Eigen::ArrayXd slope = 1.0 - t.array().square();
    if (tangent) {
      const Eigen::ArrayXd curvature = -2.0 * t.array() * slope;
      gz = ga.array() * slope + gda.array() * curvature * ws.dz[k - 1].array();
      gdz = gda.array() * slope;
    } else {
      gz = ga.array() * slope;
    }
  }
}

void MlpReaction::evaluate(std::span<const double> u, std::span<double> out) const {
  Workspace ws;
  forward(u, {}, ws);
  const Vector& y = output(ws);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[static_cast<Eigen::Index>(i)];
}

void MlpReaction::jacobian(std::span<const double> u, Matrix& jac) const {
  const std::size_t n = species();
  jac.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Workspace ws;
  std::vector<double> dir(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    dir[j] = 1.0;
    forward(u, dir, ws);
    jac.col(static_cast<Eigen::Index>(j)) = output_tangent(ws);
    dir[j] = 0.0;
  }
}

// ---------------------------------------------------------------------------
// Parameter files

std::string format_parameter_file(const ParameterFile& file) {
  std::string widths;
  for (std::size_t i = 0; i < file.arch.widths.size(); ++i)
    widths += (i ? " " : "") + std::to_string(file.arch.widths[i]);
  std::string out;
  out += "# rdlearn reaction parameters v1\n";
  out += fmt::format("species {}\n", file.arch.species());
  out += "widths " + widths + "\n";
  out += "activation tanh\n";
  out += fmt::format("level {}\n", file.level);
  out += fmt::format("seed {}\n", file.seed);
  out += fmt::format("wrapper_eps {:.17g}\n", file.wrapper_eps);
  out += fmt::format("count {}\n", file.theta.size());
  for (Eigen::Index i = 0; i < file.theta.size(); ++i) out += fmt::format("{:.17g}\n", file.theta[i]);
  return out;
}

void write_parameter_file(const std::string& path, const ParameterFile& file) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write parameter file " + path);
  os << format_parameter_file(file);
}

ParameterFile read_parameter_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidParameter("cannot open parameter file " + path);
  std::string line;
  std::vector<std::string> header;
  for (int i = 0; i < 8 && std::getline(is, line); ++i) header.push_back(line);
  if (header.size() != 8 || header[0].rfind("# rdlearn reaction parameters", 0) != 0)
    throw InvalidParameter(path + ": not a parameter file (bad header)");
  auto field = [&](std::size_t idx, const std::string& key) {
    std::istringstream ss(header[idx]);
    std::string k;
    ss >> k;
    if (k != key) throw InvalidParameter(path + ": expected '" + key + "' on header line " + std::to_string(idx + 1));
    std::string rest;
    std::getline(ss, rest);
    return rest;
  };
  ParameterFile file;
  const std::size_t species = std::stoul(field(1, "species"));
  std::istringstream ws(field(2, "widths"));
  for (std::size_t w; ws >> w;) file.arch.widths.push_back(w);
  if (field(3, "activation").find("tanh") == std::string::npos)
    throw InvalidParameter(path + ": only tanh activation is supported");
  file.level = std::stoul(field(4, "level"));
  file.seed = std::stoull(field(5, "seed"));
  file.wrapper_eps = std::stod(field(6, "wrapper_eps"));
  const std::size_t count = std::stoul(field(7, "count"));
  file.arch.validate();
  if (file.arch.species() != species) throw InvalidParameter(path + ": species does not match widths");
  if (count != file.arch.parameter_count()) throw InvalidParameter(path + ": count does not match widths");
  file.theta.resize(static_cast<Eigen::Index>(count));
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(is, line)) throw InvalidParameter(path + ": truncated parameter list");
    file.theta[static_cast<Eigen::Index>(i)] = std::stod(line);
  }
  return file;
}

// ---------------------------------------------------------------------------
// Condition checks

double estimate_lipschitz(const ReactionTerm& f, const Box& box, std::size_t samples) {
  const std::size_t n = f.species();
  if (box.dim() != n) throw DimensionMismatch(n, box.dim());
  // Pairs: consecutive Sobol points plus each point with a short perturbation
  // of itself, which captures local slopes better than far pairs.
  const PointSet pts = sobol_points(box, samples + 1, 1);
  const double shrink = 1e-3;
  return kernels::max(samples, [&](std::size_t i) {
    std::vector<double> x(pts[i].begin(), pts[i].end());
    std::vector<double> fx(n), fy(n);
    f.evaluate(x, fx);
    double best = 0.0;
    auto quotient = [&](const std::vector<double>& y) {
      double dist2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) dist2 += (y[j] - x[j]) * (y[j] - x[j]);
      if (dist2 == 0.0) return;
      f.evaluate(y, fy);
      for (std::size_t c = 0; c < n; ++c) best = std::max(best, std::abs(fy[c] - fx[c]) / std::sqrt(dist2));
    };
    std::vector<double> y(pts[i + 1].begin(), pts[i + 1].end());
    quotient(y);
    for (std::size_t j = 0; j < n; ++j) y[j] = x[j] + shrink * (y[j] - x[j]);
    quotient(y);
    return best;
  });
}

ConditionReport check_conditions(const ReactionTerm& f, const Box& box, std::size_t samples,
                                 std::vector<double> weights) {
  const std::size_t n = f.species();
  if (box.dim() != n) throw DimensionMismatch(n, box.dim());
  if (samples == 0) throw InvalidParameter("condition check needs at least one sample");
  if (weights.empty()) weights.assign(n, 1.0);
  if (weights.size() != n) throw DimensionMismatch(n, weights.size());
  for (double c : weights)
    if (!(c > 0.0)) throw InvalidParameter("mass weights c_n must be positive");

  ConditionReport report;
  report.samples = samples;
  report.weights = weights;
  report.lipschitz_sampled = estimate_lipschitz(f, box, samples);
  report.lipschitz_certified = f.lipschitz_bound(&box);
  const double lip = report.lipschitz_certified.value_or(report.lipschitz_sampled);

  std::vector<double> zero(n, 0.0), f0(n);
  f.evaluate(zero, f0);
  double csum = 0.0, max_f0 = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    report.k0 += weights[c] * std::max(f0[c], 0.0);
    csum += weights[c];
    max_f0 = std::max(max_f0, std::abs(f0[c]));
  }
  report.k1 = lip * std::sqrt(static_cast<double>(n)) * csum;
  report.growth_constant = 4.0 * std::max(lip, max_f0);

  // Orthant part of the box for (Q) and (M).
  std::vector<double> olo(n), ohi(n);
  bool orthant_nonempty = true;
  for (std::size_t j = 0; j < n; ++j) {
    olo[j] = std::max(box.lo[j], 0.0);
    ohi[j] = box.hi[j];
    if (!(ohi[j] > olo[j])) orthant_nonempty = false;
  }

  // (Q): faces {u_c = 0} of the orthant part, if the box touches them.
  if (orthant_nonempty) {
    const Box orthant(olo, ohi);
    const PointSet face_pts = sobol_points(orthant, samples);
    for (std::size_t c = 0; c < n; ++c) {
      if (!(box.lo[c] <= 0.0 && box.hi[c] >= 0.0)) continue;
      std::vector<QuasipositivityViolation> found;
      std::vector<double> x(n), fx(n);
      for (std::size_t i = 0; i < face_pts.size(); ++i) {
        std::copy(face_pts[i].begin(), face_pts[i].end(), x.begin());
        x[c] = 0.0;
        f.evaluate(x, fx);
        if (!(fx[c] >= 0.0)) found.push_back({x, c, fx[c]});
      }
      report.violations.insert(report.violations.end(), found.begin(), found.end());
    }

    const PointSet mass_pts = sobol_points(orthant, samples);
    report.mass_worst_margin = kernels::max(mass_pts.size(), [&](std::size_t i) {
      std::vector<double> fx(n);
      f.evaluate(mass_pts[i], fx);
      double lhs = 0.0, mass = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        lhs += weights[c] * fx[c];
        mass += mass_pts[i][c];
      }
      return lhs - report.k0 - report.k1 * mass;
    });
  }

  const PointSet growth_pts = sobol_points(box, samples);
  report.growth_worst_ratio = kernels::max(growth_pts.size(), [&](std::size_t i) {
    std::vector<double> fx(n);
    f.evaluate(growth_pts[i], fx);
    double fn = 0.0, un = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      fn += fx[c] * fx[c];
      un += growth_pts[i][c] * growth_pts[i][c];
    }
    return std::sqrt(fn) / (1.0 + un);
  });
  return report;
}

}  // namespace rdlearn
