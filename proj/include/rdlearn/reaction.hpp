#pragma once

// Reaction terms f: R^N -> R^N and sampling-based checks of the consistency
// conditions: local Lipschitz (L), quasipositivity (Q), mass control (M) and
// quadratic growth (G).

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rdlearn/sampling.hpp"

namespace rdlearn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class ReactionTerm {
 public:
  virtual ~ReactionTerm() = default;

  virtual std::size_t species() const = 0;
  virtual std::string name() const = 0;

  /// out = f(u); both spans have length species().
  virtual void evaluate(std::span<const double> u, std::span<double> out) const = 0;

  virtual bool has_jacobian() const { return false; }
  /// Row n holds grad f_n(u). Falls back to central differences with step
  /// 1e-5 * (1 + |u_j|) when no analytic rule exists.
  virtual void jacobian(std::span<const double> u, Matrix& jac) const;

  /// Certified bound L with |f_n(u) - f_n(v)| <= L |u - v| for u, v in the
  /// box (globally when the box is empty). nullopt when no bound is known.
  virtual std::optional<double> lipschitz_bound(const Box* box) const;

  /// Checked convenience wrappers.
  Vector eval(const Vector& u) const;
  Matrix jacobian_at(const Vector& u) const;

 protected:
  void finite_difference_jacobian(std::span<const double> u, Matrix& jac) const;
};

using ReactionPtr = std::shared_ptr<const ReactionTerm>;

/// Reaction defined by callables; used for synthetic families and tests.
class FunctionReaction : public ReactionTerm {
 public:
  using EvalFn = std::function<void(std::span<const double>, std::span<double>)>;
  using JacFn = std::function<void(std::span<const double>, Matrix&)>;

  FunctionReaction(std::string name, std::size_t species, EvalFn eval, JacFn jac = {},
                   std::optional<double> global_lipschitz = std::nullopt);

  std::size_t species() const override { return species_; }
  std::string name() const override { return name_; }
  void evaluate(std::span<const double> u, std::span<double> out) const override;
  bool has_jacobian() const override { return static_cast<bool>(jac_); }
  void jacobian(std::span<const double> u, Matrix& jac) const override;
  std::optional<double> lipschitz_bound(const Box* box) const override;

 private:
  std::string name_;
  std::size_t species_;
  EvalFn eval_;
  JacFn jac_;
  std::optional<double> lipschitz_;
};

/// f(u) = A u + b.
class LinearReaction : public ReactionTerm {
 public:
  LinearReaction(Matrix a, Vector b);
  std::size_t species() const override { return static_cast<std::size_t>(a_.rows()); }
  std::string name() const override { return "linear"; }
  void evaluate(std::span<const double> u, std::span<double> out) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(std::span<const double> u, Matrix& jac) const override;
  std::optional<double> lipschitz_bound(const Box* box) const override;

 private:
  Matrix a_;
  Vector b_;
};

/// Catalogue models whose Jacobian entries are convex or multilinear in u, so
/// entrywise maxima over a box are attained at its corners.
class CatalogReaction : public ReactionTerm {
 public:
  enum class Model { fisher_kpp, lotka_volterra, gray_scott };

  explicit CatalogReaction(Model model, double feed = 0.04, double kill = 0.06);
  /// Accepts "fisher-kpp", "lotka-volterra", "gray-scott".
  static std::shared_ptr<CatalogReaction> from_name(const std::string& name);

  std::size_t species() const override;
  std::string name() const override;
  void evaluate(std::span<const double> u, std::span<double> out) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(std::span<const double> u, Matrix& jac) const override;
  std::optional<double> lipschitz_bound(const Box* box) const override;

 private:
  Model model_;
  double feed_;
  double kill_;
};

/// Fully connected tanh network R^N -> R^N with linear output layer.
struct MlpArchitecture {
  std::vector<std::size_t> widths;  // widths.front() == widths.back() == N

  std::size_t species() const { return widths.front(); }
  std::size_t layers() const { return widths.size() - 1; }
  std::size_t parameter_count() const;
  void validate() const;
};

class MlpReaction : public ReactionTerm {
 public:
  /// Forward/tangent cache for one input point.
  struct Workspace {
    std::vector<Vector> z;   // pre-activations per layer
    std::vector<Vector> a;   // activations, a[0] = input
    std::vector<Vector> dz;  // tangents of z
    std::vector<Vector> da;  // tangents of a
  };

  MlpReaction(MlpArchitecture arch, Vector theta, std::size_t level = 0,
              std::optional<double> parameter_bound = std::nullopt);

  /// Weights ~ N(0, scale^2 / fan_in), biases ~ N(0, (scale/4)^2); seeded.
  static MlpReaction random(const MlpArchitecture& arch, std::uint64_t seed, double scale = 1.0);

  std::size_t species() const override { return arch_.species(); }
  std::string name() const override { return "mlp"; }
  void evaluate(std::span<const double> u, std::span<double> out) const override;
  bool has_jacobian() const override { return true; }
  void jacobian(std::span<const double> u, Matrix& jac) const override;
  /// Global bound: product of the layers' Frobenius norms (tanh has slope 1).
  std::optional<double> lipschitz_bound(const Box* box) const override;

  const MlpArchitecture& architecture() const { return arch_; }
  const Vector& theta() const { return theta_; }
  std::size_t level() const { return level_; }
  std::optional<double> parameter_bound() const { return parameter_bound_; }
  /// Frobenius norm of each weight matrix.
  std::vector<double> layer_norm_bounds() const;

  /// Value pass (and tangent pass when `direction` is non-empty).
  void forward(std::span<const double> u, std::span<const double> direction, Workspace& ws) const;
  /// Reverse accumulation through a forward(u, direction) pass. Adds the
  /// gradient of <y_adj, y> + <ydot_adj, ydot> with respect to theta into
  /// grad_theta and with respect to u into grad_u (either may be empty).
  void backward(const Workspace& ws, std::span<const double> y_adj, std::span<const double> ydot_adj,
                std::span<double> grad_theta, std::span<double> grad_u) const;

  /// Output of the last forward pass / its tangent.
  static const Vector& output(const Workspace& ws) { return ws.z.back(); }
  static const Vector& output_tangent(const Workspace& ws) { return ws.dz.back(); }

 private:
  MlpArchitecture arch_;
  Vector theta_;
  std::vector<std::size_t> offsets_;  // start of W_k in theta; b_k follows W_k
  std::size_t level_;
  std::optional<double> parameter_bound_;
};

/// Loads a learned-parameter file (8-line header followed by one value per line).
struct ParameterFile {
  MlpArchitecture arch;
  std::size_t level = 0;
  std::uint64_t seed = 0;
  double wrapper_eps = 0.0;  // 0 means "no wrapper recorded"
  Vector theta;
};
void write_parameter_file(const std::string& path, const ParameterFile& file);
std::string format_parameter_file(const ParameterFile& file);
ParameterFile read_parameter_file(const std::string& path);

// ---------------------------------------------------------------------------
// Condition checks

struct QuasipositivityViolation {
  std::vector<double> point;
  std::size_t component = 0;
  double value = 0.0;
};

struct ConditionReport {
  std::size_t samples = 0;
  // (L): max sampled difference quotient on the box, and a certified bound if known.
  double lipschitz_sampled = 0.0;
  std::optional<double> lipschitz_certified;
  // (Q)
  std::vector<QuasipositivityViolation> violations;
  // (M): c_n, K_0 = sum c_n P+(f_n(0)), K_1 = L sqrt(N) sum c_n and worst
  // margin sum c_n f_n(u) - K_0 - K_1 sum u_n over the orthant part of the box.
  std::vector<double> weights;
  double k0 = 0.0;
  double k1 = 0.0;
  double mass_worst_margin = 0.0;
  // (G): K = 4 max(L, max |f_n(0)|) and worst |f(u)| / (1 + |u|^2).
  double growth_constant = 0.0;
  double growth_worst_ratio = 0.0;

  bool quasipositive() const { return violations.empty(); }
  bool mass_controlled() const { return mass_worst_margin <= 0.0; }
  bool growth_bounded() const { return growth_worst_ratio <= growth_constant; }
};

/// Sampled Lipschitz estimate: max |f_n(x) - f_n(y)| / |x - y| over sampled pairs.
double estimate_lipschitz(const ReactionTerm& f, const Box& box, std::size_t samples);

ConditionReport check_conditions(const ReactionTerm& f, const Box& box, std::size_t samples,
                                 std::vector<double> weights = {});

}  // namespace rdlearn
