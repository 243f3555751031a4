#pragma once

// Polytope representation and the differential geometry of its logarithmic
// barrier phi(x) = -sum_i log(b_i - a_i.x), whose Hessian
// g(x) = A^T S(x)^-2 A is the Riemannian metric every sampler here runs on.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace bhmc {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Raised when a point is on or outside the boundary of the polytope.
class InfeasiblePoint : public std::domain_error {
 public:
  explicit InfeasiblePoint(Eigen::Index constraint);
  Eigen::Index constraint() const noexcept { return constraint_; }

 private:
  Eigen::Index constraint_;
};

/// A Cholesky pivot of g(x) was not positive: A is (numerically) rank deficient.
class CholeskyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidPolytope : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class PresetKind { hypercube, simplex };

/// Open polytope {x : Ax < b}. Immutable once constructed; the constructor
/// checks shapes, m >= d and full column rank of A. Boundedness is not
/// checked here (analytic_center reports it as NoConvergence).
class Polytope {
 public:
  Polytope(Matrix A, Vector b);

  const Matrix& A() const noexcept { return A_; }
  const Vector& b() const noexcept { return b_; }
  Eigen::Index m() const noexcept { return A_.rows(); }
  Eigen::Index d() const noexcept { return A_.cols(); }

  /// Set for polytopes built by make_preset.
  std::optional<PresetKind> preset() const noexcept { return preset_; }
  double half_width() const noexcept { return half_width_; }

  /// Strict membership, Ax < b.
  bool contains(const Vector& x) const;

  nlohmann::json to_json() const;
  static Polytope from_json(const nlohmann::json& doc);
  static Polytope load(const std::filesystem::path& path);

 private:
  friend Polytope make_preset(PresetKind, int, double);

  Matrix A_;
  Vector b_;
  std::optional<PresetKind> preset_;
  double half_width_ = 0.0;
};

/// hypercube: [-w, w]^d as A = [I; -I], b = w.1.
/// simplex: {x > 0, sum x < 1} as A = [-I; 1^T], b = (0, ..., 0, 1).
Polytope make_preset(PresetKind kind, int d, double half_width = 0.5);

std::optional<PresetKind> parse_preset(const std::string& name);
std::string to_string(PresetKind kind);

/// Everything about the metric at one point that the integrator needs.
/// Built once per point and passed around explicitly.
struct MetricState {
  Vector x;
  Vector s;     // slacks b - Ax, all > 0
  Matrix g;     // A^T S^-2 A
  Matrix chol;  // lower factor L, g = L L^T
  double logdet = 0.0;

  /// g^-1 v via two triangular solves.
  Vector solve(const Vector& v) const;
  /// L^-1 v.
  Vector lower_solve(const Vector& v) const;
};

Vector slack(const Polytope& P, const Vector& x);

/// Throws InfeasiblePoint if some slack is <= 0, CholeskyFailure if g is not PD.
MetricState metric_state(const Polytope& P, const Vector& x);

/// Non-throwing variant used inside the integrator loops.
std::optional<MetricState> try_metric_state(const Polytope& P, const Vector& x);

double barrier_value(const Polytope& P, const Vector& x);
Vector barrier_gradient(const Polytope& P, const Vector& x);

/// Dg(x)[u, v] as a vector: 2 A^T S^-3 ((Au) .* (Av)). Symmetric and bilinear.
Vector metric_dirderiv(const Polytope& P, const MetricState& ms, const Vector& u,
                       const Vector& v);

/// g(x)^-1 : Dg(x), i.e. the gradient of log det g(x). Component l is
/// sum_i 2 A_il sigma_i / s_i with leverage scores
/// sigma_i = a_i^T g^-1 a_i / s_i^2.
Vector trace_term(const Polytope& P, const MetricState& ms);

struct LocalNorms {
  double primal;  // ||v||_{g(x)}
  double dual;    // ||p||_{g(x)^-1}
};

LocalNorms local_norms(const MetricState& ms, const Vector& v, const Vector& p);
double primal_norm(const MetricState& ms, const Vector& v);
double dual_norm(const MetricState& ms, const Vector& p);

/// Starting point for chains. Presets return their exact center of mass;
/// anything else gets the analytic center (minimizer of phi) by damped
/// Newton, accurate to ||grad phi||_{g^-1} <= 1e-8.
Vector analytic_center(const Polytope& P, int max_iterations = 200);

}  // namespace bhmc
