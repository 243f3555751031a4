#include "bhmc/barrier.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace bhmc {

InfeasiblePoint::InfeasiblePoint(Eigen::Index constraint)
    : std::domain_error("point violates constraint " + std::to_string(constraint)),
      constraint_(constraint) {}

Polytope::Polytope(Matrix A, Vector b) : A_(std::move(A)), b_(std::move(b)) {
  if (A_.rows() != b_.size()) {
    throw InvalidPolytope("A has " + std::to_string(A_.rows()) + " rows but b has " +
                          std::to_string(b_.size()) + " entries");
  }
  if (A_.cols() < 1) throw InvalidPolytope("dimension must be at least 1");
  if (A_.rows() < A_.cols()) throw InvalidPolytope("need at least d constraints (m >= d)");
  if (!A_.allFinite() || !b_.allFinite()) throw InvalidPolytope("non-finite entries");

  const Matrix gram = A_.transpose() * A_;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() != Eigen::Success) throw InvalidPolytope("A is not full column rank");
  const double scale = gram.diagonal().maxCoeff();
  const Vector pivots = Matrix(llt.matrixL()).diagonal();
  if (pivots.minCoeff() <= 0.0 ||
      pivots.array().square().minCoeff() <= 1e-14 * scale) {
    throw InvalidPolytope("A is not full column rank");
  }
}

bool Polytope::contains(const Vector& x) const {
  if (x.size() != d()) return false;
  return ((b_ - A_ * x).array() > 0.0).all();
}

nlohmann::json Polytope::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m(); ++i) {
    std::vector<double> row(static_cast<std::size_t>(d()));
    for (Eigen::Index j = 0; j < d(); ++j) row[static_cast<std::size_t>(j)] = A_(i, j);
    rows.push_back(row);
  }
  return {{"d", d()},
          {"m", m()},
          {"A", rows},
          {"b", std::vector<double>(b_.data(), b_.data() + b_.size())}};
}

Polytope Polytope::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw InvalidPolytope("polytope document must be a JSON object");
  for (const char* key : {"d", "m", "A", "b"}) {
    if (!doc.contains(key)) throw InvalidPolytope(std::string("missing field '") + key + "'");
  }
  const auto d = doc.at("d").get<long>();
  const auto m = doc.at("m").get<long>();
  const auto& rows = doc.at("A");
  const auto& rhs = doc.at("b");
  if (d < 1 || m < 1) throw InvalidPolytope("d and m must be positive");
  if (!rows.is_array() || static_cast<long>(rows.size()) != m) {
    throw InvalidPolytope("A must have m rows");
  }
  if (!rhs.is_array() || static_cast<long>(rhs.size()) != m) {
    throw InvalidPolytope("b must have m entries");
  }
  Matrix A(m, d);
  Vector b(m);
  for (long i = 0; i < m; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<long>(row.size()) != d) {
      throw InvalidPolytope("row " + std::to_string(i) + " of A must have d entries");
    }
    for (long j = 0; j < d; ++j) A(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    b(i) = rhs[static_cast<std::size_t>(i)].get<double>();
  }
  return Polytope(std::move(A), std::move(b));
}

Polytope Polytope::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open polytope file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidPolytope("malformed polytope file " + path.string() + ": " + e.what());
  }
  return from_json(doc);
}

Polytope make_preset(PresetKind kind, int d, double half_width) {
  if (d < 1) throw std::invalid_argument("preset dimension must be >= 1");
  Matrix A;
  Vector b;
  switch (kind) {
    case PresetKind::hypercube:
      if (!(half_width > 0.0)) throw std::invalid_argument("half_width must be > 0");
      A.resize(2 * d, d);
      A << Matrix::Identity(d, d), -Matrix::Identity(d, d);
      b = Vector::Constant(2 * d, half_width);
      break;
    case PresetKind::simplex:
      A.resize(d + 1, d);
      A << -Matrix::Identity(d, d), Matrix::Ones(1, d);
      b = Vector::Zero(d + 1);
      b(d) = 1.0;
      break;
  }
  Polytope P(std::move(A), std::move(b));
  P.preset_ = kind;
  P.half_width_ = kind == PresetKind::hypercube ? half_width : 0.0;
  return P;
}

std::optional<PresetKind> parse_preset(const std::string& name) {
  if (name == "hypercube") return PresetKind::hypercube;
  if (name == "simplex") return PresetKind::simplex;
  return std::nullopt;
}

std::string to_string(PresetKind kind) {
  return kind == PresetKind::hypercube ? "hypercube" : "simplex";
}

Vector MetricState::solve(const Vector& v) const {
  Vector w = chol.triangularView<Eigen::Lower>().solve(v);
  chol.triangularView<Eigen::Lower>().transpose().solveInPlace(w);
  return w;
}

Vector MetricState::lower_solve(const Vector& v) const {
  return chol.triangularView<Eigen::Lower>().solve(v);
}

Vector slack(const Polytope& P, const Vector& x) { return P.b() - P.A() * x; }

namespace {

// Index of the first non-positive slack, or -1.
Eigen::Index first_violation(const Vector& s) {
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (!(s(i) > 0.0)) return i;
  }
  return -1;
}

enum class MetricError { none, infeasible, cholesky };

MetricError build_metric(const Polytope& P, const Vector& x, MetricState& ms,
                         Eigen::Index& bad) {
  ms.x = x;
  ms.s = slack(P, x);
  bad = first_violation(ms.s);
  if (bad >= 0) return MetricError::infeasible;
  const Matrix scaled = ms.s.cwiseInverse().asDiagonal() * P.A();
  ms.g.noalias() = scaled.transpose() * scaled;
  Eigen::LLT<Matrix> llt(ms.g);
  if (llt.info() != Eigen::Success) return MetricError::cholesky;
  ms.chol = llt.matrixL();
  const auto pivots = ms.chol.diagonal();
  if (!(pivots.minCoeff() > 0.0) || !pivots.allFinite()) return MetricError::cholesky;
  ms.logdet = 2.0 * pivots.array().log().sum();
  return MetricError::none;
}

}  // namespace

MetricState metric_state(const Polytope& P, const Vector& x) {
  MetricState ms;
  Eigen::Index bad = -1;
  switch (build_metric(P, x, ms, bad)) {
    case MetricError::infeasible:
      throw InfeasiblePoint(bad);
    case MetricError::cholesky:
      throw CholeskyFailure("metric is not positive definite");
    case MetricError::none:
      break;
  }
  return ms;
}

std::optional<MetricState> try_metric_state(const Polytope& P, const Vector& x) {
  MetricState ms;
  Eigen::Index bad = -1;
  if (!x.allFinite() || build_metric(P, x, ms, bad) != MetricError::none) return std::nullopt;
  return ms;
}

double barrier_value(const Polytope& P, const Vector& x) {
  const Vector s = slack(P, x);
  if (const auto bad = first_violation(s); bad >= 0) throw InfeasiblePoint(bad);
  return -s.array().log().sum();
}

Vector barrier_gradient(const Polytope& P, const Vector& x) {
  const Vector s = slack(P, x);
  if (const auto bad = first_violation(s); bad >= 0) throw InfeasiblePoint(bad);
  return P.A().transpose() * s.cwiseInverse();
}

Vector metric_dirderiv(const Polytope& P, const MetricState& ms, const Vector& u,
                       const Vector& v) {
  const Vector Au = P.A() * u;
  const Vector Av = P.A() * v;
  const Vector w = 2.0 * Au.cwiseProduct(Av).cwiseQuotient(ms.s.array().cube().matrix());
  return P.A().transpose() * w;
}

Vector trace_term(const Polytope& P, const MetricState& ms) {
  // Columns of W are L^-1 (a_i / s_i); sigma_i = ||W_i||^2.
  Matrix W = (ms.s.cwiseInverse().asDiagonal() * P.A()).transpose();
  ms.chol.triangularView<Eigen::Lower>().solveInPlace(W);
  const Vector sigma = W.colwise().squaredNorm().transpose();
  return P.A().transpose() * (2.0 * sigma.cwiseQuotient(ms.s));
}

double primal_norm(const MetricState& ms, const Vector& v) {
  return (ms.chol.transpose() * v).norm();
}

double dual_norm(const MetricState& ms, const Vector& p) { return ms.lower_solve(p).norm(); }

LocalNorms local_norms(const MetricState& ms, const Vector& v, const Vector& p) {
  return {primal_norm(ms, v), dual_norm(ms, p)};
}

namespace {

// Damped Newton on f(y) = c.y - sum log(b - A y) from a strictly feasible y.
// Returns the Newton decrement at exit.
double newton_center(const Matrix& A, const Vector& b, const Vector& c, Vector& y,
                     int max_iterations, double tolerance) {
  double decrement = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iterations; ++it) {
    const Vector s = b - A * y;
    const Matrix scaled = s.cwiseInverse().asDiagonal() * A;
    const Matrix H = scaled.transpose() * scaled;
    const Vector grad = c + A.transpose() * s.cwiseInverse();
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success) throw CholeskyFailure("barrier Hessian is singular");
    const Vector step = llt.solve(grad);
    decrement = std::sqrt(std::max(0.0, grad.dot(step)));
    if (!std::isfinite(decrement)) throw NoConvergence("Newton iteration diverged");
    if (decrement <= tolerance) return decrement;
    // 1/(1+lambda) keeps the step inside the Dikin ellipsoid; once the
    // decrement is small, full steps with a feasibility backtrack.
    double t = decrement > 0.25 ? 1.0 / (1.0 + decrement) : 1.0;
    Vector next = y - t * step;
    while (!((b - A * next).array() > 0.0).all()) {
      t *= 0.5;
      if (t < 1e-16) throw NoConvergence("Newton backtracking stalled");
      next = y - t * step;
    }
    y = std::move(next);
  }
  return decrement;
}

}  // namespace

Vector analytic_center(const Polytope& P, int max_iterations) {
  if (P.preset() == PresetKind::hypercube) return Vector::Zero(P.d());
  if (P.preset() == PresetKind::simplex) {
    return Vector::Constant(P.d(), 1.0 / static_cast<double>(P.d() + 1));
  }

  const Matrix& A = P.A();
  const Vector& b = P.b();
  const Eigen::Index d = P.d();
  const Eigen::Index m = P.m();

  Vector x = Vector::Zero(d);
  if (!P.contains(x)) {
    // Phase one: minimize t over {(x, t) : Ax - t < b, t < t_cap} along the
    // central path until some x becomes strictly feasible.
    const double t0 = (A * x - b).maxCoeff() + 1.0;
    Matrix Aaug(m + 1, d + 1);
    Aaug.topLeftCorner(m, d) = A;
    Aaug.topRightCorner(m, 1).setConstant(-1.0);
    Aaug.bottomLeftCorner(1, d).setZero();
    Aaug(m, d) = 1.0;
    Vector baug(m + 1);
    baug << b, t0 + 1.0;
    Vector y(d + 1);
    y << x, t0;
    Vector c = Vector::Zero(d + 1);
    bool found = false;
    for (double weight = 1.0; weight < 1e12; weight *= 4.0) {
      c(d) = weight;
      newton_center(Aaug, baug, c, y, max_iterations, 1e-6);
      if (P.contains(y.head(d))) {
        found = true;
        break;
      }
    }
    if (!found) throw NoConvergence("could not find a strictly feasible point");
    x = y.head(d);
  }

  const double decrement = newton_center(A, b, Vector::Zero(d), x, max_iterations, 1e-8);
  if (decrement > 1e-8) {
    throw NoConvergence("analytic center not reached in " + std::to_string(max_iterations) +
                        " Newton iterations");
  }
  return x;
}

}  // namespace bhmc
