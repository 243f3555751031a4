#include "bhmc/selfcheck.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "bhmc/baselines.hpp"
#include "bhmc/diagnostics.hpp"
#include "bhmc/integrator.hpp"

namespace bhmc {

namespace {

using ScalarField = std::function<double(const Vector&)>;
using VectorField = std::function<Vector(const Vector&)>;

Vector fd_gradient(const ScalarField& f, const Vector& x, double eps) {
  Vector g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp(j) += eps;
    xm(j) -= eps;
    g(j) = (f(xp) - f(xm)) / (2.0 * eps);
  }
  return g;
}

Matrix fd_jacobian(const VectorField& f, const Vector& x, double eps) {
  Matrix J(f(x).size(), x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp(j) += eps;
    xm(j) -= eps;
    J.col(j) = (f(xp) - f(xm)) / (2.0 * eps);
  }
  return J;
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

Vector interior_point(const Polytope& P, Rng& rng) {
  if (P.preset() == PresetKind::simplex) return sample_uniform_simplex(static_cast<int>(P.d()), rng);
  Vector x(P.d());
  for (Eigen::Index j = 0; j < P.d(); ++j) x(j) = (2.0 * rng.uniform() - 1.0) * P.half_width();
  return x;
}

double fd_step(const Polytope& P, const Vector& x) { return 1e-4 * slack(P, x).minCoeff(); }

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

CheckResult check_finite_differences(const CheckOptions& opts) {
  Timer timer;
  Rng rng(opts.seed);
  const int d = 5;
  const GaussianTarget V(mu_vector(d));
  double worst = 0.0;
  std::string worst_name = "none";
  auto track = [&](double err, const char* name) {
    if (err > worst || std::isnan(err)) {
      worst = std::isnan(err) ? INFINITY : err;
      worst_name = name;
    }
  };

  for (const Polytope& P : {make_preset(PresetKind::hypercube, d), make_preset(PresetKind::simplex, d)}) {
    for (int trial = 0; trial < 100; ++trial) {
      const Vector x = interior_point(P, rng);
      const Vector p = metric_state(P, x).chol * rng.normal_vector(d);
      const double eps = fd_step(P, x);
      const MetricState ms = metric_state(P, x);

      auto phi = [&](const Vector& y) { return barrier_value(P, y); };
      auto grad = [&](const Vector& y) { return barrier_gradient(P, y); };
      auto logdet = [&](const Vector& y) { return metric_state(P, y).logdet; };
      auto H1 = [&](const Vector& y) { return h1(V, metric_state(P, y)); };
      auto H2x = [&](const Vector& y) { return h2(metric_state(P, y), p); };
      auto H2p = [&](const Vector& q) { return h2(ms, q); };

      track(rel_err(barrier_gradient(P, x), fd_gradient(phi, x, eps)), "barrier_gradient");
      track(rel_err(ms.g, fd_jacobian(grad, x, eps)), "metric_state");
      Vector trace = trace_term(P, ms);
      if (opts.inject_trace_sign_error) trace = -trace;
      track(rel_err(trace, fd_gradient(logdet, x, eps)), "trace_term");
      track(rel_err(dx_h1(V, P, ms), fd_gradient(H1, x, eps)), "dx_H1");
      track(rel_err(dx_h2(P, ms, p), fd_gradient(H2x, x, eps)), "dx_H2");
      track(rel_err(dp_h2(ms, p), fd_gradient(H2p, p, 1e-4 * std::max(1.0, p.norm()))), "dp_H2");

      const Vector u = rng.normal_vector(d);
      const Vector v = rng.normal_vector(d);
      auto gu = [&](const Vector& y) -> Vector { return metric_state(P, y).g * u; };
      track(rel_err(metric_dirderiv(P, ms, u, v), fd_jacobian(gu, x, eps) * v), "metric_dirderiv");
    }
  }
  std::ostringstream detail;
  detail << "max rel err " << std::scientific << std::setprecision(2) << worst << " (" << worst_name
         << ")";
  return {"finite_differences", worst <= 1e-5, detail.str(), timer.seconds()};
}

CheckResult check_self_concordance(const CheckOptions& opts) {
  Timer timer;
  Rng rng(opts.seed + 1);
  std::size_t violations = 0;
  for (const Polytope& P : {make_preset(PresetKind::hypercube, 5), make_preset(PresetKind::simplex, 5)}) {
    const double nu = static_cast<double>(P.m());
    for (int trial = 0; trial < 500; ++trial) {
      const Vector x = interior_point(P, rng);
      const Vector h = rng.normal_vector(P.d());
      const MetricState ms = metric_state(P, x);
      const double third = std::abs(h.dot(metric_dirderiv(P, ms, h, h)));
      const double hn = primal_norm(ms, h);
      const double bound3 = 2.0 * hn * hn * hn;
      if (third > bound3 + 1e-9 * (1.0 + bound3)) ++violations;
      const double lhs = std::pow(barrier_gradient(P, x).dot(h), 2);
      const double bound1 = nu * hn * hn;
      if (lhs > bound1 + 1e-9 * (1.0 + bound1)) ++violations;
    }
  }
  return {"self_concordance", violations == 0,
          std::to_string(violations) + " violations in 1000 samples", timer.seconds()};
}

CheckResult check_dikin(const CheckOptions& opts) {
  Timer timer;
  Rng rng(opts.seed + 2);
  std::size_t escapes = 0;
  for (const Polytope& P : {make_preset(PresetKind::hypercube, 5), make_preset(PresetKind::simplex, 5)}) {
    for (int trial = 0; trial < 500; ++trial) {
      const Vector x = interior_point(P, rng);
      const MetricState ms = metric_state(P, x);
      Vector u = rng.normal_vector(P.d());
      u *= 0.999 / primal_norm(ms, u);
      if (!P.contains(x + u)) ++escapes;
    }
  }
  return {"dikin_containment", escapes == 0,
          std::to_string(escapes) + " of 1000 points left the polytope", timer.seconds()};
}

CheckResult check_involution(const CheckOptions& opts) {
  Timer timer;
  Rng rng(opts.seed + 3);
  const Polytope P = make_preset(PresetKind::hypercube, 5);
  LeapfrogConfig cfg;
  cfg.h = 0.02;
  double worst = 0.0;
  std::size_t failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Vector x = 0.8 * interior_point(P, rng);
    const MetricState ms = metric_state(P, x);
    const PhasePoint z{x, sample_momentum(ms, rng)};
    const IntegrationOutcome once = phi(P, z, cfg);
    if (!once.ok()) {
      ++failures;
      continue;
    }
    const IntegrationOutcome twice = phi(P, once.point(), cfg);
    if (!twice.ok()) {
      ++failures;
      continue;
    }
    worst = std::max(worst, phase_norm(ms, twice.point().x - z.x, twice.point().p - z.p));
  }
  std::ostringstream detail;
  detail << failures << " domain failures, max round-trip error " << std::scientific
         << std::setprecision(2) << worst;
  return {"involution", failures == 0 && worst <= 10.0 * cfg.fp_tol, detail.str(),
          timer.seconds()};
}

CheckResult check_energy_order(const CheckOptions& opts) {
  Timer timer;
  Rng rng(opts.seed + 4);
  const Polytope P = make_preset(PresetKind::hypercube, 5);
  const GaussianTarget V(mu_vector(5));
  const std::vector<double> steps = {0.08, 0.04, 0.02, 0.01};
  std::vector<double> mean_error(steps.size(), 0.0);
  bool all_moved = true;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = 0.6 * interior_point(P, rng);
    const MetricState ms = metric_state(P, x);
    const PhasePoint z{x, sample_momentum(ms, rng)};
    const double H0 = hamiltonian(V, ms, z.p);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      LeapfrogConfig cfg;
      cfg.h = steps[i];
      cfg.fp_tol = 1e-13;
      cfg.K = 100;
      const Proposal prop = proposal(V, P, z, ms, cfg, {1e6, NormMode::self_concordant, true});
      all_moved = all_moved && prop.moved;
      mean_error[i] += std::abs(hamiltonian(V, prop.metric, prop.z.p) - H0);
    }
  }
  // Least-squares slope of log error against log h.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const double lx = std::log(steps[i]);
    const double ly = std::log(mean_error[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  std::ostringstream detail;
  detail << "log-log slope " << std::fixed << std::setprecision(3) << slope;
  return {"energy_order", all_moved && slope >= 2.5 && slope <= 3.5, detail.str(),
          timer.seconds()};
}

}  // namespace

std::vector<CheckResult> run_self_checks(const CheckOptions& opts) {
  std::vector<CheckResult> results;
  for (auto* suite : {check_finite_differences, check_self_concordance, check_dikin,
                      check_involution, check_energy_order}) {
    try {
      results.push_back(suite(opts));
    } catch (const std::exception& e) {
      results.push_back({"suite", false, std::string("exception: ") + e.what(), 0.0});
    }
  }
  return results;
}

void print_check_table(const std::vector<CheckResult>& results, std::ostream& out) {
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(20) << r.name << " "
        << std::right << std::fixed << std::setprecision(2) << std::setw(7) << r.seconds << "s  "
        << r.detail << "\n";
  }
}

}  // namespace bhmc
