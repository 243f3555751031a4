#include "bhmc/hamiltonian.hpp"

#include <cmath>
#include <stdexcept>

namespace bhmc {

RefreshRate::RefreshRate(double beta) : beta_(beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("refresh rate must lie in (0, 1]");
  }
}

double h1(const TargetPotential& V, const MetricState& ms) {
  return V.value(ms.x) + 0.5 * ms.logdet;
}

double h2(const MetricState& ms, const Vector& p) { return 0.5 * ms.lower_solve(p).squaredNorm(); }

double hamiltonian(const TargetPotential& V, const MetricState& ms, const Vector& p) {
  return h1(V, ms) + h2(ms, p);
}

Vector dx_h1(const TargetPotential& V, const Polytope& P, const MetricState& ms) {
  return V.gradient(ms.x) + 0.5 * trace_term(P, ms);
}

Vector dx_h2(const Polytope& P, const MetricState& ms, const Vector& p) {
  const Vector u = ms.solve(p);
  return -0.5 * metric_dirderiv(P, ms, u, u);
}

Vector dp_h2(const MetricState& ms, const Vector& p) { return ms.solve(p); }

double phase_norm(const MetricState& anchor, const Vector& dx, const Vector& dp) {
  return primal_norm(anchor, dx) + dual_norm(anchor, dp);
}

Vector sample_momentum(const MetricState& ms, Rng& rng) {
  return ms.chol * rng.normal_vector(ms.chol.rows());
}

Vector refresh_momentum(const Vector& p, const Vector& draw, RefreshRate beta) {
  const double b = beta.value();
  if (b == 1.0) return draw;
  return std::sqrt(1.0 - b) * p + std::sqrt(b) * draw;
}

}  // namespace bhmc
