#pragma once

// The Hamiltonian H(x, p) = V(x) + 1/2 log det g(x) + 1/2 ||p||^2_{g(x)^-1},
// split as H1 = V + 1/2 log det g (position only) and H2 = 1/2 ||p||^2_{g^-1}.

#include <memory>
#include <string>

#include "bhmc/barrier.hpp"
#include "bhmc/rng.hpp"

namespace bhmc {

/// A point of the cotangent bundle: x strictly inside the polytope, p free.
struct PhasePoint {
  Vector x;
  Vector p;
};

/// Negative log-density (up to a constant) of the target on the polytope.
class TargetPotential {
 public:
  virtual ~TargetPotential() = default;
  virtual double value(const Vector& x) const = 0;
  virtual Vector gradient(const Vector& x) const = 0;
  virtual std::string name() const = 0;
};

/// V = 0.
class UniformTarget final : public TargetPotential {
 public:
  double value(const Vector&) const override { return 0.0; }
  Vector gradient(const Vector& x) const override { return Vector::Zero(x.size()); }
  std::string name() const override { return "uniform"; }
};

/// V(x) = 1/2 ||x - mu||^2, i.e. an isotropic Gaussian truncated to the polytope.
class GaussianTarget final : public TargetPotential {
 public:
  explicit GaussianTarget(Vector mu) : mu_(std::move(mu)) {}
  double value(const Vector& x) const override { return 0.5 * (x - mu_).squaredNorm(); }
  Vector gradient(const Vector& x) const override { return x - mu_; }
  std::string name() const override { return "gaussian"; }
  const Vector& mu() const noexcept { return mu_; }

 private:
  Vector mu_;
};

/// Momentum refresh parameter beta in (0, 1].
class RefreshRate {
 public:
  explicit RefreshRate(double beta);
  double value() const noexcept { return beta_; }

 private:
  double beta_;
};

double h1(const TargetPotential& V, const MetricState& ms);
double h2(const MetricState& ms, const Vector& p);
double hamiltonian(const TargetPotential& V, const MetricState& ms, const Vector& p);

/// grad V(x) + 1/2 g^-1 : Dg(x). The p-derivative of H1 is identically zero.
Vector dx_h1(const TargetPotential& V, const Polytope& P, const MetricState& ms);

/// -1/2 Dg(x)[u, u] with u = g(x)^-1 p.
Vector dx_h2(const Polytope& P, const MetricState& ms, const Vector& p);

/// g(x)^-1 p.
Vector dp_h2(const MetricState& ms, const Vector& p);

/// ||dx||_{g(x)} + ||dp||_{g(x)^-1}, with x the anchor of ms.
double phase_norm(const MetricState& anchor, const Vector& dx, const Vector& dp);

/// Draw from N(0, g(x)): L xi with xi standard normal.
Vector sample_momentum(const MetricState& ms, Rng& rng);

/// sqrt(1 - beta) p + sqrt(beta) draw.
Vector refresh_momentum(const Vector& p, const Vector& draw, RefreshRate beta);

}  // namespace bhmc
