#pragma once

// Numerical maps of one n-BHMC integration step:
//   S_{h/2}(x, p) = (x, p - h/2 dx_H1(x))          half_kick
//   s(x, p)       = (x, -p)                          flip
//   Phi_h         = G_h o s                          phi
//   R_h^Phi       = (s o S_{h/2}) o Phi_h o (s o S_{h/2})   proposal
// where G_h is the generalized leapfrog (Stormer-Verlet) step for H2, solved
// by two fixed-point loops. Phi_h is only defined where those loops succeed;
// failures are returned as values, never thrown.

#include <optional>
#include <string>
#include <variant>

#include "bhmc/hamiltonian.hpp"

namespace bhmc {

struct LeapfrogConfig {
  double h = 0.1;
  int K = 30;               // fixed-point iteration budget per loop
  double fp_tol = 1e-10;    // residual tolerance, phase norm at the start point
  double blow_up = 1e6;     // residual / first residual above this is divergence
  // When false the loops stop after K iterations and keep the last iterate
  // even if the tolerance was not reached (fixed-budget solver, as used by
  // the no-involution ablation). Infeasibility and divergence still fail.
  bool require_convergence = true;

  /// Throws std::invalid_argument unless h >= 0, K >= 1, fp_tol > 0, blow_up > 1.
  void validate() const;
};

enum class FailureStage { momentum_fp, position_fp };
enum class FailureReason { infeasible_iterate, no_convergence, diverged };

struct DomainFailure {
  FailureStage stage;
  FailureReason reason;
};

std::string to_string(FailureStage stage);
std::string to_string(FailureReason reason);

/// Ok(point) or a DomainFailure. A successful outcome also carries the metric
/// at the end point so callers do not refactorize it.
class IntegrationOutcome {
 public:
  static IntegrationOutcome success(PhasePoint z, MetricState ms);
  static IntegrationOutcome failure(DomainFailure f);

  bool ok() const noexcept { return std::holds_alternative<Success>(value_); }
  const PhasePoint& point() const { return std::get<Success>(value_).z; }
  const MetricState& metric() const { return std::get<Success>(value_).ms; }
  const DomainFailure& failure() const { return std::get<DomainFailure>(value_); }

 private:
  struct Success {
    PhasePoint z;
    MetricState ms;
  };
  explicit IntegrationOutcome(std::variant<Success, DomainFailure> v) : value_(std::move(v)) {}
  std::variant<Success, DomainFailure> value_;
};

PhasePoint half_kick(const TargetPotential& V, const Polytope& P, const PhasePoint& z, double h);
PhasePoint half_kick(const TargetPotential& V, const Polytope& P, const MetricState& ms,
                     const Vector& p, double h);

PhasePoint flip(const PhasePoint& z);

/// First line of the leapfrog step: solves q = p0 - h/2 dx_H2(x0, q) by
/// fixed-point iteration from q = p0. On failure the stage is momentum_fp.
std::variant<Vector, DomainFailure> solve_momentum_half_step(const Polytope& P,
                                                             const MetricState& ms0,
                                                             const Vector& p0,
                                                             const LeapfrogConfig& cfg);

/// One generalized leapfrog step for H2 from z0.
IntegrationOutcome leapfrog_step(const Polytope& P, const PhasePoint& z0,
                                 const LeapfrogConfig& cfg);

/// Phi_h(z) = leapfrog_step(flip(z)). Its domain is exactly the Ok set.
IntegrationOutcome phi(const Polytope& P, const PhasePoint& z0, const LeapfrogConfig& cfg);

enum class NormMode { self_concordant, euclidean };

std::string to_string(NormMode mode);
NormMode parse_norm_mode(const std::string& name);

struct InvolutionCheck {
  enum class Reason { none, first_map_failed, second_map_failed, anchor_failed, tolerance };
  bool passed = false;
  Reason reason = Reason::none;
  double error = 0.0;  // err0 + err1; NaN when the round trip is undefined
};

/// Verifies z1 = Phi_h(z0) lies in the domain of Phi_h and that
/// ||z0 - Phi_h(z1)|| anchored at z0 plus the same difference anchored at
/// Phi_h(z1) is at most eta.
InvolutionCheck involution_check(const Polytope& P, const PhasePoint& z0,
                                 const IntegrationOutcome& z1, const LeapfrogConfig& cfg,
                                 double eta, NormMode mode);

struct ProposalOptions {
  double eta = 1.0;
  NormMode norm_mode = NormMode::self_concordant;
  bool check_involution = true;
};

struct Proposal {
  PhasePoint z;          // R_h^Phi(z) when moved, else the input
  MetricState metric;    // metric at z.x
  bool moved = false;
  bool dom_failed = false;
  bool involution_rejected = false;
  double involution_error = 0.0;
};

/// Applies R_h^Phi to z, or leaves z untouched when Phi_h is undefined at
/// the intermediate point or the involution check fails.
Proposal proposal(const TargetPotential& V, const Polytope& P, const PhasePoint& z,
                  const LeapfrogConfig& cfg, const ProposalOptions& opts);

/// Same, with the metric at z.x supplied by the caller.
Proposal proposal(const TargetPotential& V, const Polytope& P, const PhasePoint& z,
                  const MetricState& ms, const LeapfrogConfig& cfg, const ProposalOptions& opts);

}  // namespace bhmc
