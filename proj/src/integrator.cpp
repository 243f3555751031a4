#include "bhmc/integrator.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace bhmc {

void LeapfrogConfig::validate() const {
  if (!(h >= 0.0) || !std::isfinite(h)) throw std::invalid_argument("step size must be >= 0");
  if (K < 1) throw std::invalid_argument("fixed-point budget K must be >= 1");
  if (!(fp_tol > 0.0)) throw std::invalid_argument("fp_tol must be > 0");
  if (!(blow_up > 1.0)) throw std::invalid_argument("blow_up must be > 1");
}

std::string to_string(FailureStage stage) {
  return stage == FailureStage::momentum_fp ? "momentum_fp" : "position_fp";
}

std::string to_string(FailureReason reason) {
  switch (reason) {
    case FailureReason::infeasible_iterate:
      return "infeasible_iterate";
    case FailureReason::no_convergence:
      return "no_convergence";
    case FailureReason::diverged:
      return "diverged";
  }
  return "unknown";
}

IntegrationOutcome IntegrationOutcome::success(PhasePoint z, MetricState ms) {
  return IntegrationOutcome(Success{std::move(z), std::move(ms)});
}

IntegrationOutcome IntegrationOutcome::failure(DomainFailure f) { return IntegrationOutcome(f); }

PhasePoint half_kick(const TargetPotential& V, const Polytope& P, const MetricState& ms,
                     const Vector& p, double h) {
  return {ms.x, p - 0.5 * h * dx_h1(V, P, ms)};
}

PhasePoint half_kick(const TargetPotential& V, const Polytope& P, const PhasePoint& z, double h) {
  return half_kick(V, P, metric_state(P, z.x), z.p, h);
}

PhasePoint flip(const PhasePoint& z) { return {z.x, -z.p}; }

namespace {

// Bookkeeping shared by both fixed-point loops.
class ResidualMonitor {
 public:
  explicit ResidualMonitor(const LeapfrogConfig& cfg) : cfg_(cfg) {}

  enum class Verdict { keep_going, converged, diverged };

  Verdict observe(double residual) {
    if (!std::isfinite(residual)) return Verdict::diverged;
    if (first_ < 0.0) first_ = residual;
    if (residual <= cfg_.fp_tol) return Verdict::converged;
    if (residual > cfg_.blow_up * first_) return Verdict::diverged;
    return Verdict::keep_going;
  }

 private:
  const LeapfrogConfig& cfg_;
  double first_ = -1.0;
};

}  // namespace

std::variant<Vector, DomainFailure> solve_momentum_half_step(const Polytope& P,
                                                             const MetricState& ms0,
                                                             const Vector& p0,
                                                             const LeapfrogConfig& cfg) {
  const double half = 0.5 * cfg.h;
  ResidualMonitor monitor(cfg);
  Vector q = p0;
  for (int k = 0; k < cfg.K; ++k) {
    Vector next = p0 - half * dx_h2(P, ms0, q);
    const double residual = dual_norm(ms0, next - q);
    q = std::move(next);
    switch (monitor.observe(residual)) {
      case ResidualMonitor::Verdict::converged:
        return q;
      case ResidualMonitor::Verdict::diverged:
        return DomainFailure{FailureStage::momentum_fp, FailureReason::diverged};
      case ResidualMonitor::Verdict::keep_going:
        break;
    }
  }
  if (cfg.require_convergence) {
    return DomainFailure{FailureStage::momentum_fp, FailureReason::no_convergence};
  }
  return q;
}

IntegrationOutcome leapfrog_step(const Polytope& P, const PhasePoint& z0,
                                 const LeapfrogConfig& cfg) {
  auto ms0_opt = try_metric_state(P, z0.x);
  if (!ms0_opt) {
    return IntegrationOutcome::failure({FailureStage::momentum_fp, FailureReason::infeasible_iterate});
  }
  const MetricState& ms0 = *ms0_opt;
  const double half = 0.5 * cfg.h;

  auto half_step = solve_momentum_half_step(P, ms0, z0.p, cfg);
  if (auto* f = std::get_if<DomainFailure>(&half_step)) return IntegrationOutcome::failure(*f);
  const Vector& p_half = std::get<Vector>(half_step);

  // x1 = x0 + h/2 [g(x0)^-1 p_half + g(x1)^-1 p_half]
  const Vector base = z0.x + half * ms0.solve(p_half);
  ResidualMonitor monitor(cfg);
  Vector y = z0.x;
  std::optional<MetricState> ms_y = ms0;
  bool converged = false;
  for (int k = 0; k < cfg.K && !converged; ++k) {
    if (k > 0) {
      ms_y = try_metric_state(P, y);
      if (!ms_y) {
        return IntegrationOutcome::failure(
            {FailureStage::position_fp, FailureReason::infeasible_iterate});
      }
    }
    Vector next = base + half * ms_y->solve(p_half);
    const double residual = primal_norm(ms0, next - y);
    y = std::move(next);
    switch (monitor.observe(residual)) {
      case ResidualMonitor::Verdict::converged:
        converged = true;
        break;
      case ResidualMonitor::Verdict::diverged:
        return IntegrationOutcome::failure({FailureStage::position_fp, FailureReason::diverged});
      case ResidualMonitor::Verdict::keep_going:
        break;
    }
  }
  if (!converged && cfg.require_convergence) {
    return IntegrationOutcome::failure({FailureStage::position_fp, FailureReason::no_convergence});
  }

  auto ms1 = try_metric_state(P, y);
  if (!ms1) {
    return IntegrationOutcome::failure({FailureStage::position_fp, FailureReason::infeasible_iterate});
  }
  Vector p1 = p_half - half * dx_h2(P, *ms1, p_half);
  if (!p1.allFinite()) {
    return IntegrationOutcome::failure({FailureStage::position_fp, FailureReason::diverged});
  }
  return IntegrationOutcome::success({std::move(y), std::move(p1)}, std::move(*ms1));
}

IntegrationOutcome phi(const Polytope& P, const PhasePoint& z0, const LeapfrogConfig& cfg) {
  return leapfrog_step(P, flip(z0), cfg);
}

std::string to_string(NormMode mode) {
  return mode == NormMode::self_concordant ? "self_concordant" : "euclidean";
}

NormMode parse_norm_mode(const std::string& name) {
  if (name == "self_concordant") return NormMode::self_concordant;
  if (name == "euclidean") return NormMode::euclidean;
  throw std::invalid_argument("unknown norm mode '" + name + "'");
}

namespace {

double anchored_norm(const MetricState& anchor, const Vector& dx, const Vector& dp,
                     NormMode mode) {
  if (mode == NormMode::euclidean) return dx.norm() + dp.norm();
  return phase_norm(anchor, dx, dp);
}

InvolutionCheck check_round_trip(const Polytope& P, const PhasePoint& z0, const MetricState& ms0,
                                 const IntegrationOutcome& z1, const LeapfrogConfig& cfg,
                                 double eta, NormMode mode) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  using Reason = InvolutionCheck::Reason;
  if (!z1.ok()) return {false, Reason::first_map_failed, nan};
  const IntegrationOutcome w = phi(P, z1.point(), cfg);
  if (!w.ok()) return {false, Reason::second_map_failed, nan};

  const Vector dx = z0.x - w.point().x;
  const Vector dp = z0.p - w.point().p;
  const double err0 = anchored_norm(ms0, dx, dp, mode);
  const double err1 = anchored_norm(w.metric(), dx, dp, mode);
  const double error = err0 + err1;
  if (!(error <= eta)) return {false, Reason::tolerance, error};
  return {true, Reason::none, error};
}

}  // namespace

InvolutionCheck involution_check(const Polytope& P, const PhasePoint& z0,
                                 const IntegrationOutcome& z1, const LeapfrogConfig& cfg,
                                 double eta, NormMode mode) {
  auto ms0 = try_metric_state(P, z0.x);
  if (!ms0) {
    return {false, InvolutionCheck::Reason::anchor_failed,
            std::numeric_limits<double>::quiet_NaN()};
  }
  return check_round_trip(P, z0, *ms0, z1, cfg, eta, mode);
}

Proposal proposal(const TargetPotential& V, const Polytope& P, const PhasePoint& z,
                  const LeapfrogConfig& cfg, const ProposalOptions& opts) {
  return proposal(V, P, z, metric_state(P, z.x), cfg, opts);
}

Proposal proposal(const TargetPotential& V, const Polytope& P, const PhasePoint& z,
                  const MetricState& ms, const LeapfrogConfig& cfg, const ProposalOptions& opts) {
  Proposal out;
  out.z = z;
  out.metric = ms;

  // Z0 = (s o S_{h/2})(z); the kick leaves x (and hence the metric) unchanged.
  const PhasePoint z0 = flip(half_kick(V, P, ms, z.p, cfg.h));
  const IntegrationOutcome z1 = phi(P, z0, cfg);
  if (!z1.ok()) {
    out.dom_failed = true;
    return out;
  }
  if (opts.check_involution) {
    const InvolutionCheck check = check_round_trip(P, z0, ms, z1, cfg, opts.eta, opts.norm_mode);
    out.involution_error = check.error;
    if (!check.passed) {
      out.involution_rejected = true;
      return out;
    }
  }
  out.z = flip(half_kick(V, P, z1.metric(), z1.point().p, cfg.h));
  out.metric = z1.metric();
  out.moved = true;
  return out;
}

}  // namespace bhmc
