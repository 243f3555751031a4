#pragma once

// n-BHMC chain driver. One iteration:
//   1. partial momentum refresh
//   2. proposal R_h^Phi gated by the domain of Phi_h and the involution check
//   3. Metropolis-Hastings filter on H
//   4. momentum reversal
//   5. second partial momentum refresh

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bhmc/integrator.hpp"

namespace bhmc {

class InfeasibleStart : public std::invalid_argument {
 public:
  InfeasibleStart() : std::invalid_argument("initial point is not strictly inside the polytope") {}
};

struct AdaptationConfig {
  bool enabled = true;
  double target_accept = 0.5;
  double rate_exponent = 0.7;
  double burn_in = 0.2;  // fraction of N during which h adapts
};

struct ChainConfig {
  double beta = 1.0;
  std::size_t N = 1000;
  double h0 = 0.1;
  double eta = 5.0;
  int K = 30;
  double fp_tol = 1e-10;
  double blow_up = 1e6;
  bool require_convergence = true;
  std::uint64_t seed = 0;
  bool involution = true;  // false: skip the involution check (ablation)
  NormMode norm_mode = NormMode::self_concordant;
  AdaptationConfig adapt;

  void validate() const;
  LeapfrogConfig leapfrog(double h) const;
  /// Number of leading iterations in the adaptation window.
  std::size_t burn_in_iterations() const;
};

struct ChainRecord {
  Vector x;                  // position after the iteration
  bool accepted = false;     // proposal moved and passed the MH filter
  bool involution_rejected = false;
  bool dom_failed = false;
  bool nonfinite_energy = false;
  double h = 0.0;            // step size used for this iteration
  double H_current = 0.0;    // H(X_{n-1}, P~_n)
  double accept_prob = 0.0;  // A_n
};

struct ChainStats {
  double acceptance_rate = 0.0;
  double involution_rejection_rate = 0.0;
  double dom_failure_rate = 0.0;
  double final_h = 0.0;
  std::size_t kept = 0;  // iterations entering the estimates
  Vector mean_x;
  double functional_mean = 0.0;  // NaN when no functional was tracked
};

using Functional = std::function<double(const Vector&)>;

/// u <= min(1, exp(H_cur - H_prop)). NaN or +inf proposals are rejected.
bool mh_accept(double H_prop, double H_cur, double u);

/// Robbins-Monro update of log h during burn-in (n is 1-based); identity after.
double adapt_step_size(double h, bool accepted, std::size_t n, const ChainConfig& cfg);

struct StepResult {
  PhasePoint state;
  ChainRecord record;
};

/// One full iteration at step size h.
StepResult bhmc_step(const TargetPotential& V, const Polytope& P, const PhasePoint& state,
                     const ChainConfig& cfg, double h, Rng& rng);

/// Stateful chain, for callers that do not want to keep every record.
/// V and P must outlive the chain.
class Chain {
 public:
  /// Throws InfeasibleStart if x_init is not strictly inside P.
  Chain(const TargetPotential& V, const Polytope& P, ChainConfig cfg, const Vector& x_init);

  const ChainRecord& step();

  const PhasePoint& state() const noexcept { return state_; }
  double step_size() const noexcept { return h_; }
  std::size_t iteration() const noexcept { return n_; }
  const ChainConfig& config() const noexcept { return cfg_; }

 private:
  const TargetPotential& V_;
  const Polytope& P_;
  ChainConfig cfg_;
  Rng rng_;
  PhasePoint state_;
  double h_;
  MetricState ms_;
  std::size_t n_ = 0;
  ChainRecord last_;
};

/// Recomputes summary statistics from records; the first burn_in records
/// are excluded.
ChainStats summarize(std::span<const ChainRecord> records, std::size_t burn_in,
                     const Functional& f = {});

struct ChainRun {
  std::vector<ChainRecord> records;
  ChainStats stats;
};

ChainRun run_chain(const TargetPotential& V, const Polytope& P, const ChainConfig& cfg,
                   const Vector& x_init, const Functional& f = {},
                   bool include_burn_in = false);

}  // namespace bhmc
