#include "bhmc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bhmc {

void ChainConfig::validate() const {
  RefreshRate{beta};
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  if (!(h0 > 0.0)) throw std::invalid_argument("h0 must be > 0");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be > 0");
  if (!(adapt.burn_in >= 0.0 && adapt.burn_in <= 1.0)) {
    throw std::invalid_argument("burn_in must be a fraction in [0, 1]");
  }
  if (!(adapt.target_accept > 0.0 && adapt.target_accept < 1.0)) {
    throw std::invalid_argument("target_accept must lie in (0, 1)");
  }
  if (!(adapt.rate_exponent > 0.5 && adapt.rate_exponent <= 1.0)) {
    throw std::invalid_argument("rate_exponent must lie in (0.5, 1]");
  }
  leapfrog(h0).validate();
}

LeapfrogConfig ChainConfig::leapfrog(double h) const {
  return {h, K, fp_tol, blow_up, require_convergence};
}

std::size_t ChainConfig::burn_in_iterations() const {
  return static_cast<std::size_t>(std::floor(adapt.burn_in * static_cast<double>(N)));
}

bool mh_accept(double H_prop, double H_cur, double u) {
  if (std::isnan(H_prop) || H_prop == std::numeric_limits<double>::infinity()) return false;
  if (H_prop == -std::numeric_limits<double>::infinity()) return true;
  const double delta = H_cur - H_prop;
  if (delta >= 0.0) return true;
  return u <= std::exp(delta);
}

double adapt_step_size(double h, bool accepted, std::size_t n, const ChainConfig& cfg) {
  if (!cfg.adapt.enabled || n == 0 || n > cfg.burn_in_iterations()) return h;
  const double gamma = std::pow(static_cast<double>(n), -cfg.adapt.rate_exponent);
  const double indicator = accepted ? 1.0 : 0.0;
  const double log_h = std::log(h) + gamma * (indicator - cfg.adapt.target_accept);
  return std::clamp(std::exp(log_h), 1e-8, 10.0);
}

namespace {

StepResult step_with_metric(const TargetPotential& V, const Polytope& P, const PhasePoint& state,
                            const MetricState& ms, const ChainConfig& cfg, double h, Rng& rng,
                            MetricState& ms_out) {
  const RefreshRate beta{cfg.beta};
  ChainRecord rec;
  rec.h = h;

  // Step 1
  const Vector refreshed = refresh_momentum(state.p, sample_momentum(ms, rng), beta);
  const PhasePoint current{state.x, refreshed};

  // Step 2
  const ProposalOptions opts{cfg.eta, cfg.norm_mode, cfg.involution};
  Proposal prop = proposal(V, P, current, ms, cfg.leapfrog(h), opts);
  rec.dom_failed = prop.dom_failed;
  rec.involution_rejected = prop.involution_rejected;

  // Step 3
  const double H_cur = hamiltonian(V, ms, refreshed);
  const double H_prop = prop.moved ? hamiltonian(V, prop.metric, prop.z.p) : H_cur;
  rec.H_current = H_cur;
  rec.nonfinite_energy = !std::isfinite(H_prop);
  const double u = rng.uniform();
  const bool pass = mh_accept(H_prop, H_cur, u);
  rec.accept_prob = std::isnan(H_prop) ? 0.0 : std::min(1.0, std::exp(H_cur - H_prop));
  rec.accepted = prop.moved && pass;

  // Step 4
  PhasePoint next = rec.accepted ? flip(prop.z) : flip(current);
  ms_out = rec.accepted ? std::move(prop.metric) : ms;

  // Step 5
  next.p = refresh_momentum(next.p, sample_momentum(ms_out, rng), beta);
  rec.x = next.x;
  return {std::move(next), std::move(rec)};
}

}  // namespace

StepResult bhmc_step(const TargetPotential& V, const Polytope& P, const PhasePoint& state,
                     const ChainConfig& cfg, double h, Rng& rng) {
  MetricState unused;
  return step_with_metric(V, P, state, metric_state(P, state.x), cfg, h, rng, unused);
}

Chain::Chain(const TargetPotential& V, const Polytope& P, ChainConfig cfg, const Vector& x_init)
    : V_(V), P_(P), cfg_(std::move(cfg)), rng_(cfg_.seed), h_(cfg_.h0) {
  cfg_.validate();
  if (x_init.size() != P.d() || !P.contains(x_init)) throw InfeasibleStart();
  ms_ = metric_state(P_, x_init);
  state_ = {x_init, sample_momentum(ms_, rng_)};
}

const ChainRecord& Chain::step() {
  MetricState next_ms;
  StepResult r = step_with_metric(V_, P_, state_, ms_, cfg_, h_, rng_, next_ms);
  ++n_;
  state_ = std::move(r.state);
  ms_ = std::move(next_ms);
  last_ = std::move(r.record);
  h_ = adapt_step_size(h_, last_.accepted, n_, cfg_);
  return last_;
}

ChainStats summarize(std::span<const ChainRecord> records, std::size_t burn_in,
                     const Functional& f) {
  ChainStats stats;
  stats.functional_mean = std::numeric_limits<double>::quiet_NaN();
  if (records.empty()) return stats;
  stats.final_h = records.back().h;
  const std::size_t start = std::min(burn_in, records.size());
  const auto kept = records.subspan(start);
  stats.kept = kept.size();
  stats.mean_x = Vector::Zero(records.front().x.size());
  if (kept.empty()) return stats;

  double accepted = 0, inv = 0, dom = 0, fsum = 0;
  for (const auto& r : kept) {
    accepted += r.accepted;
    inv += r.involution_rejected;
    dom += r.dom_failed;
    stats.mean_x += r.x;
    if (f) fsum += f(r.x);
  }
  const double n = static_cast<double>(kept.size());
  stats.acceptance_rate = accepted / n;
  stats.involution_rejection_rate = inv / n;
  stats.dom_failure_rate = dom / n;
  stats.mean_x /= n;
  if (f) stats.functional_mean = fsum / n;
  return stats;
}

ChainRun run_chain(const TargetPotential& V, const Polytope& P, const ChainConfig& cfg,
                   const Vector& x_init, const Functional& f, bool include_burn_in) {
  Chain chain(V, P, cfg, x_init);
  ChainRun run;
  run.records.reserve(cfg.N);
  for (std::size_t n = 0; n < cfg.N; ++n) run.records.push_back(chain.step());
  run.stats = summarize(run.records, include_burn_in ? 0 : cfg.burn_in_iterations(), f);
  return run;
}

}  // namespace bhmc
