#include "bhmc/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "bhmc/sampler.hpp"

namespace bhmc {

namespace {

struct DriftParams {
  double drift;     // multiplier on grad V
  double variance;  // proposal variance per coordinate
};

DriftParams params(MalaDrift drift, double h) {
  switch (drift) {
    case MalaDrift::half_step:
      return {0.5 * h, h};
    case MalaDrift::full_step:
      return {h, 2.0 * h};
    case MalaDrift::std_dev:
      return {0.5 * h * h, h * h};
  }
  return {0.5 * h, h};
}

// log q(to | from) up to a constant shared by both directions.
double log_kernel(const TargetPotential& V, const Vector& to, const Vector& from,
                  const DriftParams& dp) {
  const Vector mean = from - dp.drift * V.gradient(from);
  return -(to - mean).squaredNorm() / (2.0 * dp.variance);
}

}  // namespace

BaselineStep mala_step(const TargetPotential& V, const Polytope& P, const Vector& x, double h,
                       Rng& rng, MalaDrift drift) {
  const DriftParams dp = params(drift, h);
  const Vector y =
      x - dp.drift * V.gradient(x) + std::sqrt(dp.variance) * rng.normal_vector(x.size());
  const double u = rng.uniform();
  if (!P.contains(y)) return {x, false};
  const double log_ratio =
      V.value(x) - V.value(y) + log_kernel(V, x, y, dp) - log_kernel(V, y, x, dp);
  if (std::log(u) <= log_ratio) return {y, true};
  return {x, false};
}

Vector sample_uniform_simplex(int d, Rng& rng) {
  if (d < 1) throw std::invalid_argument("simplex dimension must be >= 1");
  // (E_1, ..., E_{d+1}) / sum is Dirichlet(1, ..., 1); drop the last coordinate.
  Vector e(d + 1);
  for (int i = 0; i <= d; ++i) e(i) = rng.exponential();
  return e.head(d) / e.sum();
}

BaselineStep imh_step(const TargetPotential& V, const Vector& x, Rng& rng) {
  const Vector y = sample_uniform_simplex(static_cast<int>(x.size()), rng);
  const double u = rng.uniform();
  if (std::log(u) <= V.value(x) - V.value(y)) return {y, true};
  return {x, false};
}

double run_mala(const TargetPotential& V, const Polytope& P, const MalaConfig& cfg,
                const Vector& x_init, const SampleObserver& observe) {
  if (!(cfg.h > 0.0)) throw std::invalid_argument("MALA step size must be > 0");
  if (!P.contains(x_init)) throw InfeasibleStart();
  Rng rng(cfg.seed);
  Vector x = x_init;
  std::size_t accepted = 0;
  for (std::size_t n = 0; n < cfg.N; ++n) {
    BaselineStep s = mala_step(V, P, x, cfg.h, rng, cfg.drift);
    accepted += s.accepted;
    x = std::move(s.x);
    if (observe) observe(n, x, s.accepted);
  }
  return cfg.N ? static_cast<double>(accepted) / static_cast<double>(cfg.N) : 0.0;
}

double run_imh(const TargetPotential& V, const ImhConfig& cfg, const Vector& x_init,
               const SampleObserver& observe) {
  if (cfg.N < 1) throw std::invalid_argument("IMH needs N >= 1");
  if (!((x_init.array() > 0.0).all() && x_init.sum() < 1.0)) throw InfeasibleStart();
  Rng rng(cfg.seed);
  Vector x = x_init;
  std::size_t accepted = 0;
  for (std::size_t n = 0; n < cfg.N; ++n) {
    BaselineStep s = imh_step(V, x, rng);
    accepted += s.accepted;
    x = std::move(s.x);
    if (observe) observe(n, x, s.accepted);
  }
  return static_cast<double>(accepted) / static_cast<double>(cfg.N);
}

}  // namespace bhmc
