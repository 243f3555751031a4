#pragma once

// Reference samplers: MALA on polytope-truncated targets and independent
// Metropolis-Hastings with a uniform proposal on the simplex.

#include <cstddef>
#include <cstdint>
#include <functional>

#include "bhmc/hamiltonian.hpp"

namespace bhmc {

enum class MalaDrift {
  half_step,  // y ~ N(x - h/2 grad V(x), h I)
  full_step,  // y ~ N(x - h grad V(x), 2h I)
  std_dev,    // h is the proposal standard deviation: y ~ N(x - h^2/2 grad V(x), h^2 I)
};

struct MalaConfig {
  double h = 0.05;
  std::size_t N = 100000;
  std::uint64_t seed = 0;
  MalaDrift drift = MalaDrift::half_step;
};

struct ImhConfig {
  std::size_t N = 100000;
  std::uint64_t seed = 0;
};

struct BaselineStep {
  Vector x;
  bool accepted = false;
};

/// Proposals leaving the polytope are rejected (the target has no mass there).
BaselineStep mala_step(const TargetPotential& V, const Polytope& P, const Vector& x, double h,
                       Rng& rng, MalaDrift drift = MalaDrift::half_step);

/// Uniform point in the open simplex {x > 0, sum x < 1} via normalized
/// exponential spacings.
Vector sample_uniform_simplex(int d, Rng& rng);

/// Independent MH on the simplex with a flat proposal: accept with
/// min(1, exp(V(x) - V(y))).
BaselineStep imh_step(const TargetPotential& V, const Vector& x, Rng& rng);

/// Called once per iteration with the 0-based iteration index.
using SampleObserver = std::function<void(std::size_t, const Vector&, bool)>;

/// Returns the acceptance rate.
double run_mala(const TargetPotential& V, const Polytope& P, const MalaConfig& cfg,
                const Vector& x_init, const SampleObserver& observe = {});
double run_imh(const TargetPotential& V, const ImhConfig& cfg, const Vector& x_init,
               const SampleObserver& observe = {});

}  // namespace bhmc
