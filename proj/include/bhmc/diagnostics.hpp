#pragma once

// Estimators and closed-form references for the truncated Gaussian
// experiments: the shift vector mu, the functional <x, mu>, effective sample
// size, replicate confidence intervals, and the exact mean of an isotropic
// Gaussian truncated to a box.

#include <span>
#include <string>
#include <vector>

#include "bhmc/barrier.hpp"

namespace bhmc {

struct FunctionalSeries {
  std::vector<double> values;
  std::string label;
};

/// mu = (10 / sqrt(d-1)) (1 - e1 + (sqrt(d-1) - 1) e2): mu_1 = 0, mu_2 = 10,
/// mu_j = 10 / sqrt(d-1) otherwise. Requires d >= 2.
Vector mu_vector(int d);

/// <x, mu>.
double q_functional(const Vector& x, const Vector& mu);

/// Mean of N(mu, 1) conditioned on (lo, hi). Stable far in the tails.
double truncated_normal_mean(double mu, double lo, double hi);

/// Coordinatewise mean of N(mu, I) truncated to the box [lo, hi]^d.
Vector truncated_box_gaussian_mean(const Vector& mu, double lo, double hi);

/// Exact Q* = sum_j mu_j m(mu_j) for the box-truncated Gaussian.
double truncated_box_gaussian_q(const Vector& mu, double lo, double hi);

/// N / (1 + 2 sum_k rho_k), with the autocorrelation sum truncated by Geyer's
/// initial positive sequence. Strongly antithetic series can give ESS > N;
/// the integrated autocorrelation time is floored at 1 / log10(N).
/// A constant series has ESS = N. Requires at least 100 values.
double ess(std::span<const double> values);
double ess(const FunctionalSeries& series);

/// Normalized autocorrelations rho_0..rho_{N-1} (FFT based).
std::vector<double> autocorrelation(std::span<const double> values);

struct ReplicateSummary {
  std::vector<double> means;
  double mean = 0.0;
  double std_error = 0.0;      // sample std / sqrt(R)
  double ci_half_width = 0.0;  // 1.96 std_error
};

/// Requires at least two replicates.
ReplicateSummary replicate_ci(std::span<const double> means);

}  // namespace bhmc
