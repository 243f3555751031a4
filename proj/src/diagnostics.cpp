#include "bhmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include <unsupported/Eigen/FFT>

namespace bhmc {

Vector mu_vector(int d) {
  if (d < 2) throw std::invalid_argument("mu_vector needs d >= 2");
  const double root = std::sqrt(static_cast<double>(d - 1));
  Vector mu = Vector::Constant(d, 10.0 / root);
  mu(0) = 0.0;
  mu(1) = 10.0;
  return mu;
}

double q_functional(const Vector& x, const Vector& mu) {
  if (x.size() != mu.size()) throw std::invalid_argument("q_functional: size mismatch");
  return x.dot(mu);
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double std_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); }

double std_cdf(double t) { return 0.5 * std::erfc(-t * kInvSqrt2); }

// Mills ratio Phi(-x) / phi(x) for x >= 0.
double mills_ratio(double x) {
  if (x < 8.0) return std_cdf(-x) / std_pdf(x);
  // Continued fraction 1/(x + 1/(x + 2/(x + 3/(x + ...)))), evaluated backwards.
  double tail = x;
  for (int k = 200; k >= 1; --k) tail = x + k / tail;
  return 1.0 / tail;
}

// E[Z | a < Z < b] for standard normal Z.
double standard_truncated_mean(double a, double b) {
  if (a >= 0.0) return -standard_truncated_mean(-b, -a);
  if (b <= 0.0) {
    // Both ends in the lower tail. Divide numerator and denominator by
    // phi(b) so nothing underflows: (rho - 1) / (R(b) - rho R(a)).
    const double rho = std::isinf(a) ? 0.0 : std::exp(0.5 * (b - a) * (b + a));
    const double ra = std::isinf(a) ? 0.0 : mills_ratio(-a);
    return (rho - 1.0) / (mills_ratio(-b) - rho * ra);
  }
  const double pa = std::isinf(a) ? 0.0 : std_pdf(a);
  const double pb = std::isinf(b) ? 0.0 : std_pdf(b);
  return (pa - pb) / (std_cdf(b) - std_cdf(a));
}

}  // namespace

double truncated_normal_mean(double mu, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("truncation interval must satisfy lo < hi");
  return mu + standard_truncated_mean(lo - mu, hi - mu);
}

Vector truncated_box_gaussian_mean(const Vector& mu, double lo, double hi) {
  Vector m(mu.size());
  for (Eigen::Index j = 0; j < mu.size(); ++j) m(j) = truncated_normal_mean(mu(j), lo, hi);
  return m;
}

double truncated_box_gaussian_q(const Vector& mu, double lo, double hi) {
  return mu.dot(truncated_box_gaussian_mean(mu, lo, hi));
}

std::vector<double> autocorrelation(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) return {};
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);

  // Zero padding to 2n turns the circular correlation into the linear one.
  std::vector<double> padded(2 * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) padded[i] = values[i] - mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, padded);
  for (auto& c : spectrum) c = std::norm(c);
  std::vector<double> acov;
  fft.inv(acov, spectrum);

  std::vector<double> rho(n, 0.0);
  const double var = acov[0];
  if (!(var > 0.0)) {
    rho[0] = 1.0;
    return rho;
  }
  for (std::size_t k = 0; k < n; ++k) rho[k] = acov[k] / var;
  return rho;
}

double ess(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 100) throw std::invalid_argument("ess needs at least 100 values");
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("ess: non-finite value in series");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) return static_cast<double>(n);

  const std::vector<double> rho = autocorrelation(values);
  double pair_sum = 0.0;
  for (std::size_t k = 0; k + 1 < n; k += 2) {
    const double pair = rho[k] + rho[k + 1];
    if (!(pair > 0.0)) break;
    pair_sum += pair;
  }
  const double tau_floor = 1.0 / std::log10(static_cast<double>(n));
  const double tau = std::max(-1.0 + 2.0 * pair_sum, tau_floor);
  return static_cast<double>(n) / tau;
}

double ess(const FunctionalSeries& series) { return ess(std::span<const double>(series.values)); }

ReplicateSummary replicate_ci(std::span<const double> means) {
  if (means.size() < 2) throw std::invalid_argument("replicate_ci needs at least two replicates");
  ReplicateSummary out;
  out.means.assign(means.begin(), means.end());
  const double r = static_cast<double>(means.size());
  out.mean = std::accumulate(means.begin(), means.end(), 0.0) / r;
  double ss = 0.0;
  for (double m : means) ss += (m - out.mean) * (m - out.mean);
  const double sd = std::sqrt(ss / (r - 1.0));
  out.std_error = sd / std::sqrt(r);
  out.ci_half_width = 1.96 * out.std_error;
  return out;
}

}  // namespace bhmc
