#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "bhmc/diagnostics.hpp"
#include "support/oracles.hpp"

using namespace bhmc;

TEST(Mu, Examples) {
  Vector five(5);
  five << 0, 10, 5, 5, 5;
  EXPECT_TRUE(mu_vector(5).isApprox(five));
  const Vector ten = mu_vector(10);
  EXPECT_EQ(ten(0), 0.0);
  EXPECT_EQ(ten(1), 10.0);
  for (int j = 2; j < 10; ++j) EXPECT_NEAR(ten(j), 10.0 / 3.0, 1e-14);
  for (int d : {2, 3, 7, 10}) EXPECT_NEAR(mu_vector(d).squaredNorm(), 100.0 + (d - 2) * 100.0 / (d - 1), 1e-10);
  EXPECT_THROW(mu_vector(1), std::invalid_argument);
}

TEST(QFunctional, Examples) {
  const Vector mu = mu_vector(5);
  EXPECT_EQ(q_functional(Vector::Unit(5, 1), mu), 10.0);
  EXPECT_EQ(q_functional(Vector::Zero(5), mu), 0.0);
  EXPECT_NEAR(q_functional(mu / mu.norm(), mu), mu.norm(), 1e-12);
  EXPECT_THROW(q_functional(Vector::Zero(4), mu), std::invalid_argument);
}

TEST(TruncatedMean, SymmetryAndLimits) {
  EXPECT_EQ(truncated_normal_mean(0.0, -0.5, 0.5), 0.0);
  EXPECT_EQ(truncated_box_gaussian_mean(Vector::Zero(4), -2.0, 2.0), Vector::Zero(4));
  EXPECT_NEAR(truncated_normal_mean(1e4, -0.5, 0.5), 0.5, 1e-3);
  EXPECT_NEAR(truncated_normal_mean(-1e4, -0.5, 0.5), -0.5, 1e-3);
  EXPECT_GT(truncated_normal_mean(40.0, -0.5, 0.5), truncated_normal_mean(20.0, -0.5, 0.5));
  EXPECT_THROW(truncated_normal_mean(0.0, 1.0, 1.0), std::invalid_argument);
}

TEST(TruncatedMean, MatchesQuadrature) {
  for (double mu : {10.0, 5.0, 10.0 / 3.0, 0.0, -3.0, 0.7}) {
    const double want = oracle::truncated_mean_quadrature(mu, -0.5, 0.5);
    EXPECT_NEAR(truncated_normal_mean(mu, -0.5, 0.5), want, 1e-8 * std::max(1.0, std::abs(want))) << mu;
  }
  EXPECT_NEAR(truncated_normal_mean(2.0, 0.0, 1.0), oracle::truncated_mean_quadrature(2.0, 0.0, 1.0), 1e-9);
  EXPECT_NEAR(truncated_normal_mean(30.0, 0.0, 1.0), oracle::truncated_mean_quadrature(30.0, 0.0, 1.0), 1e-9);
}

TEST(TruncatedMean, AgreesWithExactSampling) {
  const Vector mu = mu_vector(5);
  const double q_star = truncated_box_gaussian_q(mu, -0.5, 0.5);
  Rng rng(1);
  const int n = 200000;
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double q = 0.0;
    for (int j = 0; j < 5; ++j) q += mu(j) * oracle::truncated_normal_draw(mu(j), -0.5, 0.5, rng);
    sum += q;
    sq += q * q;
  }
  const double mean = sum / n;
  const double se = std::sqrt((sq / n - mean * mean) / n);
  EXPECT_LE(std::abs(mean - q_star), 3.0 * se);
}

TEST(Ess, IidSeries) {
  Rng rng(2);
  std::vector<double> xs(10000);
  for (auto& x : xs) x = rng.normal();
  const double r = ess(xs) / xs.size();
  EXPECT_GE(r, 0.8);
  EXPECT_LE(r, 1.2);
}

TEST(Ess, AlternatingSeriesExceedsN) {
  std::vector<double> xs(1000);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = i % 2 ? -1.0 : 1.0;
  EXPECT_GT(ess(xs), 1000.0);
}

TEST(Ess, Ar1) {
  Rng rng(3);
  const double phi = 0.9;
  std::vector<double> xs(100000);
  double x = rng.normal() / std::sqrt(1 - phi * phi);
  for (auto& v : xs) {
    x = phi * x + rng.normal();
    v = x;
  }
  const double want = (1 - phi) / (1 + phi);
  EXPECT_NEAR(ess(xs) / xs.size(), want, 0.5 * want);
}

TEST(Ess, AffineInvariantAndDegenerate) {
  Rng rng(4);
  std::vector<double> xs(2000), ys(2000);
  double x = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    x = 0.5 * x + rng.normal();
    xs[i] = x;
    ys[i] = -3.0 * x + 7.0;
  }
  EXPECT_NEAR(ess(xs), ess(ys), 1e-6 * ess(xs));
  EXPECT_EQ(ess(std::vector<double>(500, 2.5)), 500.0);
  EXPECT_THROW(ess(std::vector<double>(99, 1.0)), std::invalid_argument);
  std::vector<double> bad(200, 0.0);
  bad[5] = NAN;
  EXPECT_THROW(ess(bad), std::invalid_argument);
  FunctionalSeries s{xs, "x"};
  EXPECT_EQ(ess(s), ess(xs));
}

TEST(Autocorrelation, MatchesDirectSum) {
  Rng rng(5);
  std::vector<double> xs(300);
  for (auto& v : xs) v = rng.normal();
  const auto rho = autocorrelation(xs);
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
  auto acov = [&](std::size_t k) {
    double s = 0.0;
    for (std::size_t i = 0; i + k < xs.size(); ++i) s += (xs[i] - mean) * (xs[i + k] - mean);
    return s;
  };
  for (std::size_t k : {0u, 1u, 7u, 150u, 299u}) EXPECT_NEAR(rho[k], acov(k) / acov(0), 1e-10);
}

TEST(ReplicateCi, Examples) {
  const std::vector<double> same(4, 3.0);
  EXPECT_EQ(replicate_ci(same).std_error, 0.0);
  const ReplicateSummary s = replicate_ci(std::vector<double>{0.0, 2.0});
  EXPECT_DOUBLE_EQ(s.mean, 1.0);
  EXPECT_DOUBLE_EQ(s.std_error, 1.0);
  EXPECT_DOUBLE_EQ(s.ci_half_width, 1.96);
  EXPECT_THROW(replicate_ci(std::vector<double>{1.0}), std::invalid_argument);
}

TEST(ReplicateCi, CoverageNearNominal) {
  Rng rng(6);
  int covered = 0;
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    std::vector<double> m(10);
    for (auto& v : m) v = 5.0 + rng.normal();
    const ReplicateSummary s = replicate_ci(m);
    covered += std::abs(s.mean - 5.0) <= s.ci_half_width;
  }
  // With R = 10 a 1.96 multiplier undercovers slightly (t quantile is 2.26).
  const double rate = static_cast<double>(covered) / trials;
  EXPECT_GT(rate, 0.89);
  EXPECT_LT(rate, 0.96);
}
