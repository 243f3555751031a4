#include <cmath>

#include <gtest/gtest.h>

#include "bhmc/baselines.hpp"
#include "bhmc/diagnostics.hpp"
#include "bhmc/sampler.hpp"
#include "support/oracles.hpp"

using namespace bhmc;

TEST(Mala, InfeasibleProposalIsRejected) {
  // A huge step from near the face lands outside almost surely.
  const Polytope P = make_preset(PresetKind::hypercube, 2, 0.5);
  const GaussianTarget V(Vector::Constant(2, 50.0));
  Rng rng(1);
  const Vector x = Vector::Constant(2, 0.49);
  for (int i = 0; i < 100; ++i) {
    const BaselineStep s = mala_step(V, P, x, 1.0, rng);
    EXPECT_FALSE(s.accepted);
    EXPECT_EQ(s.x, x);
  }
}

TEST(Mala, FlatTargetAwayFromBoundaryAlwaysAccepts) {
  const Polytope P = make_preset(PresetKind::hypercube, 3, 100.0);
  Rng rng(2);
  Vector x = Vector::Zero(3);
  for (MalaDrift drift : {MalaDrift::half_step, MalaDrift::full_step, MalaDrift::std_dev}) {
    for (int i = 0; i < 200; ++i) {
      const BaselineStep s = mala_step(UniformTarget{}, P, x, 0.01, rng, drift);
      EXPECT_TRUE(s.accepted);
      x = s.x;
    }
  }
}

TEST(Mala, FlatTargetIsUniformOnTheBox) {
  const Polytope P = make_preset(PresetKind::hypercube, 2, 0.5);
  MalaConfig cfg{0.05, 200000, 3, MalaDrift::half_step};
  std::vector<double> c0, c1;
  run_mala(UniformTarget{}, P, cfg, Vector::Zero(2), [&](std::size_t n, const Vector& x, bool) {
    if (n % 100 == 99) {
      c0.push_back(x(0));
      c1.push_back(x(1));
    }
  });
  EXPECT_GT(oracle::ks_uniform(c0, -0.5, 0.5).p_value, 0.01);
  EXPECT_GT(oracle::ks_uniform(c1, -0.5, 0.5).p_value, 0.01);
}

TEST(Mala, GaussianTargetMatchesClosedForm) {
  const Polytope P = make_preset(PresetKind::hypercube, 3, 0.5);
  const Vector mu = mu_vector(3);
  const GaussianTarget V(mu);
  MalaConfig cfg{0.05, 400000, 4, MalaDrift::std_dev};
  Vector sum = Vector::Zero(3);
  run_mala(V, P, cfg, Vector::Zero(3), [&](std::size_t, const Vector& x, bool) { sum += x; });
  const Vector mean = sum / static_cast<double>(cfg.N);
  EXPECT_LE((mean - truncated_box_gaussian_mean(mu, -0.5, 0.5)).lpNorm<Eigen::Infinity>(), 0.01);
}

TEST(Mala, RejectsBadStartAndStep) {
  const Polytope P = make_preset(PresetKind::hypercube, 2, 0.5);
  EXPECT_THROW(run_mala(UniformTarget{}, P, {0.05, 10, 0, MalaDrift::half_step}, Vector::Ones(2)), InfeasibleStart);
  EXPECT_THROW(run_mala(UniformTarget{}, P, {0.0, 10, 0, MalaDrift::half_step}, Vector::Zero(2)), std::invalid_argument);
}

TEST(Imh, FlatTargetAlwaysAccepts) {
  Rng rng(5);
  Vector x = Vector::Constant(4, 0.1);
  for (int i = 0; i < 100; ++i) {
    const BaselineStep s = imh_step(UniformTarget{}, x, rng);
    EXPECT_TRUE(s.accepted);
    x = s.x;
  }
}

TEST(Imh, GaussianAcceptanceOfOrderOneThird) {
  const GaussianTarget V(mu_vector(5));
  const double rate = run_imh(V, {100000, 6}, Vector::Constant(5, 1.0 / 6.0));
  EXPECT_NEAR(rate, 0.36, 0.10);
}

TEST(Imh, FlatTargetMeanIsCentroid) {
  const int d = 3;
  Vector sum = Vector::Zero(d);
  const std::size_t N = 100000;
  run_imh(UniformTarget{}, {N, 7}, Vector::Constant(d, 0.2), [&](std::size_t, const Vector& x, bool) { sum += x; });
  EXPECT_LE((sum / static_cast<double>(N) - Vector::Constant(d, 0.25)).lpNorm<Eigen::Infinity>(), 0.005);
}

TEST(UniformSimplex, MomentsAndSupport) {
  for (int d : {1, 2, 5}) {
    Rng rng(8 + d);
    const int n = 100000;
    Vector sum = Vector::Zero(d), sq = Vector::Zero(d);
    for (int i = 0; i < n; ++i) {
      const Vector x = sample_uniform_simplex(d, rng);
      ASSERT_TRUE((x.array() > 0.0).all());
      ASSERT_LT(x.sum(), 1.0);
      sum += x;
      sq += x.cwiseProduct(x);
    }
    const Vector mean = sum / n;
    const Vector var = sq / n - mean.cwiseProduct(mean);
    const double want_var = d / ((d + 1.0) * (d + 1.0) * (d + 2.0));
    for (int j = 0; j < d; ++j) {
      EXPECT_NEAR(mean(j), 1.0 / (d + 1), 3.0 * std::sqrt(want_var / n) + 1e-12);
      EXPECT_NEAR(var(j), want_var, 0.02 * want_var + 3.0 * want_var * std::sqrt(2.0 / n) * 3.0);
    }
  }
}

TEST(UniformSimplex, OneDimensionIsUniform) {
  Rng rng(20);
  std::vector<double> xs;
  for (int i = 0; i < 20000; ++i) xs.push_back(sample_uniform_simplex(1, rng)(0));
  EXPECT_GT(oracle::ks_uniform(xs, 0.0, 1.0).p_value, 0.01);
}
