#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "bhmc/barrier.hpp"
#include "support/oracles.hpp"

using namespace bhmc;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

}  // namespace

TEST(Preset, HypercubeRowsAndOffsets) {
  const Polytope P = make_preset(PresetKind::hypercube, 2, 0.5);
  ASSERT_EQ(P.m(), 4);
  ASSERT_EQ(P.d(), 2);
  Matrix A(4, 2);
  A << 1, 0, 0, 1, -1, 0, 0, -1;
  EXPECT_EQ(P.A(), A);
  EXPECT_EQ(P.b(), Vector::Constant(4, 0.5));
}

TEST(Preset, SimplexConstraints) {
  const Polytope P = make_preset(PresetKind::simplex, 2);
  ASSERT_EQ(P.m(), 3);
  Matrix A(3, 2);
  A << -1, 0, 0, -1, 1, 1;
  EXPECT_EQ(P.A(), A);
  EXPECT_EQ(P.b(), vec({0, 0, 1}));
}

TEST(Preset, MembershipIsStrict) {
  const Polytope P = make_preset(PresetKind::hypercube, 5, 0.5);
  EXPECT_TRUE(P.contains(Vector::Zero(5)));
  Vector face = Vector::Zero(5);
  face(0) = 0.5;
  EXPECT_FALSE(P.contains(face));
}

TEST(Preset, RejectsBadArguments) {
  EXPECT_THROW(make_preset(PresetKind::hypercube, 0), std::invalid_argument);
  EXPECT_THROW(make_preset(PresetKind::hypercube, 2, 0.0), std::invalid_argument);
  EXPECT_EQ(parse_preset("simplex"), PresetKind::simplex);
  EXPECT_FALSE(parse_preset("cube").has_value());
}

TEST(PolytopeValidation, RejectsRankDeficientAndMismatched) {
  Matrix A(2, 2);
  A << 1, 1, -1, -1;
  EXPECT_THROW(Polytope(A, Vector::Ones(2)), InvalidPolytope);
  EXPECT_THROW(Polytope(Matrix::Identity(2, 2), Vector::Ones(3)), InvalidPolytope);
  Matrix tall(1, 2);
  tall << 1, 0;
  EXPECT_THROW(Polytope(tall, Vector::Ones(1)), InvalidPolytope);
}

TEST(PolytopeJson, RoundTripThroughFile) {
  const Polytope P = make_preset(PresetKind::simplex, 3);
  const auto path = std::filesystem::temp_directory_path() / "bhmc_polytope_roundtrip.json";
  {
    std::ofstream out(path);
    out << P.to_json().dump();
  }
  const Polytope Q = Polytope::load(path);
  EXPECT_EQ(Q.A(), P.A());
  EXPECT_EQ(Q.b(), P.b());
  std::filesystem::remove(path);

  nlohmann::json bad = P.to_json();
  bad["m"] = 7;
  EXPECT_THROW(Polytope::from_json(bad), InvalidPolytope);
}

TEST(Slack, Examples) {
  const Polytope cube = make_preset(PresetKind::hypercube, 2, 0.5);
  EXPECT_EQ(slack(cube, Vector::Zero(2)), Vector::Constant(4, 0.5));
  EXPECT_EQ(slack(cube, vec({0.5, 0}))(0), 0.0);
  const Polytope tri = make_preset(PresetKind::simplex, 2);
  EXPECT_TRUE(slack(tri, vec({0.25, 0.25})).isApprox(vec({0.25, 0.25, 0.5})));
}

TEST(MetricStateTest, BoxCenter) {
  const MetricState ms = metric_state(make_preset(PresetKind::hypercube, 2, 0.5), Vector::Zero(2));
  EXPECT_TRUE(ms.g.isApprox(8.0 * Matrix::Identity(2, 2)));
  EXPECT_NEAR(ms.logdet, 2.0 * std::log(8.0), 1e-12);
  EXPECT_NEAR(ms.logdet, 4.15888, 1e-5);
  EXPECT_NEAR(ms.logdet, 2.0 * ms.chol.diagonal().array().log().sum(), 1e-12);
}

TEST(MetricStateTest, HalfLine) {
  const MetricState ms = metric_state(oracle::half_line(), vec({-1}));
  EXPECT_DOUBLE_EQ(ms.g(0, 0), 1.0);
}

TEST(MetricStateTest, InfeasibleReportsConstraint) {
  const Polytope P = make_preset(PresetKind::hypercube, 2, 0.5);
  try {
    metric_state(P, vec({0.1, -0.5}));
    FAIL() << "expected InfeasiblePoint";
  } catch (const InfeasiblePoint& e) {
    EXPECT_EQ(e.constraint(), 3);
  }
  EXPECT_THROW(barrier_value(P, vec({0.7, 0})), InfeasiblePoint);
  EXPECT_THROW(barrier_gradient(P, vec({0.7, 0})), InfeasiblePoint);
  EXPECT_FALSE(try_metric_state(P, vec({0.7, 0})).has_value());
  EXPECT_FALSE(try_metric_state(P, vec({NAN, 0})).has_value());
}

TEST(MetricStateTest, MatchesHessianByFiniteDifferences) {
  const Polytope P = make_preset(PresetKind::hypercube, 5, 0.5);
  Rng rng(11);
  for (int t = 0; t < 100; ++t) {
    const Vector x = oracle::uniform_box(5, 0.5, rng);
    const double eps = 1e-4 * slack(P, x).minCoeff();
    const Matrix H = oracle::fd_jacobian([&](const Vector& y) { return barrier_gradient(P, y); }, x, eps);
    EXPECT_LE(oracle::rel_err(metric_state(P, x).g, H), 1e-5);
  }
}

TEST(Barrier, ValueAndGradientExamples) {
  const Polytope cube = make_preset(PresetKind::hypercube, 2, 0.5);
  EXPECT_NEAR(barrier_value(cube, Vector::Zero(2)), 4.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(barrier_value(cube, Vector::Zero(2)), 2.77259, 1e-5);
  EXPECT_EQ(barrier_gradient(cube, Vector::Zero(2)), Vector::Zero(2));

  const Polytope line = oracle::half_line();
  EXPECT_DOUBLE_EQ(barrier_value(line, vec({-1})), 0.0);
  EXPECT_DOUBLE_EQ(barrier_gradient(line, vec({-1}))(0), 1.0);
}

TEST(Barrier, GradientMatchesFiniteDifferences) {
  const Polytope P = make_preset(PresetKind::hypercube, 5, 0.5);
  Rng rng(12);
  for (int t = 0; t < 50; ++t) {
    const Vector x = oracle::uniform_box(5, 0.5, rng);
    const double eps = 1e-4 * slack(P, x).minCoeff();
    const Vector fd = oracle::fd_gradient([&](const Vector& y) { return barrier_value(P, y); }, x, eps);
    EXPECT_LE(oracle::rel_err(barrier_gradient(P, x), fd), 1e-6);
  }
}

TEST(DirDeriv, Examples) {
  const Polytope cube = make_preset(PresetKind::hypercube, 2, 0.5);
  const MetricState ms = metric_state(cube, Vector::Zero(2));
  EXPECT_NEAR(metric_dirderiv(cube, ms, vec({0.3, -1}), vec({2, 0.7})).norm(), 0.0, 1e-12);

  const Polytope line = oracle::half_line();
  const MetricState ml = metric_state(line, vec({-1}));
  EXPECT_DOUBLE_EQ(metric_dirderiv(line, ml, vec({1}), vec({1}))(0), 2.0);
}

TEST(DirDeriv, MatchesFiniteDifferencesOfMetric) {
  const Polytope P = make_preset(PresetKind::hypercube, 5, 0.5);
  Rng rng(13);
  for (int t = 0; t < 50; ++t) {
    const Vector x = oracle::uniform_box(5, 0.5, rng);
    const Vector u = rng.normal_vector(5), v = rng.normal_vector(5);
    const double eps = 1e-4 * slack(P, x).minCoeff();
    const Matrix J = oracle::fd_jacobian([&](const Vector& y) -> Vector { return metric_state(P, y).g * u; }, x, eps);
    EXPECT_LE(oracle::rel_err(metric_dirderiv(P, metric_state(P, x), u, v), J * v), 1e-5);
  }
}

TEST(DirDeriv, SymmetricAndBilinear) {
  const Polytope P = make_preset(PresetKind::simplex, 4);
  Rng rng(14);
  for (int t = 0; t < 20; ++t) {
    const MetricState ms = metric_state(P, oracle::uniform_simplex_sorted(4, rng) * 0.9 + Vector::Constant(4, 0.02));
    const Vector u = rng.normal_vector(4), v = rng.normal_vector(4);
    const Vector uv = metric_dirderiv(P, ms, u, v);
    EXPECT_LE((uv - metric_dirderiv(P, ms, v, u)).norm(), 1e-12 * (1.0 + uv.norm()));
    EXPECT_LE((metric_dirderiv(P, ms, 3.0 * u, v) - 3.0 * uv).norm(), 1e-12 * (1.0 + uv.norm()));
  }
}

TEST(TraceTerm, Examples) {
  const Polytope cube = make_preset(PresetKind::hypercube, 2, 0.5);
  EXPECT_NEAR(trace_term(cube, metric_state(cube, Vector::Zero(2))).norm(), 0.0, 1e-12);
  const Polytope line = oracle::half_line();
  EXPECT_NEAR(trace_term(line, metric_state(line, vec({-1})))(0), 2.0, 1e-12);
}

TEST(TraceTerm, IsGradientOfLogdet) {
  for (const Polytope& P : {make_preset(PresetKind::hypercube, 5, 0.5), make_preset(PresetKind::simplex, 5)}) {
    Rng rng(15);
    for (int t = 0; t < 50; ++t) {
      const Vector x = P.preset() == PresetKind::simplex ? oracle::uniform_simplex_sorted(5, rng)
                                                         : oracle::uniform_box(5, 0.5, rng);
      const double eps = 1e-4 * slack(P, x).minCoeff();
      const Vector fd = oracle::fd_gradient([&](const Vector& y) { return metric_state(P, y).logdet; }, x, eps);
      EXPECT_LE(oracle::rel_err(trace_term(P, metric_state(P, x)), fd), 1e-6);
    }
  }
}

TEST(LocalNorms, Examples) {
  const MetricState ms = metric_state(make_preset(PresetKind::hypercube, 2, 0.5), Vector::Zero(2));
  const LocalNorms n = local_norms(ms, vec({1, 0}), vec({1, 0}));
  EXPECT_NEAR(n.primal, std::sqrt(8.0), 1e-12);
  EXPECT_NEAR(n.dual, 1.0 / std::sqrt(8.0), 1e-12);
  const LocalNorms z = local_norms(ms, Vector::Zero(2), Vector::Zero(2));
  EXPECT_EQ(z.primal, 0.0);
  EXPECT_EQ(z.dual, 0.0);
}

TEST(LocalNorms, CauchySchwarz) {
  const Polytope P = make_preset(PresetKind::simplex, 5);
  Rng rng(16);
  for (int t = 0; t < 100; ++t) {
    const MetricState ms = metric_state(P, oracle::uniform_simplex_sorted(5, rng));
    const Vector v = rng.normal_vector(5);
    EXPECT_GE(primal_norm(ms, v) * dual_norm(ms, v), v.squaredNorm() * (1.0 - 1e-12));
  }
}

TEST(SelfConcordance, ThirdDerivativeAndParameterBounds) {
  for (const Polytope& P : {make_preset(PresetKind::hypercube, 5, 0.5), make_preset(PresetKind::simplex, 5)}) {
    Rng rng(17);
    const double nu = static_cast<double>(P.m());
    for (int t = 0; t < 500; ++t) {
      const Vector x = P.preset() == PresetKind::simplex ? oracle::uniform_simplex_sorted(5, rng)
                                                         : oracle::uniform_box(5, 0.5, rng);
      const Vector h = rng.normal_vector(5);
      const MetricState ms = metric_state(P, x);
      const double hn = primal_norm(ms, h);
      const double d3 = std::abs(h.dot(metric_dirderiv(P, ms, h, h)));
      EXPECT_LE(d3, 2.0 * hn * hn * hn * (1.0 + 1e-9) + 1e-9);
      EXPECT_LE(std::pow(barrier_gradient(P, x).dot(h), 2), nu * hn * hn * (1.0 + 1e-9) + 1e-9);
    }
  }
}

TEST(SelfConcordance, DikinEllipsoidStaysInside) {
  const Polytope P = make_preset(PresetKind::simplex, 5);
  Rng rng(18);
  for (int t = 0; t < 1000; ++t) {
    const Vector x = oracle::uniform_simplex_sorted(5, rng);
    Vector u = rng.normal_vector(5);
    u *= 0.999 / primal_norm(metric_state(P, x), u);
    EXPECT_TRUE(P.contains(x + u));
  }
}

TEST(SelfConcordance, MetricStaysPositiveDefinite) {
  const Polytope P = make_preset(PresetKind::hypercube, 3, 0.5);
  Rng rng(19);
  double smallest = INFINITY;
  for (int t = 0; t < 1000; ++t) {
    const MetricState ms = metric_state(P, oracle::uniform_box(3, 0.5, rng));
    smallest = std::min(smallest, ms.chol.diagonal().array().square().minCoeff());
  }
  // On [-w, w]^d each diagonal entry of g is at least 2 / w^2.
  EXPECT_GE(smallest, 8.0 * (1.0 - 1e-12));
}

TEST(AnalyticCenter, Presets) {
  EXPECT_EQ(analytic_center(make_preset(PresetKind::hypercube, 5, 0.5)), Vector::Zero(5));
  EXPECT_TRUE(analytic_center(make_preset(PresetKind::simplex, 2)).isApprox(Vector::Constant(2, 1.0 / 3.0)));
}

TEST(AnalyticCenter, RandomPolytopesSatisfyNewtonCriterion) {
  Rng rng(20);
  for (int t = 0; t < 20; ++t) {
    const Polytope P = oracle::random_polytope(4, 6, rng);
    const Vector c = analytic_center(P);
    ASSERT_TRUE(P.contains(c));
    EXPECT_LE(dual_norm(metric_state(P, c), barrier_gradient(P, c)), 1e-8);
  }
}

TEST(AnalyticCenter, ShiftedPolytopeNeedsPhaseOne) {
  // The origin is outside this box, so the solver has to find a start.
  Matrix A(4, 2);
  A << 1, 0, 0, 1, -1, 0, 0, -1;
  const Polytope P(A, vec({4, 3, -2, -1}));
  const Vector c = analytic_center(P);
  EXPECT_TRUE(c.isApprox(vec({3, 2}), 1e-8));
}

TEST(AnalyticCenter, UnboundedThrows) {
  Matrix A(2, 2);
  A << 1, 0, 0, 1;
  EXPECT_THROW(analytic_center(Polytope(A, Vector::Ones(2))), NoConvergence);
}
