#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "regain/numerics.hpp"
#include "regain/optim.hpp"
#include "regain/pca.hpp"
#include "regain/rng.hpp"

using namespace regain;

TEST(Matrix, RejectsZeroDimensions) {
  EXPECT_THROW(Matrix(0, 3), std::invalid_argument);
  EXPECT_THROW(Matrix(3, 0), std::invalid_argument);
}

TEST(Matrix, ShapeMismatchesThrow) {
  Matrix a(2, 3);
  Vector x(2, 1.0), y(2, 0.0);
  EXPECT_THROW(gemv(a, x, y), std::invalid_argument);
  Matrix b(2, 2);
  EXPECT_THROW(matmul(a, b), std::invalid_argument);
  EXPECT_THROW(add(a, b), std::invalid_argument);
}

TEST(Matrix, LuSolveRoundTrip) {
  SeededRng rng(7);
  Matrix a(4, 4);
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(-1, 1);
  for (std::size_t i = 0; i < 4; ++i) a(i, i) += 3.0;  // well conditioned
  Matrix x(4, 2);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
  Matrix b = matmul(a, x);
  Matrix got = lu_solve(a, b);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(got.data()[i], x.data()[i], 1e-12);
}

TEST(Adam, FirstStepMatchesSignScaledRate) {
  // first step, p = 1.0, g = +2.0, defaults: p' = 1 - 0.001 * 2/(2 + eps)
  double p = 1.0, g = 2.0;
  AdamState st;
  adam_step({{"p", &p, 1}}, {{"g", &g, 1}}, st);
  EXPECT_NEAR(p, 1.0 - 0.001 * (2.0 / (2.0 + 1e-8)), 1e-15);
  EXPECT_NEAR(p, 0.999, 1e-8);
}

TEST(Adam, ZeroGradientFromFreshStateIsIdentity) {
  Vector p = {0.3, -1.2, 5.0};
  Vector g = {0.0, 0.0, 0.0};
  AdamState st;
  adam_step({{"p", p.data(), p.size()}}, {{"g", g.data(), g.size()}}, st);
  EXPECT_EQ(p[0], 0.3);
  EXPECT_EQ(p[1], -1.2);
  EXPECT_EQ(p[2], 5.0);
  for (double m : st.m[0]) EXPECT_EQ(m, 0.0);
}

// Independent oracle: the textbook Adam recursion written out step by step on a
// scalar quadratic, with every intermediate held in explicit locals.
TEST(Adam, ThreeStepTraceMatchesHandRolledRecursion) {
  const double lr = 0.001, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double p_ref = 1.5, m_ref = 0.0, v_ref = 0.0;
  double p = 1.5;
  AdamState st;
  for (int t = 1; t <= 3; ++t) {
    const double g_ref = 2.0 * (p_ref - 0.25);  // d/dp (p - 0.25)^2
    m_ref = b1 * m_ref + (1 - b1) * g_ref;
    v_ref = b2 * v_ref + (1 - b2) * g_ref * g_ref;
    const double mhat = m_ref / (1 - std::pow(b1, t));
    const double vhat = v_ref / (1 - std::pow(b2, t));
    p_ref -= lr * mhat / (std::sqrt(vhat) + eps);

    double g = 2.0 * (p - 0.25);
    adam_step({{"p", &p, 1}}, {{"g", &g, 1}}, st);
    EXPECT_NEAR(p, p_ref, 1e-12) << "step " << t;
  }
}

TEST(Adam, NonFiniteGradientNamesBlock) {
  double p = 1.0, g = std::nan("");
  AdamState st;
  try {
    adam_step({{"weights", &p, 1}}, {{"weights", &g, 1}}, st);
    FAIL() << "expected throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("weights"), std::string::npos);
  }
}

TEST(Adam, DeterministicGivenInputs) {
  auto run = [] {
    Vector p = {1.0, -2.0};
    AdamState st;
    for (int t = 0; t < 5; ++t) {
      Vector g = {p[0] * 0.5, p[1] * p[1]};
      adam_step({{"p", p.data(), 2}}, {{"g", g.data(), 2}}, st);
    }
    return p;
  };
  Vector a = run(), b = run();
  EXPECT_EQ(a[0], b[0]);
  EXPECT_EQ(a[1], b[1]);
}

TEST(FiniteDifference, QuadraticAtThree) {
  double p = 3.0;
  auto loss = [&p] { return p * p; };
  auto g = finite_difference_gradient(loss, {{"p", &p, 1}}, 1e-5);
  EXPECT_NEAR(g[0][0], 6.0, 1e-6);
  EXPECT_EQ(p, 3.0);  // restored exactly
}

TEST(FiniteDifference, ConstantLossGivesZero) {
  Vector p = {1.0, 2.0, 3.0};
  auto loss = [] { return 42.0; };
  auto g = finite_difference_gradient(loss, {{"p", p.data(), 3}}, 1e-5);
  for (double v : g[0]) EXPECT_EQ(v, 0.0);
}

TEST(FiniteDifference, SecondOrderAccurateOnCubic) {
  // central differences have O(h^2) error; on p^3 the leading term is exactly h^2
  double p = 1.5;
  auto loss = [&p] { return p * p * p; };
  auto g = finite_difference_gradient(loss, {{"p", &p, 1}}, 1e-4);
  EXPECT_NEAR(g[0][0], 3.0 * 1.5 * 1.5, 1e-7);
}

TEST(FiniteDifference, NonFiniteLossThrows) {
  double p = 1.0;
  auto loss = [&p] { return std::log(p - 10.0); };  // NaN at p=1
  EXPECT_THROW(finite_difference_gradient(loss, {{"p", &p, 1}}, 1e-5), std::runtime_error);
}

TEST(Sigmoid, Values) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(800.0), 1.0, 1e-15);
  EXPECT_NEAR(sigmoid(2.1), 0.890903, 1e-6);
  EXPECT_GT(sigmoid(0.2), sigmoid(0.1));
}

TEST(Pca, LineInThreeDimensions) {
  std::vector<Vector> samples;
  for (int i = 0; i < 8; ++i) {
    const double t = 0.25 * i - 1.0;
    samples.push_back({1.0 + 2.0 * t, -0.5 * t, 3.0 * t});
  }
  PcaBasis basis = pca_fit(samples, 1);
  EXPECT_NEAR(basis.explained_variance_ratio[0], 1.0, 1e-9);
  for (const auto& s : samples) EXPECT_NEAR(basis.residual_sq(s), 0.0, 1e-18);
}

TEST(Pca, IdenticalSamplesIsZeroVarianceError) {
  std::vector<Vector> samples(5, Vector{1.0, 2.0, 3.0});
  EXPECT_THROW(pca_fit(samples, 1), std::invalid_argument);
}

TEST(Pca, RankDeficiencyReportsAchievableRank) {
  // rank-2 data in 4-D, ask for 3 components
  SeededRng rng(3);
  std::vector<Vector> samples;
  for (int i = 0; i < 30; ++i) {
    const double a = rng.normal(), b = rng.normal();
    samples.push_back({a, b, a + b, a - b});
  }
  try {
    pca_fit(samples, 3);
    FAIL() << "expected throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("rank 2"), std::string::npos);
  }
}

TEST(Pca, TooFewSamplesThrows) {
  std::vector<Vector> samples = {{1.0, 0.0}, {0.0, 1.0}};
  EXPECT_THROW(pca_fit(samples, 2), std::invalid_argument);
}

TEST(Pca, ComponentsOrthonormal) {
  SeededRng rng(11);
  std::vector<Vector> samples;
  for (int i = 0; i < 60; ++i) {
    Vector s(5);
    for (auto& v : s) v = rng.normal();
    samples.push_back(s);
  }
  PcaBasis basis = pca_fit(samples, 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      const double expect = a == b ? 1.0 : 0.0;
      EXPECT_NEAR(dot(basis.components.row_span(a), basis.components.row_span(b)), expect,
                  1e-10);
    }
  for (std::size_t k = 1; k < 3; ++k)
    EXPECT_LE(basis.explained_variance_ratio[k], basis.explained_variance_ratio[k - 1]);
  double total = 0.0;
  for (double r : basis.explained_variance_ratio) total += r;
  EXPECT_LE(total, 1.0 + 1e-12);
}

// Oracle: brute-force covariance eigendecomposition via Eigen. The mean
// reconstruction residual from k components must equal the sum of the
// discarded eigenvalues (up to the 1/(n-1) sampling convention).
TEST(Pca, GaussianCloudResidualMatchesEigenOracle) {
  SeededRng rng(42);
  const int n = 200, d = 5, k = 2;
  std::vector<Vector> samples;
  for (int i = 0; i < n; ++i) {
    Vector s(d);
    s[0] = rng.normal(0, 2.0);
    s[1] = rng.normal(1.0, 1.2);
    s[2] = 0.5 * s[0] + rng.normal(0, 0.7);
    s[3] = rng.normal(-2.0, 0.4);
    s[4] = s[1] - 0.3 * s[3] + rng.normal(0, 0.2);
    samples.push_back(s);
  }

  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = samples[i][j];
  Eigen::RowVectorXd mu = X.colwise().mean();
  Eigen::MatrixXd C = (X.rowwise() - mu).transpose() * (X.rowwise() - mu) / double(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(C);
  Eigen::VectorXd ev = eig.eigenvalues();  // ascending
  double discarded = 0.0;
  for (int j = 0; j < d - k; ++j) discarded += ev(j);

  PcaBasis basis = pca_fit(samples, k);
  double mean_residual = 0.0;
  for (const auto& s : samples) mean_residual += basis.residual_sq(s);
  mean_residual /= double(n - 1);
  EXPECT_NEAR(mean_residual, discarded, 1e-9);

  // eigenvalues agree with the oracle too
  EXPECT_NEAR(basis.eigenvalues[0], ev(d - 1), 1e-9);
  EXPECT_NEAR(basis.eigenvalues[1], ev(d - 2), 1e-9);
}

TEST(Rng, EqualSeedsGiveBitIdenticalStreams) {
  SeededRng a(123456), b(123456);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
  SeededRng c(9), d(9);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_EQ(c.uniform(-2, 2), d.uniform(-2, 2));
    EXPECT_EQ(c.normal(), d.normal());
  }
}

TEST(Rng, ChildStreamsAreDistinctButDeterministic) {
  SeededRng root(5);
  SeededRng c1 = root.child(1), c2 = root.child(2), c1b = SeededRng(5).child(1);
  EXPECT_NE(c1.next_u64(), c2.next_u64());
  EXPECT_EQ(SeededRng(5).child(1).next_u64(), c1b.next_u64());
}

TEST(Rng, UniformInRange) {
  SeededRng rng(77);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.uniform(-0.5, 1.5);
    EXPECT_GE(v, -0.5);
    EXPECT_LT(v, 1.5);
  }
}

TEST(Rng, ShuffleIsSeedDeterministic) {
  std::vector<int> a = {1, 2, 3, 4, 5, 6, 7, 8}, b = a;
  SeededRng r1(3), r2(3);
  r1.shuffle(a);
  r2.shuffle(b);
  EXPECT_EQ(a, b);
}
