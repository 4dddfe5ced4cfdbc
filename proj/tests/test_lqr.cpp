#include <gtest/gtest.h>

#include <cmath>

#include "regain/lqr.hpp"
#include "regain/rng.hpp"

using namespace regain;

namespace {

double dare_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                     const Matrix& P) {
  const Matrix At = transpose(A), Bt = transpose(B);
  const Matrix PA = matmul(P, A), PB = matmul(P, B);
  Matrix G = add(R, matmul(Bt, PB));
  const Matrix K = lu_solve(G, matmul(Bt, PA));
  const Matrix rhs = add(Q, sub(matmul(At, PA), matmul(matmul(At, PB), K)));
  return frobenius_norm(sub(rhs, P));
}

}  // namespace

TEST(Dare, ScalarGoldenRatioPlant) {
  // A=B=Q=R=1: P solves P^2 - P - 1 = 0, so P = (1+sqrt(5))/2, K = P/(1+P)
  Matrix one(1, 1, 1.0);
  DareResult r = solve_dare(one, one, one, one, 1e-12);
  EXPECT_NEAR(r.P(0, 0), 1.6180339887498949, 1e-9);
  EXPECT_NEAR(r.K(0, 0), 0.61803398874989485, 1e-9);
  EXPECT_LT(dare_residual(one, one, one, one, r.P), 1e-9);
}

TEST(Dare, DeadbeatScalarPlant) {
  // A=0: the state dies in one step; P=Q, K=0
  Matrix A(1, 1, 0.0), one(1, 1, 1.0);
  DareResult r = solve_dare(A, one, one, one);
  EXPECT_DOUBLE_EQ(r.P(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.K(0, 0), 0.0);
}

TEST(Dare, BlockDiagonalEqualsPerAxisScalarSolves) {
  const double rr = 10.0;
  LqrPlant plant = make_integrator_plant(3, rr, Vector(3, 1e9), Vector(3, 0.0));
  Matrix one(1, 1, 1.0), R1(1, 1, rr);
  DareResult scalar = solve_dare(one, one, one, R1);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(plant.P(i, i), scalar.P(0, 0), 1e-10);
    EXPECT_NEAR(plant.K(i, i), scalar.K(0, 0), 1e-10);
    for (std::size_t j = 0; j < 3; ++j) {
      if (i == j) continue;
      EXPECT_NEAR(plant.P(i, j), 0.0, 1e-10);
      EXPECT_NEAR(plant.K(i, j), 0.0, 1e-10);
    }
  }
}

TEST(Dare, NonConvergenceThrowsWithResidual) {
  Matrix one(1, 1, 1.0);
  try {
    solve_dare(one, one, one, one, 1e-12, 3);
    FAIL() << "expected throw";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("residual"), std::string::npos);
  }
}

TEST(LqrCommand, ZeroAtTarget) {
  LqrPlant plant = make_integrator_plant(3, 1.0, Vector(3, 0.5), {0.1, -0.2, 0.3});
  Vector u = lqr_command(plant, Vector{0.1, -0.2, 0.3});
  for (double v : u) EXPECT_DOUBLE_EQ(v, 0.0);
}

TEST(LqrCommand, GoldenRatioGain) {
  LqrPlant plant = make_integrator_plant(1, 1.0, Vector{1e9}, Vector{0.0});
  Vector u = lqr_command(plant, Vector{1.0});
  EXPECT_NEAR(u[0], -0.61803398874989485, 1e-9);
}

TEST(LqrCommand, ClampSaturatesExactly) {
  LqrPlant plant = make_integrator_plant(1, 1.0, Vector{0.1}, Vector{0.0});
  Vector u = lqr_command(plant, Vector{10.0});
  EXPECT_DOUBLE_EQ(u[0], -0.1);
}

TEST(LqrCommand, ClampPreservesPerJointDirection) {
  LqrPlant plant = make_integrator_plant(2, 5.0, Vector{0.05, 0.05}, Vector(2, 0.0));
  Vector u = lqr_command(plant, Vector{3.0, -0.001});
  EXPECT_LT(u[0], 0.0);
  EXPECT_GT(u[1], 0.0);
}

TEST(LqrCommand, UnsolvedPlantThrows) {
  LqrPlant plant;
  plant.target = Vector(2, 0.0);
  EXPECT_THROW(lqr_command(plant, Vector(2, 1.0)), std::runtime_error);
}

TEST(ClosedLoop, LyapunovDecreaseAndConvergence) {
  LqrPlant plant = make_integrator_plant(3, 10.0, Vector(3, 0.1), {0.5, -0.3, 0.2});
  SeededRng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    Vector m(3);
    for (auto& v : m) v = rng.uniform(-2.0, 2.0);
    double lyap = p_weighted_sq(plant, m);
    for (int step = 0; step < 500; ++step) {
      const Vector u = lqr_command(plant, m);
      for (std::size_t i = 0; i < 3; ++i) m[i] += u[i];
      const double next = p_weighted_sq(plant, m);
      if (next < 1e-20) break;
      EXPECT_LT(next, lyap + 1e-15) << "trial " << trial << " step " << step;
      lyap = next;
    }
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(m[i], plant.target[i], 1e-6);
  }
}
