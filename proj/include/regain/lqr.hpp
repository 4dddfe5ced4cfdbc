// Discrete-time LQR used as the recovery controller: drives the joints
// linearly back to the shared initial posture, with per-joint output clamping
// so commands stay inside the network's scaling range.
#pragma once

#include <cmath>

#include "regain/numerics.hpp"

namespace regain {

struct LqrPlant {
  Matrix A, B;  // state / input matrices
  Matrix Q, R;  // cost weights
  Matrix P, K;  // cost-to-go and gain, populated by solve_dare
  Vector u_max;   // per-channel command clamp (absolute value)
  Vector target;  // convergence target m*
  bool solved = false;
};

struct DareResult {
  Matrix P, K;
  double residual = 0.0;
  int iterations = 0;
};

// Fixed-point iteration from P = Q:
//   P <- Q + A'PA - A'PB (R + B'PB)^-1 B'PA
// Converged when the DARE residual has Frobenius norm below tol.
inline DareResult solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q,
                             const Matrix& R, double tol = 1e-10, int max_iter = 100000) {
  require(A.rows() == A.cols(), "solve_dare: A must be square");
  require(B.rows() == A.rows(), "solve_dare: B row mismatch");
  require(Q.rows() == A.rows() && Q.cols() == A.cols(), "solve_dare: Q shape mismatch");
  require(R.rows() == B.cols() && R.cols() == B.cols(), "solve_dare: R shape mismatch");

  const Matrix At = transpose(A);
  const Matrix Bt = transpose(B);
  Matrix P = Q;
  double residual = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    const Matrix PA = matmul(P, A);
    const Matrix PB = matmul(P, B);
    Matrix G = add(R, matmul(Bt, PB));          // R + B'PB
    const Matrix BtPA = matmul(Bt, PA);          // B'PA
    const Matrix Kit = lu_solve(G, BtPA);        // (R + B'PB)^-1 B'PA
    Matrix next = add(Q, sub(matmul(At, PA), matmul(matmul(At, PB), Kit)));
    residual = frobenius_norm(sub(next, P));
    P = std::move(next);
    if (residual < tol) {
      // recompute the gain at the converged P
      const Matrix PA2 = matmul(P, A);
      const Matrix PB2 = matmul(P, B);
      Matrix G2 = add(R, matmul(Bt, PB2));
      DareResult r;
      r.K = lu_solve(G2, matmul(Bt, PA2));
      r.P = std::move(P);
      r.residual = residual;
      r.iterations = it;
      return r;
    }
  }
  throw std::runtime_error("solve_dare: no convergence after " + std::to_string(max_iter) +
                           " iterations, last residual " + std::to_string(residual));
}

// Per-joint integrator plant x_{t+1} = x_t + u_t with Q = I, R = r*I.
inline LqrPlant make_integrator_plant(std::size_t n, double r, const Vector& u_max,
                                      const Vector& target, double tol = 1e-10) {
  require(n >= 1, "make_integrator_plant: need at least one joint");
  require(u_max.size() == n && target.size() == n, "make_integrator_plant: size mismatch");
  require(r > 0.0, "make_integrator_plant: R must be positive definite");
  LqrPlant plant;
  plant.A = Matrix::identity(n);
  plant.B = Matrix::identity(n);
  plant.Q = Matrix::identity(n);
  plant.R = Matrix::identity(n);
  for (std::size_t i = 0; i < n; ++i) plant.R(i, i) = r;
  const DareResult res = solve_dare(plant.A, plant.B, plant.Q, plant.R, tol);
  plant.P = res.P;
  plant.K = res.K;
  plant.u_max = u_max;
  plant.target = target;
  plant.solved = true;
  return plant;
}

// dm_L = clamp(-K (m - m*), +-u_max) per joint
inline Vector lqr_command(const LqrPlant& plant, std::span<const double> m) {
  if (!plant.solved) throw std::runtime_error("lqr_command: plant not solved");
  require(m.size() == plant.target.size(), "lqr_command: state dimension mismatch");
  Vector err(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) err[i] = m[i] - plant.target[i];
  Vector u(m.size());
  gemv(plant.K, err, u);
  for (std::size_t i = 0; i < u.size(); ++i)
    u[i] = clamp(-u[i], -plant.u_max[i], plant.u_max[i]);
  return u;
}

// x' P x, the Lyapunov function of the closed loop
inline double p_weighted_sq(const LqrPlant& plant, std::span<const double> m) {
  Vector err(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) err[i] = m[i] - plant.target[i];
  Vector pe(m.size());
  gemv(plant.P, err, pe);
  return dot(err, pe);
}

}  // namespace regain
