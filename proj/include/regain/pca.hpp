// PCA by covariance eigendecomposition (cyclic Jacobi). Sizes here are tiny,
// so the simple solver wins over pulling in a linear-algebra dependency.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "regain/numerics.hpp"

namespace regain {

struct EigResult {
  Vector values;   // descending
  Matrix vectors;  // column k is the eigenvector for values[k]
};

// Symmetric eigendecomposition, cyclic Jacobi sweeps. Deterministic.
inline EigResult jacobi_eigh(Matrix s, int max_sweeps = 100) {
  require(s.rows() == s.cols(), "jacobi_eigh: matrix must be square");
  const std::size_t n = s.rows();
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += s(i, j) * s(i, j);
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) diag += s(i, i) * s(i, i);
    if (off <= 1e-30 * std::max(1e-300, diag)) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = s(p, q);
        if (apq == 0.0) continue;
        const double app = s(p, p), aqq = s(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double skp = s(k, p), skq = s(k, q);
          s(k, p) = c * skp - sn * skq;
          s(k, q) = sn * skp + c * skq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double spk = s(p, k), sqk = s(q, k);
          s(p, k) = c * spk - sn * sqk;
          s(q, k) = sn * spk + c * sqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s(a, a) > s(b, b); });
  EigResult r;
  r.values.resize(n);
  r.vectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    r.values[k] = s(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) r.vectors(i, k) = v(i, order[k]);
  }
  return r;
}

struct PcaBasis {
  Vector mean;
  Matrix components;  // k rows, each an orthonormal direction in R^d
  Vector explained_variance_ratio;
  Vector eigenvalues;  // top k

  std::size_t n_components() const { return components.rows(); }
  std::size_t dim() const { return components.cols(); }

  Vector project(std::span<const double> x) const {
    require(x.size() == dim(), "PcaBasis::project: dimension mismatch");
    Vector centered(x.begin(), x.end());
    for (std::size_t i = 0; i < centered.size(); ++i) centered[i] -= mean[i];
    Vector z(n_components());
    gemv(components, centered, z);
    return z;
  }

  Vector reconstruct(std::span<const double> z) const {
    require(z.size() == n_components(), "PcaBasis::reconstruct: dimension mismatch");
    Vector x = mean;
    gemv_t(components, z, x, 1.0);
    return x;
  }

  // squared norm of the residual after projection onto the affine subspace
  double residual_sq(std::span<const double> x) const {
    const Vector z = project(x);
    const Vector r = reconstruct(z);
    double s = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double d = x[i] - r[i];
      s += d * d;
    }
    return s;
  }
};

inline PcaBasis pca_fit(const std::vector<Vector>& samples, std::size_t n_components) {
  require(n_components >= 1, "pca_fit: n_components must be >= 1");
  require(samples.size() >= n_components + 1,
          "pca_fit: need at least n_components + 1 samples");
  const std::size_t d = samples[0].size();
  require(n_components <= d, "pca_fit: n_components exceeds dimension");
  for (const auto& s : samples)
    require(s.size() == d, "pca_fit: inconsistent sample dimensions");

  Vector mean(d, 0.0);
  for (const auto& s : samples) axpy(1.0, s, mean);
  for (auto& v : mean) v /= static_cast<double>(samples.size());

  Matrix cov(d, d);
  for (const auto& s : samples) {
    Vector c(d);
    for (std::size_t i = 0; i < d; ++i) c[i] = s[i] - mean[i];
    ger(cov, c, c);
  }
  const double denom = static_cast<double>(samples.size() - 1);
  for (std::size_t i = 0; i < cov.size(); ++i) cov.data()[i] /= denom;

  EigResult eig = jacobi_eigh(cov);
  double total = 0.0;
  for (double v : eig.values) total += std::max(v, 0.0);
  const double tol = std::max(1e-12 * std::max(eig.values[0], 0.0), 1e-300);
  std::size_t rank = 0;
  while (rank < d && eig.values[rank] > tol) ++rank;
  if (rank < n_components)
    throw std::invalid_argument("pca_fit: data rank " + std::to_string(rank) +
                                " is below the requested " + std::to_string(n_components) +
                                " components");

  PcaBasis basis;
  basis.mean = std::move(mean);
  basis.components = Matrix(n_components, d);
  basis.eigenvalues.resize(n_components);
  basis.explained_variance_ratio.resize(n_components);
  for (std::size_t k = 0; k < n_components; ++k) {
    basis.eigenvalues[k] = eig.values[k];
    basis.explained_variance_ratio[k] = eig.values[k] / total;
    // sign convention: largest-magnitude entry positive
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::fabs(eig.vectors(i, k)) > std::fabs(eig.vectors(arg, k))) arg = i;
    const double sgn = eig.vectors(arg, k) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < d; ++i) basis.components(k, i) = sgn * eig.vectors(i, k);
  }
  return basis;
}

}  // namespace regain
