// Dense matrix/vector substrate. Row-major, 64-bit floats throughout; shape
// mismatches throw, nothing broadcasts silently.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace regain {

using Vector = std::vector<double>;

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(rows * cols, fill) {
    require(rows > 0 && cols > 0, "Matrix: dimensions must be positive");
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return d_.size(); }
  bool empty() const { return d_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }

  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }
  double* row(std::size_t i) { return d_.data() + i * cols_; }
  const double* row(std::size_t i) const { return d_.data() + i * cols_; }
  std::span<double> row_span(std::size_t i) { return {row(i), cols_}; }
  std::span<const double> row_span(std::size_t i) const { return {row(i), cols_}; }

  Vector& storage() { return d_; }
  const Vector& storage() const { return d_; }

  void fill(double v) { std::fill(d_.begin(), d_.end(), v); }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Vector d_;
};

// y = beta*y + A x
inline void gemv(const Matrix& a, std::span<const double> x, std::span<double> y,
                 double beta = 0.0) {
  require(x.size() == a.cols() && y.size() == a.rows(), "gemv: shape mismatch");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* r = a.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) acc += r[j] * x[j];
    y[i] = beta * y[i] + acc;
  }
}

// y = beta*y + A^T x
inline void gemv_t(const Matrix& a, std::span<const double> x, std::span<double> y,
                   double beta = 0.0) {
  require(x.size() == a.rows() && y.size() == a.cols(), "gemv_t: shape mismatch");
  if (beta == 0.0) std::fill(y.begin(), y.end(), 0.0);
  else
    for (auto& v : y) v *= beta;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* r = a.row(i);
    const double xi = x[i];
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += r[j] * xi;
  }
}

// A += a b^T
inline void ger(Matrix& a, std::span<const double> u, std::span<const double> v) {
  require(u.size() == a.rows() && v.size() == a.cols(), "ger: shape mismatch");
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* r = a.row(i);
    const double ui = u[i];
    for (std::size_t j = 0; j < a.cols(); ++j) r[j] += ui * v[j];
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul: shape mismatch");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
  return c;
}

inline Matrix sub(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] -= b.data()[i];
  return c;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
  return std::sqrt(s);
}

// Solve A X = B by LU with partial pivoting. A is n-by-n.
inline Matrix lu_solve(Matrix a, Matrix b) {
  require(a.rows() == a.cols(), "lu_solve: A must be square");
  require(a.rows() == b.rows(), "lu_solve: A/B row mismatch");
  const std::size_t n = a.rows();
  std::vector<std::size_t> piv(n);
  for (std::size_t i = 0; i < n; ++i) piv[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::fabs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::fabs(a(i, k)) > best) {
        best = std::fabs(a(i, k));
        p = i;
      }
    require(best > 0.0, "lu_solve: singular matrix");
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      for (std::size_t j = 0; j < b.cols(); ++j) std::swap(b(k, j), b(p, j));
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      a(i, k) = f;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
      for (std::size_t j = 0; j < b.cols(); ++j) b(i, j) -= f * b(k, j);
    }
  }
  for (std::size_t jb = 0; jb < b.cols(); ++jb)
    for (std::size_t ii = n; ii-- > 0;) {
      double acc = b(ii, jb);
      for (std::size_t j = ii + 1; j < n; ++j) acc -= a(ii, j) * b(j, jb);
      b(ii, jb) = acc / a(ii, ii);
    }
  return b;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double sq_norm(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s;
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "sq_dist: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double inf_dist(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "inf_dist: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::fabs(a[i] - b[i]));
  return s;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double clamp(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace regain
