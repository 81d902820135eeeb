#include "septq/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "septq/error.hpp"
#include "septq/kernels.hpp"

namespace septq {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols) {
  if (rows == 0 || cols == 0)
    throw DimensionMismatch("matrix must have at least one row and column");
  data_.assign(rows * cols, fill);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0)
    throw DimensionMismatch("matrix must have at least one row and column");
  if (data_.size() != rows * cols)
    throw DimensionMismatch("matrix data length " +
                            std::to_string(data_.size()) + " != " +
                            std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  if (rows_ == 0 || cols_ == 0)
    throw DimensionMismatch("matrix must have at least one row and column");
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw DimensionMismatch("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n, double diag) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = diag;
  return m;
}

std::vector<double> Matrix::column(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

std::vector<double> Matrix::diagonal() const {
  const std::size_t n = std::min(rows_, cols_);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = (*this)(i, i);
  return out;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

bool Matrix::all_finite() const noexcept {
  for (const double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix SpdFactor::reconstruct() const {
  const std::size_t n = dim();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k <= i; ++k) s += upper(k, i) * upper(k, j);
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionMismatch("matmul: " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " times " +
                            std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  Matrix out(a.rows(), b.cols());
  kernels::omp::gemm(a, b, out);
  return out;
}

Matrix hessian(const Matrix& x, double damping_frac) {
  if (!(damping_frac >= 0.0))
    throw ConfigError("damping fraction must be non-negative");
  Matrix h(x.rows(), x.rows());
  kernels::omp::gram(x, 2.0, h);

  double trace = 0.0;
  for (std::size_t i = 0; i < h.rows(); ++i) trace += h(i, i);
  if (trace == 0.0)
    throw SingularMatrix("Hessian of an all-zero calibration set is singular");

  const double lambda = damping_frac * (trace / static_cast<double>(h.rows()));
  for (std::size_t i = 0; i < h.rows(); ++i) h(i, i) += lambda;
  return h;
}

SpdFactor cholesky(const Matrix& h) {
  if (h.rows() != h.cols())
    throw DimensionMismatch("cholesky: matrix is not square");
  const std::size_t n = h.rows();
  Matrix u(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double pivot = h(i, i);
    for (std::size_t k = 0; k < i; ++k) pivot -= u(k, i) * u(k, i);
    if (!(pivot > 0.0)) throw NotPositiveDefinite(i);
    const double d = std::sqrt(pivot);
    u(i, i) = d;
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = h(i, j);
      for (std::size_t k = 0; k < i; ++k) s -= u(k, i) * u(k, j);
      u(i, j) = s / d;
    }
  }
  return SpdFactor{std::move(u)};
}

Matrix spd_inverse(const SpdFactor& factor) {
  const Matrix& u = factor.upper;
  const std::size_t n = factor.dim();
  Matrix inv(n, n);
  std::vector<double> y(n);
  for (std::size_t col = 0; col < n; ++col) {
    // U^T y = e_col
    for (std::size_t i = 0; i < n; ++i) {
      double s = (i == col) ? 1.0 : 0.0;
      for (std::size_t k = 0; k < i; ++k) s -= u(k, i) * y[k];
      y[i] = s / u(i, i);
    }
    // U x = y. Entries below the diagonal are overwritten by the mirror below.
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t k = ii + 1; k < n; ++k) s -= u(ii, k) * inv(k, col);
      inv(ii, col) = s / u(ii, ii);
    }
  }
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) inv(i, j) = inv(j, i);
  return inv;
}

Matrix spd_inverse(const Matrix& h) { return spd_inverse(cholesky(h)); }

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (const double v : m.values()) s += v * v;
  return std::sqrt(s);
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("frobenius_distance: shape mismatch");
  double s = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  return std::sqrt(s);
}

double max_abs_difference(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("max_abs_difference: shape mismatch");
  double m = 0.0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i)
    m = std::max(m, std::abs(av[i] - bv[i]));
  return m;
}

}  // namespace septq
