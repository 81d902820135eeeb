#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace septq {

/// Dense row-major matrix of doubles. Always at least 1x1.
class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n, double diag = 1.0);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) noexcept {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  std::vector<double> column(std::size_t c) const;
  std::vector<double> diagonal() const;
  Matrix transposed() const;

  bool all_finite() const noexcept;

  /// Bitwise comparison of shape and every entry.
  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

/// Upper-triangular Cholesky factor: upper^T * upper equals the factored matrix.
struct SpdFactor {
  Matrix upper;

  std::size_t dim() const noexcept { return upper.rows(); }
  Matrix reconstruct() const;
};

Matrix matmul(const Matrix& a, const Matrix& b);

/// Layer Hessian 2*X*X^T + lambda*I, lambda = damping_frac * mean(diag(2*X*X^T)).
/// Only the upper triangle is accumulated; the lower one is mirrored from it.
Matrix hessian(const Matrix& x, double damping_frac);

SpdFactor cholesky(const Matrix& h);

/// Inverse of a symmetric positive-definite matrix through its Cholesky factor.
/// The result is exactly symmetric.
Matrix spd_inverse(const Matrix& h);
Matrix spd_inverse(const SpdFactor& factor);

double frobenius_norm(const Matrix& m);
double frobenius_distance(const Matrix& a, const Matrix& b);
double max_abs_difference(const Matrix& a, const Matrix& b);

}  // namespace septq
