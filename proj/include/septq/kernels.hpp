#pragma once

// Data-parallel inner loops. Every kernel exists twice: `serial` is the
// reference used by tests and `omp` is the OpenMP version used by the library.
// Both evaluate each output element with the same expression in the same
// order, so their results are bitwise identical at any thread count.

#include <cstddef>
#include <span>

#include "septq/matrix.hpp"
#include "septq/quant_grid.hpp"

namespace septq::kernels {

/// One clip-range candidate of the grid search.
struct GridCandidate {
  double scale;
  int zero_point;
};

namespace serial {

// out = a * b; out must already be a.rows() x b.cols().
void gemm(const Matrix& a, const Matrix& b, Matrix& out);

// out = scale * x * x^T. The upper triangle is computed, the lower mirrored.
void gram(const Matrix& x, double scale, Matrix& out);

// w(r, c) -= coeff[r] * row_vec[c - col_begin] for c in [col_begin, col_end).
void rank1_update(Matrix& w, std::size_t col_begin, std::size_t col_end,
                  std::span<const double> coeff,
                  std::span<const double> row_vec);

// w(r, c) -= sum_t err(r, t) * factor(factor_row + t, c) for c >= col_begin.
void block_update(Matrix& w, std::size_t col_begin, const Matrix& err,
                  const Matrix& factor, std::size_t factor_row);

// out(r, c) = (w(r, c) - quant(w(r, c)))^2 / (2 * hinv_diag[c]).
void importance_scores(const Matrix& w, std::span<const double> hinv_diag,
                       const QuantGrid& grid, Matrix& out);

// out[k] = sum over values of (v - quant_k(v))^2.
void candidate_errors(std::span<const double> values,
                      std::span<const GridCandidate> candidates, int max_code,
                      std::span<double> out);

// out[r] = sum_c m(r, c)^2.
void row_squared_norms(const Matrix& m, std::span<double> out);

}  // namespace serial

namespace omp {

// out = a * b; out must already be a.rows() x b.cols().
void gemm(const Matrix& a, const Matrix& b, Matrix& out);

// out = scale * x * x^T. The upper triangle is computed, the lower mirrored.
void gram(const Matrix& x, double scale, Matrix& out);

// w(r, c) -= coeff[r] * row_vec[c - col_begin] for c in [col_begin, col_end).
void rank1_update(Matrix& w, std::size_t col_begin, std::size_t col_end,
                  std::span<const double> coeff,
                  std::span<const double> row_vec);

// w(r, c) -= sum_t err(r, t) * factor(factor_row + t, c) for c >= col_begin.
void block_update(Matrix& w, std::size_t col_begin, const Matrix& err,
                  const Matrix& factor, std::size_t factor_row);

// out(r, c) = (w(r, c) - quant(w(r, c)))^2 / (2 * hinv_diag[c]).
void importance_scores(const Matrix& w, std::span<const double> hinv_diag,
                       const QuantGrid& grid, Matrix& out);

// out[k] = sum over values of (v - quant_k(v))^2.
void candidate_errors(std::span<const double> values,
                      std::span<const GridCandidate> candidates, int max_code,
                      std::span<double> out);

// out[r] = sum_c m(r, c)^2.
void row_squared_norms(const Matrix& m, std::span<double> out);

}  // namespace omp

/// Number of threads the omp kernels will use (1 without OpenMP).
int max_threads() noexcept;

}  // namespace septq::kernels
