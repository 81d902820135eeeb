#include "septq/kernels.hpp"

#include <vector>

#include "septq/error.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace septq::kernels {
namespace {

// Per-row bodies shared by both variants; only the outer loop differs.

void gemm_row(const Matrix& a, const Matrix& b, Matrix& out, std::size_t i) {
  auto out_row = out.row(i);
  std::fill(out_row.begin(), out_row.end(), 0.0);
  for (std::size_t k = 0; k < a.cols(); ++k) {
    const double aik = a(i, k);
    const auto b_row = b.row(k);
    for (std::size_t j = 0; j < b.cols(); ++j) out_row[j] += aik * b_row[j];
  }
}

void gram_row(const Matrix& x, double scale, Matrix& out, std::size_t i) {
  const auto xi = x.row(i);
  for (std::size_t j = i; j < x.rows(); ++j) {
    const auto xj = x.row(j);
    double s = 0.0;
    for (std::size_t k = 0; k < x.cols(); ++k) s += xi[k] * xj[k];
    out(i, j) = scale * s;
  }
}

void mirror_lower(Matrix& out) {
  for (std::size_t i = 1; i < out.rows(); ++i)
    for (std::size_t j = 0; j < i; ++j) out(i, j) = out(j, i);
}

void rank1_row(Matrix& w, std::size_t r, std::size_t col_begin,
               std::size_t col_end, double coeff,
               std::span<const double> row_vec) {
  if (coeff == 0.0) return;
  auto wr = w.row(r);
  for (std::size_t c = col_begin; c < col_end; ++c)
    wr[c] -= coeff * row_vec[c - col_begin];
}

void block_row(Matrix& w, std::size_t r, std::size_t col_begin,
               const Matrix& err, const Matrix& factor, std::size_t factor_row,
               std::vector<double>& acc) {
  const std::size_t width = w.cols() - col_begin;
  acc.assign(width, 0.0);
  for (std::size_t t = 0; t < err.cols(); ++t) {
    const double e = err(r, t);
    const auto f = factor.row(factor_row + t);
    for (std::size_t c = 0; c < width; ++c) acc[c] += e * f[col_begin + c];
  }
  auto wr = w.row(r);
  for (std::size_t c = 0; c < width; ++c) wr[col_begin + c] -= acc[c];
}

void score_row(const Matrix& w, std::span<const double> hinv_diag,
               const QuantGrid& grid, Matrix& out, std::size_t r) {
  const double scale = grid.scale(r);
  const int zero = grid.zero_point(r);
  const int max_code = grid.max_code();
  for (std::size_t c = 0; c < w.cols(); ++c) {
    const double v = w(r, c);
    const double d = v - quantize_value(v, scale, zero, max_code).dequant;
    out(r, c) = d * d / (2.0 * hinv_diag[c]);
  }
}

double candidate_error(std::span<const double> values,
                       const GridCandidate& cand, int max_code) {
  double s = 0.0;
  for (const double v : values) {
    const double d =
        v - quantize_value(v, cand.scale, cand.zero_point, max_code).dequant;
    s += d * d;
  }
  return s;
}

double row_norm2(const Matrix& m, std::size_t r) {
  double s = 0.0;
  for (const double v : m.row(r)) s += v * v;
  return s;
}

void check_gemm(const Matrix& a, const Matrix& b, const Matrix& out) {
  if (a.cols() != b.rows() || out.rows() != a.rows() || out.cols() != b.cols())
    throw DimensionMismatch("gemm: incompatible shapes");
}

void check_block(const Matrix& w, std::size_t col_begin, const Matrix& err,
                 const Matrix& factor, std::size_t factor_row) {
  if (err.rows() != w.rows() || factor.cols() != w.cols() ||
      factor_row + err.cols() > factor.rows() || col_begin > w.cols())
    throw DimensionMismatch("block_update: incompatible shapes");
}

}  // namespace

namespace serial {

void gemm(const Matrix& a, const Matrix& b, Matrix& out) {
  check_gemm(a, b, out);
  for (std::size_t i = 0; i < a.rows(); ++i) gemm_row(a, b, out, i);
}

void gram(const Matrix& x, double scale, Matrix& out) {
  for (std::size_t i = 0; i < x.rows(); ++i) gram_row(x, scale, out, i);
  mirror_lower(out);
}

void rank1_update(Matrix& w, std::size_t col_begin, std::size_t col_end,
                  std::span<const double> coeff,
                  std::span<const double> row_vec) {
  for (std::size_t r = 0; r < w.rows(); ++r)
    rank1_row(w, r, col_begin, col_end, coeff[r], row_vec);
}

void block_update(Matrix& w, std::size_t col_begin, const Matrix& err,
                  const Matrix& factor, std::size_t factor_row) {
  check_block(w, col_begin, err, factor, factor_row);
  std::vector<double> acc;
  for (std::size_t r = 0; r < w.rows(); ++r)
    block_row(w, r, col_begin, err, factor, factor_row, acc);
}

void importance_scores(const Matrix& w, std::span<const double> hinv_diag,
                       const QuantGrid& grid, Matrix& out) {
  for (std::size_t r = 0; r < w.rows(); ++r)
    score_row(w, hinv_diag, grid, out, r);
}

void candidate_errors(std::span<const double> values,
                      std::span<const GridCandidate> candidates, int max_code,
                      std::span<double> out) {
  for (std::size_t k = 0; k < candidates.size(); ++k)
    out[k] = candidate_error(values, candidates[k], max_code);
}

void row_squared_norms(const Matrix& m, std::span<double> out) {
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = row_norm2(m, r);
}

}  // namespace serial

namespace omp {

void gemm(const Matrix& a, const Matrix& b, Matrix& out) {
  check_gemm(a, b, out);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < a.rows(); ++i) gemm_row(a, b, out, i);
}

void gram(const Matrix& x, double scale, Matrix& out) {
  // Row i owns x.rows() - i entries; dynamic scheduling balances the triangle.
#pragma omp parallel for schedule(dynamic, 4)
  for (std::size_t i = 0; i < x.rows(); ++i) gram_row(x, scale, out, i);
  mirror_lower(out);
}

void rank1_update(Matrix& w, std::size_t col_begin, std::size_t col_end,
                  std::span<const double> coeff,
                  std::span<const double> row_vec) {
#pragma omp parallel for schedule(static) if (w.rows() * (col_end - col_begin) > 4096)
  for (std::size_t r = 0; r < w.rows(); ++r)
    rank1_row(w, r, col_begin, col_end, coeff[r], row_vec);
}

void block_update(Matrix& w, std::size_t col_begin, const Matrix& err,
                  const Matrix& factor, std::size_t factor_row) {
  check_block(w, col_begin, err, factor, factor_row);
#pragma omp parallel
  {
    std::vector<double> acc;
#pragma omp for schedule(static)
    for (std::size_t r = 0; r < w.rows(); ++r)
      block_row(w, r, col_begin, err, factor, factor_row, acc);
  }
}

void importance_scores(const Matrix& w, std::span<const double> hinv_diag,
                       const QuantGrid& grid, Matrix& out) {
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < w.rows(); ++r)
    score_row(w, hinv_diag, grid, out, r);
}

void candidate_errors(std::span<const double> values,
                      std::span<const GridCandidate> candidates, int max_code,
                      std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (std::size_t k = 0; k < candidates.size(); ++k)
    out[k] = candidate_error(values, candidates[k], max_code);
}

void row_squared_norms(const Matrix& m, std::span<double> out) {
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < m.rows(); ++r) out[r] = row_norm2(m, r);
}

}  // namespace omp

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace septq::kernels
