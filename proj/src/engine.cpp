#include "septq/engine.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <string>

#include "septq/error.hpp"
#include "septq/kernels.hpp"

namespace septq {
namespace {

int ceil_log2(std::size_t n) {
  int bits = 0;
  while ((std::size_t{1} << bits) < n) ++bits;
  return bits;
}

struct ColumnPass {
  Matrix weights;
  CodeMatrix codes;
};

// Called before column j is quantized; may write mask column j.
using ColumnSelector = std::function<void(const Matrix& working, std::size_t j)>;

// Blocked column loop. `u` is the upper Cholesky factor of the inverse
// Hessian; row j of it carries the error-feedback coefficients of column j
// with the earlier columns already eliminated.
ColumnPass quantize_columns(Matrix w, const Matrix& u, const QuantGrid& g,
                            MaskMatrix& mask, std::size_t block,
                            const ColumnSelector& select) {
  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  ColumnPass out{Matrix(rows, cols), CodeMatrix(rows, cols, g.bits)};
  std::vector<double> err_col(rows);

  for (std::size_t i = 0; i < cols; i += block) {
    const std::size_t end = std::min(i + block, cols);
    Matrix block_err(rows, end - i);

    for (std::size_t j = i; j < end; ++j) {
      if (select) select(w, j);
      const double d = u(j, j);
      for (std::size_t r = 0; r < rows; ++r) {
        const double v = w(r, j);
        const Quantized q = quantize_value(v, g, r);
        const double kept = mask(r, j) ? v : q.dequant;
        out.codes(r, j) = static_cast<std::uint8_t>(q.code);
        out.weights(r, j) = kept;
        err_col[r] = (v - kept) / d;
        block_err(r, j - i) = err_col[r];
      }
      compensate_column(w, j + 1, end, err_col,
                        u.row(j).subspan(j + 1, end - j - 1));
    }
    // Lazy batch: the whole block's errors reach the later columns at once.
    if (end < cols) kernels::omp::block_update(w, end, block_err, u, i);
  }
  return out;
}

// Re-scores column j on the working weights, using the eliminated
// inverse-Hessian diagonal u(j, j)^2, and reserves its share of the budget.
ColumnSelector dynamic_selector(const Matrix& u, const QuantGrid& g, double p,
                                MaskMatrix& mask) {
  return [&u, &g, p, &mask](const Matrix& working, std::size_t j) {
    std::vector<double> col_scores(working.rows());
    const double denom = 2.0 * u(j, j) * u(j, j);
    for (std::size_t r = 0; r < working.rows(); ++r) {
      const double v = working(r, j);
      const double e = v - quantize_value(v, g, r).dequant;
      col_scores[r] = e * e / denom;
    }
    select_column(col_scores, column_quota(p, working.rows(), j), mask, j);
  };
}

QuantResult assemble(const Matrix& w, const Matrix& x, const EngineConfig& cfg,
                     const QuantGrid& grid, MaskMatrix mask, ColumnPass pass,
                     double seconds) {
  std::vector<ReservedWeight> reserved;
  reserved.reserve(mask.reserved_count());
  for (std::size_t r = 0; r < mask.rows(); ++r)
    for (std::size_t c = 0; c < mask.cols(); ++c)
      if (mask(r, c))
        reserved.push_back({static_cast<std::uint32_t>(r),
                            static_cast<std::uint32_t>(c), pass.weights(r, c)});

  QuantMetrics metrics;
  metrics.layer_error = layer_error(w, pass.weights, x);
  const EffectiveBits eb = effective_bits(cfg, mask);
  metrics.effective_bits_paper = eb.nominal;
  metrics.effective_bits_honest = eb.honest;
  metrics.runtime_seconds = seconds;
  return QuantResult{std::move(pass.codes), grid,    std::move(mask),
                     std::move(reserved),   metrics, std::move(pass.weights)};
}

}  // namespace

void EngineConfig::validate() const {
  if (bits < 2 || bits > 8)
    throw ConfigError("bit width " + std::to_string(bits) + " outside [2, 8]");
  if (blocksize == 0) throw ConfigError("blocksize must be at least 1");
  if (!(damping_frac >= 0.0) || !std::isfinite(damping_frac))
    throw ConfigError("damping fraction must be finite and non-negative");
  if (grid_steps < 2) throw ConfigError("grid search needs at least 2 steps");
  strategy.validate();
}

std::size_t EngineConfig::effective_blocksize(std::size_t cols) const noexcept {
  return std::min(blocksize, cols);
}

Matrix QuantResult::reconstruct() const {
  Matrix out = dequantize_matrix(codes, grid);
  for (const ReservedWeight& rw : reserved) out(rw.row, rw.col) = rw.value;
  return out;
}

void compensate_column(Matrix& w, std::size_t col_begin, std::size_t col_end,
                       std::span<const double> err,
                       std::span<const double> hinv_row) {
  if (col_end <= col_begin) return;
  if (err.size() != w.rows() || hinv_row.size() != col_end - col_begin ||
      col_end > w.cols())
    throw DimensionMismatch("compensate_column: incompatible slice");
  kernels::omp::rank1_update(w, col_begin, col_end, err, hinv_row);
}

std::vector<double> compensation_delta(const Matrix& hinv, std::size_t j,
                                       double gap) {
  if (hinv.rows() != hinv.cols() || j >= hinv.rows())
    throw DimensionMismatch("compensation_delta: index outside the inverse Hessian");
  const double d = hinv(j, j);
  if (!(d > 0.0)) throw SingularMatrix("inverse Hessian diagonal is not positive");
  std::vector<double> delta(hinv.rows());
  for (std::size_t k = 0; k < hinv.rows(); ++k) delta[k] = -gap / d * hinv(k, j);
  return delta;
}

QuantResult run_septq(const Matrix& w, const Matrix& x, const EngineConfig& cfg) {
  cfg.validate();
  return run_septq(w, x, cfg,
                   grid_search(w, cfg.bits, cfg.granularity, cfg.grid_steps));
}

QuantResult run_septq(const Matrix& w, const Matrix& x, const EngineConfig& cfg,
                      const QuantGrid& grid) {
  cfg.validate();
  grid.validate(w.rows());
  if (grid.bits != cfg.bits)
    throw ConfigError("grid bit width does not match the engine configuration");
  if (w.cols() != x.rows())
    throw DimensionMismatch("weights have " + std::to_string(w.cols()) +
                            " columns but calibration inputs have " +
                            std::to_string(x.rows()) + " rows");

  const auto t0 = std::chrono::steady_clock::now();
  const Matrix hinv = spd_inverse(hessian(x, cfg.damping_frac));
  const Matrix u = cholesky(hinv).upper;
  const std::size_t block = cfg.effective_blocksize(w.cols());

  MaskMatrix mask(w.rows(), w.cols());
  ColumnSelector select;
  if (cfg.strategy.timing == MaskTiming::static_scores) {
    const std::vector<double> diag = hinv.diagonal();
    mask = select_mask_for(score_all(w, diag, grid), cfg.strategy);
  } else {
    select = dynamic_selector(u, grid, cfg.strategy.p, mask);
  }

  ColumnPass pass = quantize_columns(w, u, grid, mask, block, select);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return assemble(w, x, cfg, grid, std::move(mask), std::move(pass), seconds);
}

MaskMatrix dynamic_mask_trace(const Matrix& w, const Matrix& hinv,
                              const QuantGrid& g, const StrategyConfig& cfg,
                              std::size_t blocksize) {
  cfg.validate();
  g.validate(w.rows());
  if (hinv.rows() != w.cols() || hinv.cols() != w.cols())
    throw DimensionMismatch("dynamic_mask_trace: inverse Hessian does not match the weights");
  if (blocksize == 0) throw ConfigError("blocksize must be at least 1");

  const Matrix u = cholesky(hinv).upper;
  MaskMatrix mask(w.rows(), w.cols());
  const ColumnSelector select = dynamic_selector(u, g, cfg.p, mask);
  quantize_columns(w, u, g, mask, std::min(blocksize, w.cols()), select);
  return mask;
}

EffectiveBits effective_bits(const EngineConfig& cfg, const MaskMatrix& mask) {
  const double nominal =
      std::round((cfg.bits + cfg.p() / 10.0) * 100.0) / 100.0;
  const double total = static_cast<double>(mask.rows() * mask.cols());
  const double fraction = static_cast<double>(mask.reserved_count()) / total;
  const int index_bits = ceil_log2(mask.rows()) + ceil_log2(mask.cols());
  return {nominal, cfg.bits + fraction * (16.0 + index_bits)};
}

double layer_error(const Matrix& w, const Matrix& w_hat, const Matrix& x) {
  if (w.rows() != w_hat.rows() || w.cols() != w_hat.cols())
    throw DimensionMismatch("layer_error: weight shapes differ");
  if (w.cols() != x.rows())
    throw DimensionMismatch("layer_error: weights and inputs do not conform");
  Matrix diff(w.rows(), w.cols());
  for (std::size_t i = 0; i < diff.size(); ++i)
    diff.values()[i] = w.values()[i] - w_hat.values()[i];
  Matrix out(w.rows(), x.cols());
  kernels::omp::gemm(diff, x, out);
  std::vector<double> norms(out.rows());
  kernels::omp::row_squared_norms(out, norms);
  double s = 0.0;
  for (const double v : norms) s += v;
  return s;
}

}  // namespace septq
