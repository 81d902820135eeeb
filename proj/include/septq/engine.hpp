#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "septq/importance.hpp"
#include "septq/matrix.hpp"
#include "septq/quant_grid.hpp"

namespace septq {

struct EngineConfig {
  int bits = 4;
  std::size_t blocksize = 128;
  double damping_frac = 0.01;
  std::size_t grid_steps = 100;
  Granularity granularity = Granularity::per_matrix;
  StrategyConfig strategy;  // strategy.p is the reservation ratio in percent

  double p() const noexcept { return strategy.p; }

  /// Throws ConfigError on out-of-range fields.
  void validate() const;

  /// Block width actually used for a layer with `cols` input columns.
  std::size_t effective_blocksize(std::size_t cols) const noexcept;
};

/// A weight kept at full precision, overlaid on the dequantized codes.
struct ReservedWeight {
  std::uint32_t row;
  std::uint32_t col;
  double value;

  friend bool operator==(const ReservedWeight&, const ReservedWeight&) = default;
};

struct QuantMetrics {
  double layer_error = 0.0;
  double effective_bits_paper = 0.0;
  double effective_bits_honest = 0.0;
  double runtime_seconds = 0.0;
};

struct QuantResult {
  CodeMatrix codes;
  QuantGrid grid;
  MaskMatrix mask;
  std::vector<ReservedWeight> reserved;  // row-major order
  QuantMetrics metrics;
  Matrix weights;  // the quantized layer W-hat at working precision

  /// Dequantized codes with the reserved weights written over them.
  Matrix reconstruct() const;
};

/// Error feedback for one quantized column: w(r, c) -= err[r] * hinv_row[c -
/// col_begin] for c in [col_begin, col_end). `err` holds the scaled rounding
/// errors (w - w_hat) / d of the column and `hinv_row` the matching slice of
/// the inverse-Hessian Cholesky row, d being that row's diagonal entry.
void compensate_column(Matrix& w, std::size_t col_begin, std::size_t col_end,
                       std::span<const double> err,
                       std::span<const double> hinv_row);

/// Closed-form optimal row increment when weight j moves by -gap:
/// delta = -gap / hinv(j, j) * hinv(:, j).
std::vector<double> compensation_delta(const Matrix& hinv, std::size_t j,
                                       double gap);

/// Quantizes a layer column by column under the reservation mask, feeding
/// each column's rounding error into the columns still to be quantized.
/// The grid is fitted to the original weights unless one is supplied.
QuantResult run_septq(const Matrix& w, const Matrix& x, const EngineConfig& cfg);
QuantResult run_septq(const Matrix& w, const Matrix& x, const EngineConfig& cfg,
                      const QuantGrid& grid);

/// Mask chosen by re-scoring each column on the already-compensated weights
/// just before it is quantized, reserving the top p% of that column.
MaskMatrix dynamic_mask_trace(const Matrix& w, const Matrix& hinv,
                              const QuantGrid& g, const StrategyConfig& cfg,
                              std::size_t blocksize = 128);

struct EffectiveBits {
  double nominal; // bits + p/10, e.g. 2.1 for 2-bit codes with p = 1
  double honest;  // bits + reserved fraction * (16-bit value + row/col index)
};

EffectiveBits effective_bits(const EngineConfig& cfg, const MaskMatrix& mask);

/// ||W X - W_hat X||_F^2
double layer_error(const Matrix& w, const Matrix& w_hat, const Matrix& x);

}  // namespace septq
