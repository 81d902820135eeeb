#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "septq/matrix.hpp"
#include "septq/quant_grid.hpp"

namespace septq {

/// Per-weight importance: the layer-error increase caused by quantizing that
/// weight alone while the rest of its row compensates optimally.
class ScoreMatrix {
 public:
  explicit ScoreMatrix(Matrix scores) : scores_(std::move(scores)) {}

  std::size_t rows() const noexcept { return scores_.rows(); }
  std::size_t cols() const noexcept { return scores_.cols(); }
  double operator()(std::size_t r, std::size_t c) const noexcept {
    return scores_(r, c);
  }
  const Matrix& matrix() const noexcept { return scores_; }

 private:
  Matrix scores_;
};

/// 1 marks a reserved (full-precision) weight, 0 a quantized one.
class MaskMatrix {
 public:
  MaskMatrix(std::size_t rows, std::size_t cols, bool fill = false);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool operator()(std::size_t r, std::size_t c) const noexcept {
    return bits_[r * cols_ + c] != 0;
  }
  void set(std::size_t r, std::size_t c, bool reserved) noexcept;
  std::size_t reserved_count() const noexcept { return reserved_; }

  friend bool operator==(const MaskMatrix&, const MaskMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::size_t reserved_ = 0;
  std::vector<std::uint8_t> bits_;
};

enum class MaskTiming { static_scores, dynamic_scores };
enum class MaskScope { global, local };

std::string_view to_string(MaskTiming t) noexcept;
std::string_view to_string(MaskScope s) noexcept;
MaskTiming parse_mask_timing(std::string_view s);
MaskScope parse_mask_scope(std::string_view s);

struct StrategyConfig {
  MaskTiming timing = MaskTiming::static_scores;
  MaskScope scope = MaskScope::global;
  double p = 1.0;           // percent of weights to reserve
  std::size_t block = 128;  // block edge for the local scope

  void validate() const;
};

/// round(p% * n), ties away from zero.
std::size_t reserve_count(double p, std::size_t n);

/// s(r, c) = (w - quant(w))^2 / (2 * hinv_diag[c]), where hinv_diag is the
/// diagonal of the inverse layer Hessian (2XX^T + lambda*I)^-1.
ScoreMatrix score_all(const Matrix& w, std::span<const double> hinv_diag,
                      const QuantGrid& g);

/// Top reserve_count(p, rows*cols) scores over the whole matrix. Ties go to
/// the entry that comes first in row-major order.
MaskMatrix select_mask(const ScoreMatrix& scores, const StrategyConfig& cfg);

/// Top p% within each block x block tile. Tile quotas are apportioned (largest
/// remainder) so that their total equals the global budget.
MaskMatrix select_mask_local(const ScoreMatrix& scores, const StrategyConfig& cfg);

/// Dispatches on cfg.scope.
MaskMatrix select_mask_for(const ScoreMatrix& scores, const StrategyConfig& cfg);

/// Budget of column `col` when p% of each column is reserved: the cumulative
/// budget round(p% * rows * (col + 1)) minus that of the columns before it, so
/// every column gets floor or ceil of p% * rows and the total matches the
/// global budget.
std::size_t column_quota(double p, std::size_t rows, std::size_t col);

/// Marks the `count` highest-scoring entries of one column.
void select_column(std::span<const double> column_scores, std::size_t count,
                   MaskMatrix& mask, std::size_t col);

/// Sum of the scores of reserved entries.
double score_mass(const ScoreMatrix& scores, const MaskMatrix& mask);

struct ScoreHistogram {
  std::vector<double> edges;  // bins.size() + 1, strictly increasing
  std::vector<std::size_t> counts;
  std::vector<double> mass_fractions;
};

/// Bin k covers [edges[k], edges[k+1]). Scores below the first edge land in
/// the first bin and scores at or above the last edge in the last one, so the
/// counts always add up to rows*cols. Mass fractions are zero when every score
/// is zero.
ScoreHistogram score_histogram(const ScoreMatrix& scores,
                               std::span<const double> bin_edges);

/// {0} followed by `bins` log-spaced edges from the smallest positive score
/// to the largest one.
std::vector<double> log_bin_edges(const ScoreMatrix& scores, std::size_t bins);

/// Count of reserved entries in each block x block tile.
Matrix mask_block_sums(const MaskMatrix& mask, std::size_t block = 128);

std::string histogram_csv(const ScoreHistogram& h);
std::string block_sums_csv(const Matrix& sums);

}  // namespace septq
