#include "septq/quant_grid.hpp"

#include <limits>
#include <string>

#include "septq/error.hpp"
#include "septq/kernels.hpp"

namespace septq {
namespace {

struct RangeChoice {
  double scale;
  int zero_point;
};

int derived_zero_point(double lo, double scale, int max_code) {
  const double z = std::clamp(std::round(-lo / scale), 0.0,
                              static_cast<double>(max_code));
  return static_cast<int>(z);
}

// Best clip range for one group of values (the whole matrix or one row).
RangeChoice search_range(std::span<const double> values, int bits,
                         std::size_t steps) {
  const int max_code = (1 << bits) - 1;
  const auto [min_it, max_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *min_it;
  const double hi = *max_it;
  if (hi == lo) return {1.0, derived_zero_point(lo, 1.0, max_code)};

  std::vector<kernels::GridCandidate> candidates;
  candidates.reserve(steps);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double alpha = static_cast<double>(k) / static_cast<double>(steps);
    const double a_lo = alpha * lo;
    const double a_hi = alpha * hi;
    const double scale = (a_hi - a_lo) / static_cast<double>(max_code);
    candidates.push_back({scale, derived_zero_point(a_lo, scale, max_code)});
  }
  std::vector<double> errors(candidates.size());
  kernels::omp::candidate_errors(values, candidates, max_code, errors);

  // Walk from the largest alpha down so that ties keep the larger one.
  std::size_t best = candidates.size() - 1;
  for (std::size_t k = candidates.size(); k-- > 0;)
    if (errors[k] < errors[best]) best = k;
  return {candidates[best].scale, candidates[best].zero_point};
}

}  // namespace

std::string_view to_string(Granularity g) noexcept {
  return g == Granularity::per_row ? "per-row" : "per-matrix";
}

Granularity parse_granularity(std::string_view s) {
  if (s == "per-matrix") return Granularity::per_matrix;
  if (s == "per-row") return Granularity::per_row;
  throw ConfigError("unknown granularity '" + std::string(s) +
                    "' (expected per-matrix or per-row)");
}

QuantGrid QuantGrid::per_matrix(int bits, double scale, int zero_point) {
  return QuantGrid{bits, Granularity::per_matrix, {scale}, {zero_point}};
}

QuantGrid QuantGrid::per_row(int bits, std::vector<double> scales,
                             std::vector<int> zero_points) {
  return QuantGrid{bits, Granularity::per_row, std::move(scales),
                   std::move(zero_points)};
}

void QuantGrid::validate(std::size_t rows) const {
  if (bits < 2 || bits > 8)
    throw ConfigError("bit width " + std::to_string(bits) + " outside [2, 8]");
  const std::size_t expected = granularity == Granularity::per_row ? rows : 1;
  if (scales.size() != expected || zero_points.size() != expected)
    throw ConfigError("grid carries " + std::to_string(scales.size()) +
                      " scale/zero-point pairs, expected " +
                      std::to_string(expected));
  for (std::size_t i = 0; i < expected; ++i) {
    if (!(scales[i] > 0.0) || !std::isfinite(scales[i]))
      throw ConfigError("grid scale must be positive and finite");
    if (zero_points[i] < 0 || zero_points[i] > max_code())
      throw ConfigError("zero point " + std::to_string(zero_points[i]) +
                        " outside the code range");
  }
}

CodeMatrix::CodeMatrix(std::size_t rows, std::size_t cols, int bits)
    : rows_(rows), cols_(cols), bits_(bits), codes_(rows * cols, 0) {
  if (rows == 0 || cols == 0)
    throw DimensionMismatch("code matrix must have at least one row and column");
  if (bits < 2 || bits > 8)
    throw ConfigError("bit width " + std::to_string(bits) + " outside [2, 8]");
}

QuantizedColumn quantize_column(std::span<const double> column,
                                const QuantGrid& g) {
  QuantizedColumn out;
  out.codes.resize(column.size());
  out.dequants.resize(column.size());
  for (std::size_t r = 0; r < column.size(); ++r) {
    const Quantized q = quantize_value(column[r], g, r);
    out.codes[r] = q.code;
    out.dequants[r] = q.dequant;
  }
  return out;
}

CodeMatrix quantize_matrix(const Matrix& w, const QuantGrid& g) {
  CodeMatrix codes(w.rows(), w.cols(), g.bits);
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c)
      codes(r, c) = static_cast<std::uint8_t>(quantize_value(w(r, c), g, r).code);
  return codes;
}

Matrix dequantize_matrix(const CodeMatrix& codes, const QuantGrid& g) {
  Matrix w(codes.rows(), codes.cols());
  for (std::size_t r = 0; r < codes.rows(); ++r)
    for (std::size_t c = 0; c < codes.cols(); ++c)
      w(r, c) = dequantize_code(codes(r, c), g.scale(r), g.zero_point(r));
  return w;
}

double grid_error(const Matrix& w, const QuantGrid& g) {
  double s = 0.0;
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      const double d = w(r, c) - quantize_value(w(r, c), g, r).dequant;
      s += d * d;
    }
  }
  return s;
}

QuantGrid grid_search(const Matrix& w, int bits, Granularity granularity,
                      std::size_t steps) {
  if (bits < 2 || bits > 8)
    throw ConfigError("bit width " + std::to_string(bits) + " outside [2, 8]");
  if (steps < 2) throw ConfigError("grid search needs at least 2 steps");

  if (granularity == Granularity::per_matrix) {
    const RangeChoice c = search_range(w.values(), bits, steps);
    return QuantGrid::per_matrix(bits, c.scale, c.zero_point);
  }
  std::vector<double> scales(w.rows());
  std::vector<int> zeros(w.rows());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const RangeChoice c = search_range(w.row(r), bits, steps);
    scales[r] = c.scale;
    zeros[r] = c.zero_point;
  }
  return QuantGrid::per_row(bits, std::move(scales), std::move(zeros));
}

}  // namespace septq
