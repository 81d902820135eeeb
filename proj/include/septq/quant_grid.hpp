#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "septq/matrix.hpp"

namespace septq {

enum class Granularity { per_matrix, per_row };

std::string_view to_string(Granularity g) noexcept;
Granularity parse_granularity(std::string_view s);

/// Uniform asymmetric grid {S * (c - Z) : c in [0, 2^N - 1]}. A per-row grid
/// carries one (S, Z) pair per weight row.
struct QuantGrid {
  int bits = 4;
  Granularity granularity = Granularity::per_matrix;
  std::vector<double> scales;
  std::vector<int> zero_points;

  static QuantGrid per_matrix(int bits, double scale, int zero_point);
  static QuantGrid per_row(int bits, std::vector<double> scales,
                           std::vector<int> zero_points);

  int max_code() const noexcept { return (1 << bits) - 1; }

  double scale(std::size_t row) const noexcept {
    return granularity == Granularity::per_row ? scales[row] : scales.front();
  }
  int zero_point(std::size_t row) const noexcept {
    return granularity == Granularity::per_row ? zero_points[row]
                                               : zero_points.front();
  }

  /// Throws ConfigError unless bits in [2, 8], every S > 0 and every Z is a
  /// valid code, and (for per-row grids) there is one pair per row.
  void validate(std::size_t rows) const;

  friend bool operator==(const QuantGrid&, const QuantGrid&) = default;
};

struct Quantized {
  int code;
  double dequant;
};

/// Round-to-nearest onto the grid. Ties round away from zero.
inline Quantized quantize_value(double w, double scale, int zero_point,
                                int max_code) noexcept {
  double level = std::round(w / scale) + static_cast<double>(zero_point);
  level = std::clamp(level, 0.0, static_cast<double>(max_code));
  const int code = static_cast<int>(level);
  return {code, scale * static_cast<double>(code - zero_point)};
}

inline double dequantize_code(int code, double scale, int zero_point) noexcept {
  return scale * static_cast<double>(code - zero_point);
}

inline Quantized quantize_value(double w, const QuantGrid& g,
                                std::size_t row = 0) noexcept {
  return quantize_value(w, g.scale(row), g.zero_point(row), g.max_code());
}

/// N-bit integer codes, row-major.
class CodeMatrix {
 public:
  CodeMatrix(std::size_t rows, std::size_t cols, int bits);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  int bits() const noexcept { return bits_; }

  std::uint8_t& operator()(std::size_t r, std::size_t c) noexcept {
    return codes_[r * cols_ + c];
  }
  std::uint8_t operator()(std::size_t r, std::size_t c) const noexcept {
    return codes_[r * cols_ + c];
  }
  std::span<const std::uint8_t> codes() const noexcept { return codes_; }
  std::span<std::uint8_t> codes() noexcept { return codes_; }

  friend bool operator==(const CodeMatrix&, const CodeMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  int bits_;
  std::vector<std::uint8_t> codes_;
};

struct QuantizedColumn {
  std::vector<int> codes;
  std::vector<double> dequants;
};

/// Quantizes one weight column; element r uses row r's grid.
QuantizedColumn quantize_column(std::span<const double> column,
                                const QuantGrid& g);

/// Quantizes every entry independently.
CodeMatrix quantize_matrix(const Matrix& w, const QuantGrid& g);
Matrix dequantize_matrix(const CodeMatrix& codes, const QuantGrid& g);

/// Squared Frobenius reconstruction error ||W - quant(W)||^2.
double grid_error(const Matrix& w, const QuantGrid& g);

/// Searches clip ranges [a*min, a*max] for a = k/steps, k = 1..steps, and
/// keeps the grid with the smallest reconstruction error (ties: larger a).
/// A constant range falls back to S = 1, Z = clip(round(-min)).
QuantGrid grid_search(const Matrix& w, int bits, Granularity granularity,
                      std::size_t steps);

}  // namespace septq
