#include "septq/instances.hpp"

#include <cmath>

#include "septq/error.hpp"

namespace septq::instances {

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng, double sigma) {
  std::normal_distribution<double> dist(0.0, sigma);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = dist(rng);
  return m;
}

Matrix heavy_tailed_weights(std::size_t rows, std::size_t cols, Rng& rng,
                            double outlier_frac, double outlier_scale) {
  Matrix w = gaussian(rows, cols, rng);
  std::bernoulli_distribution is_outlier(outlier_frac);
  std::student_t_distribution<double> tail(3.0);
  for (double& v : w.values())
    if (is_outlier(rng)) v *= outlier_scale * (1.0 + std::abs(tail(rng)));
  return w;
}

Matrix calibration_inputs(std::size_t dim, std::size_t samples, Rng& rng) {
  std::normal_distribution<double> unit(0.0, 1.0);
  std::lognormal_distribution<double> channel_scale(0.0, 0.75);
  Matrix x = gaussian(dim, samples, rng);
  // Mix each channel with its predecessor so that X X^T is not diagonal.
  for (std::size_t i = 1; i < dim; ++i) {
    const double mix = 0.5 * unit(rng);
    for (std::size_t s = 0; s < samples; ++s) x(i, s) += mix * x(i - 1, s);
  }
  for (std::size_t i = 0; i < dim; ++i) {
    const double scale = channel_scale(rng);
    for (std::size_t s = 0; s < samples; ++s) x(i, s) *= scale;
  }
  return x;
}

Matrix random_spd(std::size_t dim, Rng& rng) {
  const Matrix a = gaussian(dim, dim, rng);
  Matrix h(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) {
    for (std::size_t j = i; j < dim; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) s += a(k, i) * a(k, j);
      h(i, j) = s;
      h(j, i) = s;
    }
    h(i, i) += static_cast<double>(dim);
  }
  return h;
}

Matrix grid_aligned_weights(std::size_t rows, std::size_t cols,
                            const QuantGrid& g, Rng& rng) {
  if (cols < 2) throw ConfigError("grid-aligned weights need at least 2 columns");
  g.validate(rows);
  std::uniform_int_distribution<int> code(0, g.max_code());
  Matrix w(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    std::uniform_int_distribution<std::size_t> pos(0, cols - 1);
    const std::size_t lo = pos(rng);
    std::size_t hi = pos(rng);
    if (hi == lo) hi = (lo + 1) % cols;
    for (std::size_t c = 0; c < cols; ++c) {
      const int k = c == lo ? 0 : c == hi ? g.max_code() : code(rng);
      w(r, c) = dequantize_code(k, g.scale(r), g.zero_point(r));
    }
  }
  return w;
}

}  // namespace septq::instances
