#pragma once

// Seeded synthetic layers for tests, benchmarks and the demo data.

#include <cstddef>
#include <cstdint>
#include <random>

#include "septq/matrix.hpp"
#include "septq/quant_grid.hpp"

namespace septq::instances {

using Rng = std::mt19937_64;

Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng, double sigma = 1.0);

/// Gaussian weights in which `outlier_frac` of the entries are multiplied by
/// a Student-t draw scaled by `outlier_scale`.
Matrix heavy_tailed_weights(std::size_t rows, std::size_t cols, Rng& rng,
                            double outlier_frac = 0.01,
                            double outlier_scale = 8.0);

/// Correlated calibration inputs (dim x samples): log-normal channel scales
/// and a random mixing of neighbouring channels.
Matrix calibration_inputs(std::size_t dim, std::size_t samples, Rng& rng);

/// A^T A + dim * I with Gaussian A.
Matrix random_spd(std::size_t dim, Rng& rng);

/// Weights drawn from the grid's representable values; every row contains
/// both the smallest and the largest code.
Matrix grid_aligned_weights(std::size_t rows, std::size_t cols,
                            const QuantGrid& g, Rng& rng);

}  // namespace septq::instances
