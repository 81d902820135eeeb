#pragma once

// Baselines and brute-force references. Nothing here calls into the engine's
// factorizations or kernels: linear algebra goes through Eigen and the loops
// are written out independently, so agreement with the engine is evidence.
// The brute-force solvers are O(dim^3) per call and refuse inputs larger
// than kMaxOracleDim.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "septq/engine.hpp"
#include "septq/importance.hpp"
#include "septq/matrix.hpp"
#include "septq/quant_grid.hpp"

namespace septq::oracles {

inline constexpr std::size_t kMaxOracleDim = 64;

enum class OracleQuantity { score, delta, layer_error };
std::string_view to_string(OracleQuantity q) noexcept;

struct OracleReport {
  std::size_t instance_id;
  OracleQuantity quantity;
  double closed_form;
  double brute_force;
  double rel_err;
};

/// |closed - brute| / max(|brute|, 1e-12)
double relative_error(double closed, double brute) noexcept;
/// ||closed - brute|| / max(||brute||, 1e-12)
double relative_error(std::span<const double> closed,
                      std::span<const double> brute);

std::string reports_to_csv(std::span<const OracleReport> reports);

/// Every weight rounded independently; no mask, no error feedback.
QuantResult rtn_baseline(const Matrix& w, const Matrix& x, const QuantGrid& g);

/// argmin 1/2 d^T H d subject to d_j + gap = 0, from the bordered KKT system
/// [[H, e_j], [e_j^T, 0]] [d; mu] = [0; -gap].
std::vector<double> kkt_delta_oracle(const Matrix& h, std::size_t j, double gap);

/// Same minimizer through the Schur complement: d_j = -gap and the remaining
/// entries solve H_rr d_r = -H_rj d_j.
std::vector<double> kkt_delta_schur(const Matrix& h, std::size_t j, double gap);

/// ||W X - W' X||_F^2 where W' quantizes only w(i, j) and re-optimizes the
/// rest of row i (undamped Hessian).
double score_oracle(const Matrix& w, const Matrix& x, const QuantGrid& g,
                    std::size_t i, std::size_t j);

/// Column-by-column quantization with an explicit inverse Hessian that is
/// downdated after every column, full-width updates and no blocking.
QuantResult unblocked_reference(const Matrix& w, const Matrix& x,
                                const MaskMatrix& mask, const QuantGrid& g,
                                double damping_frac);

/// ||W X - W_hat X||_F^2 evaluated with Eigen.
double reference_layer_error(const Matrix& w, const Matrix& w_hat,
                             const Matrix& x);

}  // namespace septq::oracles
