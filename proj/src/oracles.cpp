#include "septq/oracles.hpp"

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "septq/error.hpp"
#include "septq/matrix_io.hpp"

namespace septq::oracles {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd to_eigen(const Matrix& m) {
  MatrixXd out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(r, c) = m(r, c);
  return out;
}

void require_small(std::size_t dim, const char* what) {
  if (dim > kMaxOracleDim)
    throw ConfigError(std::string(what) + ": dimension " + std::to_string(dim) +
                      " exceeds the brute-force limit of " +
                      std::to_string(kMaxOracleDim));
}

void require_square(const Matrix& h, std::size_t j) {
  if (h.rows() != h.cols()) throw DimensionMismatch("Hessian must be square");
  if (j >= h.rows()) throw DimensionMismatch("constrained index outside the Hessian");
}

MatrixXd damped_hessian(const Matrix& x, double damping_frac) {
  const MatrixXd xe = to_eigen(x);
  MatrixXd h = 2.0 * xe * xe.transpose();
  const double lambda = damping_frac * h.diagonal().mean();
  h.diagonal().array() += lambda;
  return h;
}

}  // namespace

std::string_view to_string(OracleQuantity q) noexcept {
  switch (q) {
    case OracleQuantity::score: return "score";
    case OracleQuantity::delta: return "delta";
    case OracleQuantity::layer_error: return "layer_error";
  }
  return "unknown";
}

double relative_error(double closed, double brute) noexcept {
  return std::abs(closed - brute) / std::max(std::abs(brute), 1e-12);
}

double relative_error(std::span<const double> closed,
                      std::span<const double> brute) {
  if (closed.size() != brute.size())
    throw DimensionMismatch("relative_error: vector lengths differ");
  double diff = 0.0;
  double norm = 0.0;
  for (std::size_t i = 0; i < closed.size(); ++i) {
    diff += (closed[i] - brute[i]) * (closed[i] - brute[i]);
    norm += brute[i] * brute[i];
  }
  return std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12);
}

std::string reports_to_csv(std::span<const OracleReport> reports) {
  std::string out = "instance_id,quantity,closed_form,brute_force,rel_err\n";
  for (const OracleReport& r : reports)
    out += std::to_string(r.instance_id) + ',' + std::string(to_string(r.quantity)) +
           ',' + format_double(r.closed_form) + ',' + format_double(r.brute_force) +
           ',' + format_double(r.rel_err) + '\n';
  return out;
}

double reference_layer_error(const Matrix& w, const Matrix& w_hat,
                             const Matrix& x) {
  if (w.rows() != w_hat.rows() || w.cols() != w_hat.cols() || w.cols() != x.rows())
    throw DimensionMismatch("reference_layer_error: shapes do not conform");
  return ((to_eigen(w) - to_eigen(w_hat)) * to_eigen(x)).squaredNorm();
}

QuantResult rtn_baseline(const Matrix& w, const Matrix& x, const QuantGrid& g) {
  g.validate(w.rows());
  CodeMatrix codes(w.rows(), w.cols(), g.bits);
  Matrix w_hat(w.rows(), w.cols());
  for (std::size_t r = 0; r < w.rows(); ++r) {
    for (std::size_t c = 0; c < w.cols(); ++c) {
      const Quantized q = quantize_value(w(r, c), g, r);
      codes(r, c) = static_cast<std::uint8_t>(q.code);
      w_hat(r, c) = q.dequant;
    }
  }
  QuantMetrics metrics;
  metrics.layer_error = reference_layer_error(w, w_hat, x);
  metrics.effective_bits_paper = g.bits;
  metrics.effective_bits_honest = g.bits;
  return QuantResult{std::move(codes), g, MaskMatrix(w.rows(), w.cols()),
                     {}, metrics, std::move(w_hat)};
}

std::vector<double> kkt_delta_oracle(const Matrix& h, std::size_t j, double gap) {
  require_square(h, j);
  require_small(h.rows(), "kkt_delta_oracle");
  const auto n = static_cast<Eigen::Index>(h.rows());
  MatrixXd kkt = MatrixXd::Zero(n + 1, n + 1);
  kkt.topLeftCorner(n, n) = to_eigen(h);
  kkt(static_cast<Eigen::Index>(j), n) = 1.0;
  kkt(n, static_cast<Eigen::Index>(j)) = 1.0;
  VectorXd rhs = VectorXd::Zero(n + 1);
  rhs(n) = -gap;
  const VectorXd sol = kkt.fullPivLu().solve(rhs);
  return std::vector<double>(sol.data(), sol.data() + n);
}

std::vector<double> kkt_delta_schur(const Matrix& h, std::size_t j, double gap) {
  require_square(h, j);
  require_small(h.rows(), "kkt_delta_schur");
  const std::size_t n = h.rows();
  std::vector<double> delta(n, 0.0);
  delta[j] = -gap;
  if (n == 1) return delta;

  // Free coordinates in their original order, j removed.
  const auto m = static_cast<Eigen::Index>(n - 1);
  MatrixXd h_rr(m, m);
  VectorXd rhs(m);
  for (std::size_t a = 0, ia = 0; a < n; ++a) {
    if (a == j) continue;
    for (std::size_t b = 0, ib = 0; b < n; ++b) {
      if (b == j) continue;
      h_rr(static_cast<Eigen::Index>(ia), static_cast<Eigen::Index>(ib)) = h(a, b);
      ++ib;
    }
    rhs(static_cast<Eigen::Index>(ia)) = -h(a, j) * delta[j];
    ++ia;
  }
  const VectorXd free = h_rr.ldlt().solve(rhs);
  for (std::size_t a = 0, ia = 0; a < n; ++a) {
    if (a == j) continue;
    delta[a] = free(static_cast<Eigen::Index>(ia++));
  }
  return delta;
}

double score_oracle(const Matrix& w, const Matrix& x, const QuantGrid& g,
                    std::size_t i, std::size_t j) {
  if (w.cols() != x.rows()) throw DimensionMismatch("score_oracle: shapes do not conform");
  if (i >= w.rows() || j >= w.cols()) throw DimensionMismatch("score_oracle: index out of range");
  require_small(w.cols(), "score_oracle");

  const MatrixXd h = damped_hessian(x, 0.0);
  Matrix h_plain(w.cols(), w.cols());
  for (std::size_t a = 0; a < w.cols(); ++a)
    for (std::size_t b = 0; b < w.cols(); ++b)
      h_plain(a, b) = h(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));

  const double gap = w(i, j) - quantize_value(w(i, j), g, i).dequant;
  const std::vector<double> delta = kkt_delta_oracle(h_plain, j, gap);

  // Only row i changes, so the objective is ||(W_i - W'_i) X||^2.
  double objective = 0.0;
  for (std::size_t s = 0; s < x.cols(); ++s) {
    double out_diff = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) out_diff += -delta[c] * x(c, s);
    objective += out_diff * out_diff;
  }
  return objective;
}

QuantResult unblocked_reference(const Matrix& w, const Matrix& x,
                                const MaskMatrix& mask, const QuantGrid& g,
                                double damping_frac) {
  if (w.cols() != x.rows())
    throw DimensionMismatch("unblocked_reference: shapes do not conform");
  if (mask.rows() != w.rows() || mask.cols() != w.cols())
    throw DimensionMismatch("unblocked_reference: mask shape differs from weights");
  require_small(w.cols(), "unblocked_reference");
  g.validate(w.rows());

  const std::size_t rows = w.rows();
  const std::size_t cols = w.cols();
  MatrixXd hinv = damped_hessian(x, damping_frac).inverse();
  Matrix work = w;
  Matrix w_hat(rows, cols);
  CodeMatrix codes(rows, cols, g.bits);

  for (std::size_t j = 0; j < cols; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const double d = hinv(jj, jj);
    for (std::size_t r = 0; r < rows; ++r) {
      const Quantized q = quantize_value(work(r, j), g, r);
      codes(r, j) = static_cast<std::uint8_t>(q.code);
      w_hat(r, j) = mask(r, j) ? work(r, j) : q.dequant;
      const double gap = work(r, j) - w_hat(r, j);
      // Optimal increment of the still-free weights of this row.
      for (std::size_t k = j + 1; k < cols; ++k)
        work(r, k) -= gap / d * hinv(static_cast<Eigen::Index>(k), jj);
    }
    // Eliminate column j from the inverse Hessian of the free weights.
    const VectorXd col = hinv.col(jj);
    hinv -= col * col.transpose() / d;
  }

  QuantMetrics metrics;
  metrics.layer_error = reference_layer_error(w, w_hat, x);
  std::vector<ReservedWeight> reserved;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (mask(r, c))
        reserved.push_back({static_cast<std::uint32_t>(r),
                            static_cast<std::uint32_t>(c), w_hat(r, c)});
  return QuantResult{std::move(codes), g, mask, std::move(reserved), metrics,
                     std::move(w_hat)};
}

}  // namespace septq::oracles
