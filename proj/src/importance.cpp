#include "septq/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "septq/error.hpp"
#include "septq/kernels.hpp"
#include "septq/matrix_io.hpp"

namespace septq {
namespace {

struct Candidate {
  double score;
  std::size_t index;  // row-major position, the tie-breaker
};

bool ranks_before(const Candidate& a, const Candidate& b) noexcept {
  if (a.score != b.score) return a.score > b.score;
  return a.index < b.index;
}

// Moves the `k` best candidates to the front.
void take_top(std::vector<Candidate>& cands, std::size_t k) {
  k = std::min(k, cands.size());
  if (k == 0) return;
  std::nth_element(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   cands.end(), ranks_before);
}

}  // namespace

MaskMatrix::MaskMatrix(std::size_t rows, std::size_t cols, bool fill)
    : rows_(rows), cols_(cols), reserved_(fill ? rows * cols : 0),
      bits_(rows * cols, fill ? 1 : 0) {
  if (rows == 0 || cols == 0)
    throw DimensionMismatch("mask must have at least one row and column");
}

void MaskMatrix::set(std::size_t r, std::size_t c, bool reserved) noexcept {
  auto& b = bits_[r * cols_ + c];
  if ((b != 0) == reserved) return;
  b = reserved ? 1 : 0;
  reserved ? ++reserved_ : --reserved_;
}

std::string_view to_string(MaskTiming t) noexcept {
  return t == MaskTiming::static_scores ? "static" : "dynamic";
}

std::string_view to_string(MaskScope s) noexcept {
  return s == MaskScope::global ? "global" : "local";
}

MaskTiming parse_mask_timing(std::string_view s) {
  if (s == "static") return MaskTiming::static_scores;
  if (s == "dynamic") return MaskTiming::dynamic_scores;
  throw ConfigError("unknown strategy timing '" + std::string(s) +
                    "' (expected static or dynamic)");
}

MaskScope parse_mask_scope(std::string_view s) {
  if (s == "global") return MaskScope::global;
  if (s == "local") return MaskScope::local;
  throw ConfigError("unknown strategy scope '" + std::string(s) +
                    "' (expected global or local)");
}

void StrategyConfig::validate() const {
  if (!(p >= 0.0 && p <= 100.0))
    throw ConfigError("reservation ratio p must lie in [0, 100]");
  if (block == 0) throw ConfigError("local block size must be positive");
}

std::size_t reserve_count(double p, std::size_t n) {
  return static_cast<std::size_t>(std::llround(p / 100.0 * static_cast<double>(n)));
}

ScoreMatrix score_all(const Matrix& w, std::span<const double> hinv_diag,
                      const QuantGrid& g) {
  if (hinv_diag.size() != w.cols())
    throw DimensionMismatch("score_all: need one inverse-Hessian diagonal entry per column");
  for (std::size_t c = 0; c < hinv_diag.size(); ++c)
    if (!(hinv_diag[c] > 0.0))
      throw SingularMatrix("inverse-Hessian diagonal entry " + std::to_string(c) +
                           " is not positive");
  g.validate(w.rows());
  Matrix out(w.rows(), w.cols());
  kernels::omp::importance_scores(w, hinv_diag, g, out);
  return ScoreMatrix(std::move(out));
}

MaskMatrix select_mask(const ScoreMatrix& scores, const StrategyConfig& cfg) {
  cfg.validate();
  const std::size_t n = scores.rows() * scores.cols();
  MaskMatrix mask(scores.rows(), scores.cols());
  const std::size_t k = reserve_count(cfg.p, n);
  if (k == 0) return mask;

  std::vector<Candidate> cands(n);
  const auto values = scores.matrix().values();
  for (std::size_t i = 0; i < n; ++i) cands[i] = {values[i], i};
  take_top(cands, k);
  for (std::size_t t = 0; t < k; ++t)
    mask.set(cands[t].index / scores.cols(), cands[t].index % scores.cols(), true);
  return mask;
}

MaskMatrix select_mask_local(const ScoreMatrix& scores, const StrategyConfig& cfg) {
  cfg.validate();
  const std::size_t rows = scores.rows();
  const std::size_t cols = scores.cols();
  const std::size_t b = cfg.block;
  const std::size_t tile_rows = (rows + b - 1) / b;
  const std::size_t tile_cols = (cols + b - 1) / b;
  const std::size_t tiles = tile_rows * tile_cols;

  auto tile_area = [&](std::size_t t) {
    const std::size_t tr = t / tile_cols;
    const std::size_t tc = t % tile_cols;
    return (std::min(rows, (tr + 1) * b) - tr * b) *
           (std::min(cols, (tc + 1) * b) - tc * b);
  };

  // Largest-remainder apportionment of the global budget over the tiles.
  std::vector<std::size_t> quota(tiles);
  std::vector<double> frac(tiles);
  std::size_t assigned = 0;
  for (std::size_t t = 0; t < tiles; ++t) {
    const double ideal = cfg.p / 100.0 * static_cast<double>(tile_area(t));
    quota[t] = static_cast<std::size_t>(std::floor(ideal));
    frac[t] = ideal - std::floor(ideal);
    assigned += quota[t];
  }
  const std::size_t budget = reserve_count(cfg.p, rows * cols);
  std::vector<std::size_t> order(tiles);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t c) { return frac[a] > frac[c]; });
  for (std::size_t i = 0; assigned < budget && i < 2 * tiles; ++i) {
    const std::size_t t = order[i % tiles];
    if (quota[t] < tile_area(t)) {
      ++quota[t];
      ++assigned;
    }
  }

  MaskMatrix mask(rows, cols);
  std::vector<Candidate> cands;
  for (std::size_t t = 0; t < tiles; ++t) {
    if (quota[t] == 0) continue;
    const std::size_t r0 = (t / tile_cols) * b;
    const std::size_t c0 = (t % tile_cols) * b;
    cands.clear();
    for (std::size_t r = r0; r < std::min(rows, r0 + b); ++r)
      for (std::size_t c = c0; c < std::min(cols, c0 + b); ++c)
        cands.push_back({scores(r, c), r * cols + c});
    take_top(cands, quota[t]);
    for (std::size_t i = 0; i < quota[t]; ++i)
      mask.set(cands[i].index / cols, cands[i].index % cols, true);
  }
  return mask;
}

MaskMatrix select_mask_for(const ScoreMatrix& scores, const StrategyConfig& cfg) {
  return cfg.scope == MaskScope::global ? select_mask(scores, cfg)
                                        : select_mask_local(scores, cfg);
}

std::size_t column_quota(double p, std::size_t rows, std::size_t col) {
  return reserve_count(p, rows * (col + 1)) - reserve_count(p, rows * col);
}

void select_column(std::span<const double> column_scores, std::size_t count,
                   MaskMatrix& mask, std::size_t col) {
  const std::size_t k = std::min(count, column_scores.size());
  if (k == 0) return;
  std::vector<Candidate> cands(column_scores.size());
  for (std::size_t r = 0; r < column_scores.size(); ++r) cands[r] = {column_scores[r], r};
  take_top(cands, k);
  for (std::size_t i = 0; i < k; ++i) mask.set(cands[i].index, col, true);
}

double score_mass(const ScoreMatrix& scores, const MaskMatrix& mask) {
  if (scores.rows() != mask.rows() || scores.cols() != mask.cols())
    throw DimensionMismatch("score_mass: shape mismatch");
  double s = 0.0;
  for (std::size_t r = 0; r < scores.rows(); ++r)
    for (std::size_t c = 0; c < scores.cols(); ++c)
      if (mask(r, c)) s += scores(r, c);
  return s;
}

ScoreHistogram score_histogram(const ScoreMatrix& scores,
                               std::span<const double> bin_edges) {
  if (bin_edges.size() < 2)
    throw ConfigError("histogram needs at least two bin edges");
  for (std::size_t i = 1; i < bin_edges.size(); ++i)
    if (!(bin_edges[i] > bin_edges[i - 1]))
      throw ConfigError("histogram bin edges must be strictly increasing");

  const std::size_t bins = bin_edges.size() - 1;
  ScoreHistogram h;
  h.edges.assign(bin_edges.begin(), bin_edges.end());
  h.counts.assign(bins, 0);
  std::vector<double> mass(bins, 0.0);
  double total = 0.0;
  for (const double s : scores.matrix().values()) {
    const auto it = std::upper_bound(bin_edges.begin(), bin_edges.end(), s);
    std::size_t k = it == bin_edges.begin() ? 0 : static_cast<std::size_t>(it - bin_edges.begin()) - 1;
    k = std::min(k, bins - 1);
    ++h.counts[k];
    mass[k] += s;
    total += s;
  }
  h.mass_fractions.assign(bins, 0.0);
  if (total > 0.0)
    for (std::size_t k = 0; k < bins; ++k) h.mass_fractions[k] = mass[k] / total;
  return h;
}

std::vector<double> log_bin_edges(const ScoreMatrix& scores, std::size_t bins) {
  if (bins < 2) throw ConfigError("need at least two histogram bins");
  double lo = 0.0;
  double hi = 0.0;
  for (const double s : scores.matrix().values()) {
    if (s > 0.0 && (lo == 0.0 || s < lo)) lo = s;
    hi = std::max(hi, s);
  }
  if (hi == 0.0) return {0.0, 1.0};
  if (lo == hi) return {0.0, hi, 2.0 * hi};

  std::vector<double> edges{0.0};
  const double log_lo = std::log10(lo);
  const double step = (std::log10(hi) - log_lo) / static_cast<double>(bins - 1);
  for (std::size_t k = 0; k < bins; ++k)
    edges.push_back(k + 1 == bins ? hi : std::pow(10.0, log_lo + step * static_cast<double>(k)));
  return edges;
}

Matrix mask_block_sums(const MaskMatrix& mask, std::size_t block) {
  if (block == 0) throw ConfigError("block size must be positive");
  Matrix sums((mask.rows() + block - 1) / block, (mask.cols() + block - 1) / block);
  for (std::size_t r = 0; r < mask.rows(); ++r)
    for (std::size_t c = 0; c < mask.cols(); ++c)
      if (mask(r, c)) sums(r / block, c / block) += 1.0;
  return sums;
}

std::string histogram_csv(const ScoreHistogram& h) {
  std::string out = "bin_low,bin_high,count,mass_fraction\n";
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    out += format_double(h.edges[k]) + ',' + format_double(h.edges[k + 1]) + ',' +
           std::to_string(h.counts[k]) + ',' + format_double(h.mass_fractions[k]) + '\n';
  }
  return out;
}

std::string block_sums_csv(const Matrix& sums) {
  std::string out = "block_row,block_col,sum\n";
  for (std::size_t r = 0; r < sums.rows(); ++r)
    for (std::size_t c = 0; c < sums.cols(); ++c)
      out += std::to_string(r) + ',' + std::to_string(c) + ',' +
             format_double(sums(r, c)) + '\n';
  return out;
}

}  // namespace septq
