#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "septq/engine.hpp"
#include "septq/error.hpp"
#include "septq/importance.hpp"
#include "septq/instances.hpp"
#include "test_util.hpp"

using namespace septq;

namespace {

StrategyConfig with_p(double p, MaskScope scope = MaskScope::global, std::size_t block = 128) {
  StrategyConfig cfg;
  cfg.p = p;
  cfg.scope = scope;
  cfg.block = block;
  return cfg;
}

ScoreMatrix random_scores(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  instances::Rng rng(seed);
  std::lognormal_distribution<double> dist(0.0, 2.0);
  Matrix s(rows, cols);
  for (double& v : s.values()) v = dist(rng);
  return ScoreMatrix(std::move(s));
}

}  // namespace

TEST(ScoreAll, DiagonalClosedForm) {
  const QuantGrid g = QuantGrid::per_matrix(2, 0.5, 1);
  const std::vector<double> diag{0.5};
  const ScoreMatrix s = score_all(Matrix{{0.7}}, diag, g);
  EXPECT_NEAR(s(0, 0), 0.04, 1e-15);
}

TEST(ScoreAll, AlignedWeightScoresZero) {
  const QuantGrid g = QuantGrid::per_matrix(2, 0.5, 1);
  const std::vector<double> diag{0.3, 0.8};
  const ScoreMatrix s = score_all(Matrix{{0.5, -0.5}}, diag, g);
  EXPECT_EQ(s(0, 0), 0.0);
  EXPECT_EQ(s(0, 1), 0.0);
}

TEST(ScoreAll, NonPositiveDiagonalIsSingular) {
  const QuantGrid g = QuantGrid::per_matrix(2, 0.5, 1);
  const std::vector<double> diag{0.3, 0.0};
  EXPECT_THROW(score_all(Matrix{{0.1, 0.2}}, diag, g), SingularMatrix);
}

TEST(ScoreAll, ShapeMismatch) {
  const QuantGrid g = QuantGrid::per_matrix(2, 0.5, 1);
  const std::vector<double> diag{0.3};
  EXPECT_THROW(score_all(Matrix{{0.1, 0.2}}, diag, g), DimensionMismatch);
}

TEST(SelectMask, ZeroPercent) {
  const MaskMatrix m = select_mask(random_scores(8, 8, 1), with_p(0.0));
  EXPECT_EQ(m, MaskMatrix(8, 8));
}

TEST(SelectMask, HundredPercent) {
  const MaskMatrix m = select_mask(random_scores(8, 8, 2), with_p(100.0));
  EXPECT_EQ(m, MaskMatrix(8, 8, true));
}

TEST(SelectMask, UniqueTopEntry) {
  Matrix s(4, 4, 1.0);
  s(2, 1) = 5.0;
  const MaskMatrix m = select_mask(ScoreMatrix(s), with_p(6.25));
  EXPECT_EQ(m.reserved_count(), 1u);
  EXPECT_TRUE(m(2, 1));
}

TEST(SelectMask, TiesGoToRowMajorOrder) {
  const MaskMatrix m = select_mask(ScoreMatrix(Matrix(4, 4, 1.0)), with_p(12.5));
  EXPECT_TRUE(m(0, 0));
  EXPECT_TRUE(m(0, 1));
  EXPECT_EQ(m.reserved_count(), 2u);
}

TEST(SelectMask, CountAndTopKProperty) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const ScoreMatrix s = random_scores(13, 11, 300 + seed);
    const double p = 0.5 + 3.7 * static_cast<double>(seed);
    const MaskMatrix m = select_mask(s, with_p(p));
    EXPECT_EQ(m.reserved_count(), reserve_count(p, 13 * 11));
    double min_in = INFINITY, max_out = -INFINITY;
    for (std::size_t r = 0; r < 13; ++r)
      for (std::size_t c = 0; c < 11; ++c)
        if (m(r, c)) min_in = std::min(min_in, s(r, c));
        else max_out = std::max(max_out, s(r, c));
    if (m.reserved_count() > 0 && m.reserved_count() < 143) {
      EXPECT_GE(min_in, max_out);
    }
  }
}

TEST(SelectMask, InvariantUnderPositiveScaling) {
  const ScoreMatrix s = random_scores(10, 10, 3);
  Matrix scaled = s.matrix();
  for (double& v : scaled.values()) v *= 7.5;
  EXPECT_EQ(select_mask(s, with_p(5.0)), select_mask(ScoreMatrix(scaled), with_p(5.0)));
}

TEST(SelectMaskLocal, TrivialCases) {
  const ScoreMatrix s = random_scores(10, 10, 4);
  EXPECT_EQ(select_mask_local(s, with_p(0.0, MaskScope::local, 4)), MaskMatrix(10, 10));
  EXPECT_EQ(select_mask_local(s, with_p(100.0, MaskScope::local, 4)), MaskMatrix(10, 10, true));
  Matrix one(4, 4, 1.0);
  one(3, 3) = 2.0;
  const MaskMatrix m = select_mask_local(ScoreMatrix(one), with_p(6.25, MaskScope::local, 4));
  EXPECT_EQ(m.reserved_count(), 1u);
  EXPECT_TRUE(m(3, 3));
}

TEST(SelectMaskLocal, TotalEqualsGlobalBudget) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ScoreMatrix s = random_scores(37, 29, 400 + seed);
    const double p = 1.0 + 2.3 * static_cast<double>(seed);
    EXPECT_EQ(select_mask_local(s, with_p(p, MaskScope::local, 8)).reserved_count(),
              reserve_count(p, 37 * 29));
  }
}

TEST(SelectMaskLocal, ConcentratedScoresDiffer) {
  instances::Rng rng(5);
  std::uniform_real_distribution<double> small(0.0, 1e-3), big(1.0, 2.0);
  Matrix s(256, 256);
  for (std::size_t r = 0; r < 256; ++r)
    for (std::size_t c = 0; c < 256; ++c)
      s(r, c) = (r < 128 && c < 128) ? big(rng) : small(rng);
  const ScoreMatrix scores(s);
  const MaskMatrix global = select_mask(scores, with_p(1.0));
  const MaskMatrix local = select_mask_local(scores, with_p(1.0, MaskScope::local, 128));
  EXPECT_NE(global, local);
  const Matrix gsum = mask_block_sums(global, 128);
  EXPECT_EQ(gsum(0, 0), static_cast<double>(global.reserved_count()));
  const Matrix lsum = mask_block_sums(local, 128);
  EXPECT_GT(lsum(1, 1), 0.0);
  EXPECT_GT(score_mass(scores, global), score_mass(scores, local));
}

TEST(SelectMaskLocal, GlobalMassNeverSmaller) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ScoreMatrix s = random_scores(40, 40, 500 + seed);
    const double p = 0.5 + static_cast<double>(seed);
    EXPECT_GE(score_mass(s, select_mask(s, with_p(p))),
              score_mass(s, select_mask_local(s, with_p(p, MaskScope::local, 16))));
  }
}

TEST(DynamicMask, ZeroPercent) {
  const Matrix w = test::random_matrix(6, 6, 6);
  const Matrix hinv = spd_inverse(hessian(test::random_matrix(6, 20, 7), 0.01));
  const QuantGrid g = grid_search(w, 2, Granularity::per_matrix, 50);
  EXPECT_EQ(dynamic_mask_trace(w, hinv, g, with_p(0.0)), MaskMatrix(6, 6));
}

// With a diagonal Hessian no column feeds error into another, so re-scoring
// before each column sees the original weights.
TEST(DynamicMask, DiagonalHessianMatchesStaticPerColumn) {
  const Matrix w = test::random_matrix(20, 8, 8);
  Matrix hinv(8, 8);
  for (std::size_t c = 0; c < 8; ++c) hinv(c, c) = 0.2 + 0.1 * static_cast<double>(c);
  const QuantGrid g = grid_search(w, 2, Granularity::per_matrix, 50);
  const StrategyConfig cfg = with_p(10.0);
  const ScoreMatrix scores = score_all(w, hinv.diagonal(), g);
  MaskMatrix expected(20, 8);
  for (std::size_t c = 0; c < 8; ++c)
    select_column(scores.matrix().column(c), column_quota(cfg.p, 20, c), expected, c);
  EXPECT_EQ(dynamic_mask_trace(w, hinv, g, cfg, 3), expected);
}

TEST(DynamicMask, ColumnQuotas) {
  std::size_t total = 0;
  for (std::size_t c = 0; c < 16; ++c) {
    const std::size_t q = column_quota(1.0, 16, c);
    EXPECT_LE(q, 1u);
    total += q;
  }
  EXPECT_EQ(total, reserve_count(1.0, 256));
  for (std::size_t c = 0; c < 10; ++c) EXPECT_EQ(column_quota(10.0, 30, c), 3u);
  EXPECT_EQ(column_quota(100.0, 7, 4), 7u);
}

TEST(DynamicMask, SlowerThanStaticScoring) {
  const Matrix w = test::random_matrix(64, 64, 9);
  const Matrix hinv = spd_inverse(hessian(test::random_matrix(64, 128, 10), 0.01));
  const QuantGrid g = grid_search(w, 2, Granularity::per_matrix, 100);
  const StrategyConfig cfg = with_p(1.0);
  using Clock = std::chrono::steady_clock;
  double best_static = INFINITY, best_dynamic = INFINITY;
  for (int rep = 0; rep < 3; ++rep) {
    auto t0 = Clock::now();
    const MaskMatrix a = select_mask(score_all(w, hinv.diagonal(), g), cfg);
    auto t1 = Clock::now();
    const MaskMatrix b = dynamic_mask_trace(w, hinv, g, cfg);
    auto t2 = Clock::now();
    best_static = std::min(best_static, std::chrono::duration<double>(t1 - t0).count());
    best_dynamic = std::min(best_dynamic, std::chrono::duration<double>(t2 - t1).count());
    EXPECT_EQ(a.reserved_count(), 64u * 64u / 100u + 1u);
    EXPECT_EQ(b.reserved_count(), a.reserved_count());
  }
  EXPECT_GT(best_dynamic, best_static);
}

TEST(Histogram, EqualScoresShareOneBin) {
  const ScoreMatrix s(Matrix(5, 5, 0.3));
  const ScoreHistogram h = score_histogram(s, log_bin_edges(s, 10));
  EXPECT_EQ(std::count(h.counts.begin(), h.counts.end(), 25u), 1);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::size_t{0}), 25u);
}

TEST(Histogram, LongTailMassInTopBin) {
  Matrix m(1, 1000, 1e-9);
  m(0, 500) = 0.1;
  const ScoreMatrix s(m);
  const ScoreHistogram h = score_histogram(s, log_bin_edges(s, 20));
  EXPECT_EQ(h.counts.back(), 1u);
  EXPECT_GT(h.mass_fractions.back(), 0.99);
}

TEST(Histogram, AllZeroScores) {
  const ScoreMatrix s(Matrix(3, 3));
  const ScoreHistogram h = score_histogram(s, log_bin_edges(s, 4));
  EXPECT_EQ(h.counts.front(), 9u);
  for (double f : h.mass_fractions) EXPECT_EQ(f, 0.0);
}

TEST(Histogram, MatchesAccumulationLoop) {
  const ScoreMatrix s = random_scores(30, 30, 11);
  const std::vector<double> edges = log_bin_edges(s, 12);
  const ScoreHistogram h = score_histogram(s, edges);
  const std::size_t bins = edges.size() - 1;
  std::vector<std::size_t> counts(bins, 0);
  std::vector<double> mass(bins, 0.0);
  double total = 0.0;
  for (double v : s.matrix().values()) {
    std::size_t k = 0;
    while (k + 1 < bins && v >= edges[k + 1]) ++k;
    ++counts[k];
    mass[k] += v;
    total += v;
  }
  EXPECT_EQ(h.counts, counts);
  for (std::size_t k = 0; k < bins; ++k) EXPECT_NEAR(h.mass_fractions[k], mass[k] / total, 1e-12);
}

TEST(Histogram, RejectsUnsortedEdges) {
  const std::vector<double> edges{0.0, 2.0, 1.0};
  EXPECT_THROW(score_histogram(random_scores(2, 2, 12), edges), ConfigError);
}

TEST(BlockSums, ZeroAndFullMasks) {
  EXPECT_EQ(mask_block_sums(MaskMatrix(10, 7), 4), Matrix(3, 2));
  EXPECT_EQ(mask_block_sums(MaskMatrix(10, 7, true), 4), (Matrix{{16, 12}, {16, 12}, {8, 6}}));
}

TEST(BlockSums, MatchesLoop) {
  const MaskMatrix m = select_mask(random_scores(33, 45, 13), with_p(10.0));
  const Matrix sums = mask_block_sums(m, 8);
  for (std::size_t br = 0; br < sums.rows(); ++br)
    for (std::size_t bc = 0; bc < sums.cols(); ++bc) {
      double n = 0;
      for (std::size_t r = br * 8; r < std::min<std::size_t>(33, br * 8 + 8); ++r)
        for (std::size_t c = bc * 8; c < std::min<std::size_t>(45, bc * 8 + 8); ++c) n += m(r, c);
      EXPECT_EQ(sums(br, bc), n);
    }
}

TEST(StrategyNames, Parse) {
  EXPECT_EQ(parse_mask_timing("dynamic"), MaskTiming::dynamic_scores);
  EXPECT_EQ(parse_mask_scope("local"), MaskScope::local);
  EXPECT_THROW(parse_mask_scope("regional"), ConfigError);
}
