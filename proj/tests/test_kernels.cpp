#include <gtest/gtest.h>

#include <vector>

#include "septq/kernels.hpp"
#include "septq/quant_grid.hpp"
#include "test_util.hpp"

// The omp kernels must reproduce their serial twins bit for bit, whatever the
// thread count, so that engine results do not depend on the machine.

using namespace septq;
namespace k = septq::kernels;

TEST(Kernels, GemmBitwise) {
  const Matrix a = test::random_matrix(37, 23, 21);
  const Matrix b = test::random_matrix(23, 41, 22);
  Matrix s(37, 41), o(37, 41);
  k::serial::gemm(a, b, s);
  k::omp::gemm(a, b, o);
  EXPECT_EQ(s, o);
  EXPECT_LT(max_abs_difference(s, test::loop_matmul(a, b)), 1e-12);
}

TEST(Kernels, GramBitwise) {
  const Matrix x = test::random_matrix(29, 70, 23);
  Matrix s(29, 29), o(29, 29);
  k::serial::gram(x, 2.0, s);
  k::omp::gram(x, 2.0, o);
  EXPECT_EQ(s, o);
  EXPECT_EQ(s, s.transposed());
}

TEST(Kernels, Rank1Bitwise) {
  Matrix s = test::random_matrix(19, 33, 24);
  Matrix o = s;
  const Matrix coeff = test::random_matrix(1, 19, 25);
  const Matrix vec = test::random_matrix(1, 20, 26);
  k::serial::rank1_update(s, 13, 33, coeff.row(0), vec.row(0));
  k::omp::rank1_update(o, 13, 33, coeff.row(0), vec.row(0));
  EXPECT_EQ(s, o);
}

TEST(Kernels, Rank1TouchesOnlyRange) {
  Matrix w(2, 4, 1.0);
  const std::vector<double> coeff{1.0, 2.0};
  const std::vector<double> vec{0.5, 0.25};
  k::serial::rank1_update(w, 1, 3, coeff, vec);
  EXPECT_EQ(w, (Matrix{{1.0, 0.5, 0.75, 1.0}, {1.0, 0.0, 0.5, 1.0}}));
}

TEST(Kernels, BlockUpdateBitwise) {
  Matrix s = test::random_matrix(17, 40, 27);
  Matrix o = s;
  const Matrix err = test::random_matrix(17, 8, 28);
  const Matrix factor = test::random_matrix(40, 40, 29);
  k::serial::block_update(s, 16, err, factor, 8);
  k::omp::block_update(o, 16, err, factor, 8);
  EXPECT_EQ(s, o);
}

TEST(Kernels, ImportanceScoresBitwise) {
  const Matrix w = test::random_matrix(31, 12, 30);
  std::vector<double> diag(12);
  for (std::size_t c = 0; c < 12; ++c) diag[c] = 0.1 + 0.05 * static_cast<double>(c);
  const QuantGrid g = QuantGrid::per_matrix(2, 0.7, 1);
  Matrix s(31, 12), o(31, 12);
  k::serial::importance_scores(w, diag, g, s);
  k::omp::importance_scores(w, diag, g, o);
  EXPECT_EQ(s, o);
}

TEST(Kernels, CandidateErrorsBitwise) {
  const Matrix w = test::random_matrix(1, 500, 31);
  std::vector<k::GridCandidate> cands;
  for (int i = 1; i <= 50; ++i) cands.push_back({0.02 * i, i % 4});
  std::vector<double> s(cands.size()), o(cands.size());
  k::serial::candidate_errors(w.row(0), cands, 3, s);
  k::omp::candidate_errors(w.row(0), cands, 3, o);
  EXPECT_EQ(s, o);
}

TEST(Kernels, RowNormsBitwise) {
  const Matrix m = test::random_matrix(45, 9, 32);
  std::vector<double> s(45), o(45);
  k::serial::row_squared_norms(m, s);
  k::omp::row_squared_norms(m, o);
  EXPECT_EQ(s, o);
}
