#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "slim/error.hpp"
#include "slim/numerics.hpp"

using slim::Matrix;

TEST(Matrix, ConstructionAndShapeChecks) {
    Matrix m{{1, 2, 3}, {4, 5, 6}};
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_DOUBLE_EQ(m(1, 2), 6.0);
    EXPECT_THROW(Matrix(2, 2, std::vector<double>(3)), slim::ShapeError);
    EXPECT_THROW((Matrix{{1, 2}, {3}}), slim::ShapeError);
    EXPECT_EQ(m.transposed().transposed(), m);
}

TEST(Matrix, BlocksAndSelection) {
    const Matrix m = oracle::random_matrix(5, 4, 1);
    const Matrix rb = m.row_block(1, 3);
    const Matrix cb = m.col_block(2, 2);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(rb(i, j), m(i + 1, j));
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(cb(i, j), m(i, j + 2));
    const std::vector<std::size_t> idx{3, 0};
    const Matrix sr = m.select_rows(idx);
    const Matrix sc = m.select_cols(idx);
    EXPECT_EQ(sr(0, 1), m(3, 1));
    EXPECT_EQ(sc(4, 1), m(4, 0));
    Matrix grown = m.row_block(0, 2);
    grown.append_rows(m.row_block(2, 3));
    EXPECT_EQ(grown, m);
}

TEST(Matmul, MatchesNaiveOracle) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const std::size_t m = 1 + seed % 7, k = 1 + (seed * 3) % 11, n = 1 + (seed * 5) % 9;
        const Matrix a = oracle::random_matrix(m, k, seed);
        const Matrix b = oracle::random_matrix(k, n, seed + 100);
        EXPECT_LT(slim::max_abs_diff(slim::matmul(a, b), oracle::matmul(a, b)), 1e-12);
        EXPECT_EQ(slim::matmul_bt(a, b.transposed()), slim::matmul(a, b));
    }
    EXPECT_THROW(slim::matmul(Matrix(2, 3), Matrix(2, 3)), slim::ShapeError);
}

TEST(Elementwise, Arithmetic) {
    const Matrix a{{1, -2}, {3, 4}};
    const Matrix b{{0.5, 2}, {-1, 1}};
    EXPECT_EQ(slim::add(a, b), (Matrix{{1.5, 0}, {2, 5}}));
    EXPECT_EQ(slim::subtract(a, b), (Matrix{{0.5, -4}, {4, 3}}));
    EXPECT_EQ(slim::hadamard(a, b), (Matrix{{0.5, -4}, {-3, 4}}));
    EXPECT_EQ(slim::scale(a, 2.0), (Matrix{{2, -4}, {6, 8}}));
    EXPECT_DOUBLE_EQ(slim::max_abs_diff(a, b), 4.0);
    EXPECT_DOUBLE_EQ(slim::mean_squared_error(a, b), (0.25 + 16 + 16 + 9) / 4.0);
    EXPECT_DOUBLE_EQ(a.max_abs(), 4.0);
    EXPECT_DOUBLE_EQ(a.frobenius_norm(), std::sqrt(30.0));
}

TEST(Activations, SiluAndSoftmax) {
    for (double x : {-30.0, -2.5, 0.0, 0.7, 40.0}) {
        EXPECT_NEAR(slim::silu(x), oracle::silu(x), 1e-15);
    }
    const Matrix v{{1000, 1001, 999}, {0, 0, 0}};
    const Matrix s = slim::softmax(v);
    for (std::size_t r = 0; r < 2; ++r) {
        double sum = 0;
        for (double x : s.row(r)) sum += x;
        EXPECT_NEAR(sum, 1.0, 1e-15);
    }
    EXPECT_NEAR(s(1, 0), 1.0 / 3.0, 1e-15);
    EXPECT_GT(s(0, 1), s(0, 0));
    const Matrix sc = slim::softmax(v, slim::Axis::kCol);
    EXPECT_NEAR(sc(0, 0) + sc(1, 0), 1.0, 1e-15);
}

TEST(Rounding, HalfAwayFromZero) {
    EXPECT_EQ(slim::round_half_away(2.5), 3.0);
    EXPECT_EQ(slim::round_half_away(-2.5), -3.0);
    EXPECT_EQ(slim::round_half_away(0.49), 0.0);
}

TEST(Quantize, RoundTripErrorBoundedByHalfStep) {
    const Matrix m = oracle::random_matrix(6, 33, 9);
    const auto q = slim::quantize_i8(m);
    const Matrix back = slim::dequantize(q);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            EXPECT_LE(std::abs(back(r, c) - m(r, c)), q.scales[r] / 2 + 1e-15);
            EXPECT_LE(std::abs(static_cast<int>(q.at(r, c))), 127);
        }
    }
    const auto z = slim::quantize_i8(Matrix(2, 3));
    EXPECT_EQ(z.scales[0], 1.0);
}

TEST(Svd, SingularValuesMatchGramEigenvalues) {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const std::size_t rows = 6 + seed, cols = 3 + seed % 4;
        const Matrix a = oracle::random_matrix(rows, cols, seed + 7);
        const std::size_t r = cols;
        const auto svd = slim::truncated_svd(a, r);
        const auto ev = oracle::symmetric_eigenvalues(oracle::matmul(oracle::transpose(a), a));
        ASSERT_EQ(svd.s.size(), r);
        for (std::size_t i = 0; i < r; ++i) {
            EXPECT_NEAR(svd.s[i], std::sqrt(std::max(ev[i], 0.0)), 1e-9 * (1 + svd.s[0]));
            if (i > 0) EXPECT_LE(svd.s[i], svd.s[i - 1]);
        }
        EXPECT_LT(slim::max_abs_diff(slim::reconstruct(svd), a), 1e-10);
        // Orthonormal factors.
        const Matrix utu = oracle::matmul(oracle::transpose(svd.u), svd.u);
        const Matrix vtv = oracle::matmul(oracle::transpose(svd.v), svd.v);
        EXPECT_LT(slim::max_abs_diff(utu, Matrix::identity(r)), 1e-10);
        EXPECT_LT(slim::max_abs_diff(vtv, Matrix::identity(r)), 1e-10);
    }
}

TEST(Svd, TruncationErrorIsTailEnergy) {
    const Matrix a = oracle::random_matrix(12, 8, 3);
    const auto full = slim::truncated_svd(a, 8);
    const auto trunc = slim::truncated_svd(a, 3);
    double tail = 0.0;
    for (std::size_t i = 3; i < 8; ++i) tail += full.s[i] * full.s[i];
    const double err = slim::subtract(a, slim::reconstruct(trunc)).frobenius_norm();
    EXPECT_NEAR(err * err, tail, 1e-9 * tail);
}

TEST(Svd, RankOutOfRange) {
    const Matrix a = oracle::random_matrix(4, 3, 1);
    EXPECT_THROW(slim::truncated_svd(a, 0), slim::RankError);
    EXPECT_THROW(slim::truncated_svd(a, 4), slim::RankError);
}
