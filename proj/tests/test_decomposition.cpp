#include <gtest/gtest.h>

#include "hopfattn/attention.hpp"
#include "hopfattn/decomposition.hpp"
#include "hopfattn/random.hpp"

using namespace hopfattn;

TEST(Split, HandComputedExample) {
  const auto p = split(Matrix::from_rows({{1, 2}, {0, 1}}));
  EXPECT_EQ(p.sym, Matrix::from_rows({{1, 1}, {1, 1}}));
  EXPECT_EQ(p.skew, Matrix::from_rows({{0, 1}, {-1, 0}}));
}

TEST(Split, SymmetricAndAntisymmetricInputs) {
  const auto parts = gen_coupling_parts(6, Seed{1});
  EXPECT_EQ(split(parts.sym).skew, Matrix(6, 6));
  EXPECT_EQ(split(parts.sym).sym, parts.sym);
  EXPECT_EQ(split(parts.skew).sym, Matrix(6, 6));
  EXPECT_EQ(split(parts.skew).skew, parts.skew);
}

TEST(Split, RecombinesAndIsExactlySymmetric) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const Matrix w = gen_feature_map(7, 7, Seed{s});
    const auto p = split(w);
    EXPECT_LE(relative_frobenius_error(p.sym + p.skew, w), 1e-15);
    EXPECT_EQ(p.sym, transpose(p.sym));
    for (std::size_t i = 0; i < 7; ++i)
      for (std::size_t j = 0; j < 7; ++j) EXPECT_EQ(p.skew(i, j), -p.skew(j, i));
    // Projection property.
    EXPECT_EQ(split(p.sym).skew, Matrix(7, 7));
    EXPECT_EQ(split(p.skew).sym, Matrix(7, 7));
  }
}

TEST(Split, NotSquare) {
  try {
    split(Matrix(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSquare);
  }
}

TEST(EtaH, Extremes) {
  const auto parts = gen_coupling_parts(10, Seed{3});
  EXPECT_DOUBLE_EQ(eta_H(parts.sym), 1.0);
  EXPECT_DOUBLE_EQ(eta_H(parts.skew), -1.0);
}

TEST(EtaH, IgnoresDiagonal) {
  Matrix j = Matrix::from_rows({{5, 1}, {1, -9}});
  EXPECT_DOUBLE_EQ(eta_H(j), 1.0);
  j = Matrix::from_rows({{0, 2}, {1, 0}});
  // <J_ij J_ji> = 2, <J_ij^2> = (4 + 1)/2.
  EXPECT_DOUBLE_EQ(eta_H(j), 2.0 / 2.5);
}

TEST(EtaH, TransposeInvariant) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix j = gen_controlled_symmetry_coupling(15, 0.8, Seed{s});
    EXPECT_NEAR(eta_H(j), eta_H(transpose(j)), 1e-15);
  }
}

TEST(EtaH, EnsembleAtHalfAsymmetry) {
  double mean = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const double e = eta_H(gen_controlled_symmetry_coupling(200, 0.5, Seed{s}));
    EXPECT_NEAR(e, 0.6, 0.05);
    mean += e / 10.0;
  }
  EXPECT_NEAR(mean, 0.6, 0.02);
}

TEST(EtaH, Errors) {
  EXPECT_THROW(eta_H(Matrix(2, 3)), Error);
  try {
    eta_H(Matrix::identity(4));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateZeroCoupling);
  }
}

TEST(EtaM, Extremes) {
  const auto parts = gen_coupling_parts(5, Seed{4});
  EXPECT_DOUBLE_EQ(eta_M(parts.sym, Matrix(5, 5)), 1.0);
  EXPECT_DOUBLE_EQ(eta_M(Matrix(5, 5), parts.skew), -1.0);
}

TEST(EtaM, DirectArithmetic) {
  // ||sym||^2 = 3, ||skew||^2 = 1.
  const Matrix sym = Matrix::from_rows({{1, 1}, {1, 0}});
  const Matrix skew = Matrix::from_rows({{0, std::sqrt(0.5)}, {-std::sqrt(0.5), 0}});
  EXPECT_NEAR(eta_M(sym, skew), 0.5, 1e-15);
}

TEST(EtaM, ScaleInvariantAndBounded) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix x = gen_feature_map(6, 4, Seed{s});
    const Matrix w = gen_feature_map(4, 4, Seed{s + 500});
    const auto im = build_interaction(x, w, 1.0);
    const double e = eta_M(im);
    EXPECT_GE(e, -1.0);
    EXPECT_LE(e, 1.0);
    const auto im3 = build_interaction(x, w, 3.0);
    EXPECT_NEAR(eta_M(im3), e, 1e-13);
  }
}

TEST(EtaM, ZeroMatrixIsAnError) {
  try {
    eta_M(Matrix(3, 3), Matrix(3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateZeroMatrix);
  }
}
