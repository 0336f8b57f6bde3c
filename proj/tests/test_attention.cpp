#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hopfattn/attention.hpp"
#include "hopfattn/random.hpp"
#include "oracles.hpp"

using namespace hopfattn;

TEST(InteractionPerHead, IdentityWeights) {
  const auto w = HeadWeights::make(1, Matrix::identity(3), Matrix::identity(3));
  const auto heads = interaction_per_head(w);
  ASSERT_EQ(heads.size(), 1u);
  EXPECT_EQ(heads[0], Matrix::identity(3));
  EXPECT_DOUBLE_EQ(w.scale, 1.0 / std::sqrt(3.0));
}

TEST(InteractionPerHead, TwoHeadsMatchTripleLoop) {
  const std::size_t H = 2, d = 3, din = 4;
  const Matrix wq = gen_feature_map(H * d, din, Seed{1});
  const Matrix wk = gen_feature_map(H * d, din, Seed{2});
  const auto heads = interaction_per_head(HeadWeights::make(H, wq, wk));
  ASSERT_EQ(heads.size(), H);
  for (std::size_t h = 0; h < H; ++h) {
    Matrix expect(din, din);
    for (std::size_t i = 0; i < din; ++i)
      for (std::size_t j = 0; j < din; ++j)
        for (std::size_t m = 0; m < d; ++m) expect(i, j) += wq(h * d + m, i) * wk(h * d + m, j);
    EXPECT_LE(oracle::max_abs(heads[h], expect), 1e-14);
  }
}

TEST(InteractionPerHead, ShapeMismatch) {
  EXPECT_THROW(HeadWeights::make(2, Matrix(3, 4), Matrix(3, 4)), Error);  // 3 rows, 2 heads
  EXPECT_THROW(HeadWeights::make(1, Matrix(3, 4), Matrix(2, 4)), Error);
  HeadWeights w = HeadWeights::make(1, Matrix(2, 4), Matrix(2, 4));
  w.num_heads = 3;  // corrupt after validation
  EXPECT_THROW(interaction_per_head(w), Error);
}

TEST(BuildInteraction, SkewInputPassesThrough) {
  const Matrix w = Matrix::from_rows({{0, 1}, {-1, 0}});
  const auto im = build_interaction(Matrix::identity(2), w, 1.0);
  EXPECT_EQ(im.m, w);
  EXPECT_EQ(im.sym, Matrix(2, 2));
  EXPECT_EQ(im.skew, w);
}

TEST(BuildInteraction, IdentityIsPurelySymmetric) {
  const auto im = build_interaction(Matrix::identity(2), Matrix::identity(2), 1.0);
  EXPECT_EQ(im.m, Matrix::identity(2));
  EXPECT_EQ(im.sym, Matrix::identity(2));
  EXPECT_EQ(im.skew, Matrix(2, 2));
}

TEST(BuildInteraction, DecomposeThenRebuild) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Matrix x = gen_feature_map(4, 3, Seed{100 + s});
    const Matrix w = gen_feature_map(3, 3, Seed{200 + s});
    const double scale = 0.7;
    const auto im = build_interaction(x, w, scale);
    // X S X^T + X N X^T with S, N from W directly.
    Matrix sw(3, 3), nw(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        sw(i, j) = 0.5 * (w(i, j) + w(j, i));
        nw(i, j) = 0.5 * (w(i, j) - w(j, i));
      }
    const Matrix xs = oracle::product(oracle::product(x, oracle::scaled(sw, scale)), oracle::trans(x));
    const Matrix xn = oracle::product(oracle::product(x, oracle::scaled(nw, scale)), oracle::trans(x));
    EXPECT_LE(relative_frobenius_error(xs + xn, im.m), 1e-10);
    EXPECT_LE(relative_frobenius_error(xs, im.sym), 1e-10);
    EXPECT_LE(relative_frobenius_error(im.sym + im.skew, im.m), 1e-12);
    EXPECT_EQ(im.sym, transpose(im.sym));
    EXPECT_EQ(im.skew, -1.0 * transpose(im.skew));
  }
}

TEST(BuildInteraction, ShapeMismatch) {
  EXPECT_THROW(build_interaction(Matrix(4, 3), Matrix(2, 2), 1.0), Error);
  EXPECT_THROW(build_interaction(Matrix(4, 3), Matrix(3, 2), 1.0), Error);
}

TEST(RowSoftmax, UniformRow) {
  const Matrix p = row_softmax(Matrix(1, 3, 0.0));
  for (double v : p.data()) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(RowSoftmax, TwoEntryClosedForm) {
  const Matrix p = row_softmax(Matrix::from_rows({{1.0, 0.0}}));
  const double e = std::exp(1.0);
  EXPECT_NEAR(p(0, 0), e / (1 + e), 1e-15);
  EXPECT_NEAR(p(0, 1), 1 / (1 + e), 1e-15);
}

TEST(RowSoftmax, ShiftInvariance) {
  const Matrix m = gen_feature_map(5, 7, Seed{3});
  Matrix shifted = m;
  for (std::size_t r = 0; r < 5; ++r)
    for (double& v : shifted.row(r)) v += 13.5 * static_cast<double>(r + 1);
  EXPECT_LE(max_abs_diff(row_softmax(m), row_softmax(shifted)), 1e-12);
}

TEST(RowSoftmax, LargeLogitsStayFinite) {
  const Matrix p = row_softmax(Matrix::from_rows({{1000.0, 999.0, -1000.0}}));
  EXPECT_TRUE(all_finite(p));
  EXPECT_NEAR(p(0, 0) + p(0, 1) + p(0, 2), 1.0, 1e-15);
}

TEST(RowSoftmax, RejectsNonFinite) {
  Matrix m(1, 2);
  m(0, 1) = std::nan("");
  EXPECT_THROW(row_softmax(m), Error);
}

TEST(RowSoftmax, SimplexAndOrderProperty) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    Matrix m = gen_feature_map(3, 9, Seed{s});
    // Scale up some rows and introduce ties.
    for (double& v : m.row(1)) v *= 25.0;
    m(2, 3) = m(2, 4);
    const Matrix p = row_softmax(m);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double sum = 0.0;
      for (double v : p.row(r)) {
        EXPECT_GE(v, 0.0);
        sum += v;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
      for (std::size_t j = 0; j < m.cols(); ++j)
        for (std::size_t k = 0; k < m.cols(); ++k)
          if (m(r, j) >= m(r, k)) {
            EXPECT_GE(p(r, j), p(r, k));
          }
    }
    EXPECT_EQ(p(2, 3), p(2, 4));
  }
}

TEST(Retrieve, ZeroLogitsGiveColumnMeans) {
  const Matrix x = gen_feature_map(5, 3, Seed{9});
  const auto st = retrieve(x, Matrix(5, 5));
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < 5; ++r) mean += x(r, c);
    mean /= 5.0;
    for (std::size_t r = 0; r < 5; ++r) EXPECT_NEAR(st.xi(r, c), mean, 1e-15);
  }
}

TEST(Retrieve, SingletonIsIdentity) {
  const Matrix x = Matrix::from_rows({{0.3, -2.0, 7.0}});
  EXPECT_EQ(retrieve(x, Matrix(1, 1, 4.2)).xi, x);
}

TEST(Retrieve, MatchesTwoLoopMix) {
  const Matrix x = gen_feature_map(4, 3, Seed{21});
  const Matrix m = gen_feature_map(4, 4, Seed{22});
  const auto st = retrieve(x, m);
  const Matrix p = oracle::softmax_rows(m);
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t c = 0; c < 3; ++c) {
      double s = 0.0;
      for (std::size_t u = 0; u < 4; ++u) s += p(t, u) * x(u, c);
      EXPECT_NEAR(st.xi(t, c), s, 1e-12);
    }
}

TEST(Retrieve, PermutationEquivariance) {
  const Matrix x = gen_feature_map(6, 4, Seed{31});
  const Matrix m = gen_feature_map(6, 6, Seed{32});
  const std::vector<std::size_t> perm = {3, 0, 5, 1, 4, 2};
  Matrix xp(6, 4), mp(6, 6);
  for (std::size_t a = 0; a < 6; ++a) {
    for (std::size_t c = 0; c < 4; ++c) xp(a, c) = x(perm[a], c);
    for (std::size_t b = 0; b < 6; ++b) mp(a, b) = m(perm[a], perm[b]);
  }
  const auto st = retrieve(x, m);
  const auto stp = retrieve(xp, mp);
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(stp.xi(a, c), st.xi(perm[a], c), 1e-12);
}

TEST(Retrieve, ShapeMismatch) {
  EXPECT_THROW(retrieve(Matrix(4, 3), Matrix(3, 3)), Error);
  EXPECT_THROW(retrieve(Matrix(4, 3), Matrix(4, 3)), Error);
}

TEST(Retrieve, CustomSimplexMapSlot) {
  // A hard-max map is order preserving; it picks the argmax row of X.
  const SimplexMap hardmax = [](const Matrix& m) {
    Matrix p(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const auto row = m.row(r);
      p(r, static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())) = 1.0;
    }
    return p;
  };
  const Matrix x = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix m = Matrix::from_rows({{0, 5}, {5, 0}});
  const auto st = retrieve(x, m, hardmax);
  EXPECT_EQ(st.xi, Matrix::from_rows({{3, 4}, {1, 2}}));
}

TEST(ValueProject, IdentityValueWeights) {
  const Matrix xi = gen_feature_map(4, 3, Seed{41});
  const auto w = HeadWeights::make(1, Matrix::identity(3), Matrix::identity(3), Matrix::identity(3));
  EXPECT_EQ(value_project(xi, w, 0), xi);
}

TEST(ValueProject, MatchesTripleLoop) {
  const std::size_t H = 2, d = 2, din = 3;
  const Matrix xi = gen_feature_map(5, din, Seed{51});
  const Matrix wv = gen_feature_map(H * d, din, Seed{52});
  const auto w = HeadWeights::make(H, Matrix(H * d, din), Matrix(H * d, din), wv);
  for (std::size_t h = 0; h < H; ++h) {
    const Matrix out = value_project(xi, w, h);
    ASSERT_EQ(out.rows(), 5u);
    ASSERT_EQ(out.cols(), d);
    for (std::size_t t = 0; t < 5; ++t)
      for (std::size_t m = 0; m < d; ++m) {
        double s = 0.0;
        for (std::size_t c = 0; c < din; ++c) s += xi(t, c) * wv(h * d + m, c);
        EXPECT_NEAR(out(t, m), s, 1e-12);
      }
  }
}

TEST(ValueProject, Errors) {
  const auto no_v = HeadWeights::make(1, Matrix(2, 3), Matrix(2, 3));
  try {
    value_project(Matrix(4, 3), no_v, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingValueWeights);
  }
  const auto with_v = HeadWeights::make(1, Matrix(2, 3), Matrix(2, 3), Matrix(2, 3));
  try {
    value_project(Matrix(4, 3), with_v, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ShapeMismatch);
  }
}

TEST(MultiHeadPipeline, MatchesMonolithicOracle) {
  const std::size_t H = 2, d = 2, L = 4, din = 3;
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix x = gen_feature_map(L, din, Seed{1000 + s});
    const Matrix wq = gen_feature_map(H * d, din, Seed{2000 + s});
    const Matrix wk = gen_feature_map(H * d, din, Seed{3000 + s});
    const Matrix wv = gen_feature_map(H * d, din, Seed{4000 + s});
    const auto weights = HeadWeights::make(H, wq, wk, wv);
    const auto ws = interaction_per_head(weights);
    for (std::size_t h = 0; h < H; ++h) {
      const auto im = build_interaction(x, ws[h], weights.scale);
      const Matrix out = value_project(retrieve(x, im.m).xi, weights, h);
      const Matrix expect =
          oracle::monolithic_attention(x, wq, wk, wv, h, d, 1.0 / std::sqrt(double(d)));
      EXPECT_LE(oracle::max_abs(out, expect), 1e-10);
    }
  }
}
