#include <gtest/gtest.h>

#include <cmath>

#include "hopfattn/random.hpp"
#include "hopfattn/stability.hpp"
#include "oracles.hpp"

using namespace hopfattn;

namespace {

InteractionMatrix random_interaction(std::size_t L, std::size_t din, std::uint64_t seed) {
  return build_interaction(gen_feature_map(L, din, Seed{seed}),
                           gen_feature_map(din, din, Seed{seed + 7777}), 1.0);
}

Vector random_state(std::size_t L, std::uint64_t seed) {
  const Matrix m = gen_feature_map(L, 1, Seed{seed});
  return Vector(m.data().begin(), m.data().end());
}

}  // namespace

TEST(LocalField, IdentityAndZero) {
  const auto im = InteractionMatrix::from_logits(Matrix::identity(3));
  const Vector xi = {0.5, -1.0, 2.0};
  EXPECT_EQ(local_field(im, xi), xi);
  EXPECT_EQ(local_field(im, Vector(3, 0.0)), Vector(3, 0.0));
  EXPECT_THROW(local_field(im, Vector(2, 1.0)), Error);
}

TEST(LocalField, MatchesDotProductLoops) {
  const auto im = random_interaction(4, 4, 11);
  const Vector xi = random_state(4, 12);
  const Vector h = local_field(im, xi);
  for (std::size_t a = 0; a < 4; ++a) {
    double s = 0.0;
    for (std::size_t b = 0; b < 4; ++b) s += 0.5 * (im.m(a, b) + im.m(b, a)) * xi[b];
    EXPECT_NEAR(h[a], s, 1e-12);
  }
}

TEST(LocalField, SuperpositionOverFeatures) {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const Matrix x = gen_feature_map(4, 3, Seed{s});
    const Matrix w = gen_feature_map(3, 3, Seed{s + 100});
    const auto im = build_interaction(x, w, 1.0);
    const Vector xi = random_state(4, s + 200);
    Matrix sw(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) sw(i, j) = 0.5 * (w(i, j) + w(j, i));
    const auto expect = oracle::superposed_field(x, sw, xi, 1.0);
    const Vector h = local_field(im, xi);
    double diff = 0.0, ref = 0.0;
    for (std::size_t a = 0; a < 4; ++a) {
      diff += (h[a] - expect[a]) * (h[a] - expect[a]);
      ref += expect[a] * expect[a];
    }
    EXPECT_LE(std::sqrt(diff), 1e-8 * std::sqrt(ref));
  }
}

TEST(Lambda, Definition) {
  EXPECT_EQ(lambda_vec(Vector{1, -1}, Vector{2, 2}), (Vector{2, -2}));
  const Vector v = {-3, 0, 2.5};
  for (double l : lambda_vec(v, v)) EXPECT_GE(l, 0.0);
  EXPECT_THROW(lambda_vec(Vector{1}, Vector{1, 2}), Error);
}

TEST(Lambda, SumsToMinusTwiceEnergy) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto im = random_interaction(7, 5, s);
    const Vector xi = random_state(7, s + 1000);
    const Vector lam = lambda_vec(xi, local_field(im, xi));
    double sum = 0.0;
    for (double l : lam) sum += l;
    // Quadratic form evaluated independently.
    double q = 0.0;
    for (std::size_t a = 0; a < 7; ++a)
      for (std::size_t b = 0; b < 7; ++b) q += xi[a] * im.sym(a, b) * xi[b];
    const double e = energy(im, xi);
    EXPECT_NEAR(e, -0.5 * q, 1e-9 * std::max(1.0, std::abs(q)));
    EXPECT_NEAR(-0.5 * sum, e, 1e-9 * std::max(1.0, std::abs(e)));
  }
}

TEST(Energy, IdentityToy) {
  const auto im = build_interaction(Matrix::identity(2), Matrix::identity(2), 1.0);
  EXPECT_DOUBLE_EQ(energy(im, Vector{1, 1}), -1.0);
  EXPECT_EQ(energy(im, Vector{0, 0}), 0.0);
}

TEST(Energy, SkewPartCarriesNoEnergy) {
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto im = random_interaction(8, 5, s);
    const Vector xi = random_state(8, s + 3);
    const double on_m = -0.5 * dot(xi, matvec(im.m, xi));
    EXPECT_NEAR(on_m, energy(im, xi), 1e-10 * std::max(1.0, std::abs(on_m)));
    const double skew_q = dot(xi, matvec(im.skew, xi));
    EXPECT_LE(std::abs(skew_q), 1e-9 * dot(xi, xi) * frobenius(im.skew));
  }
}

TEST(InstabilityFraction, Counting) {
  EXPECT_EQ(instability_fraction(Vector{-1, 2, 3, -4}), 0.5);
  EXPECT_EQ(instability_fraction(Vector{0, 2, 3}), 0.0);
  EXPECT_EQ(instability_fraction(Vector{0.0, -0.0, -1e-300, 1}), 0.25);
  try {
    instability_fraction(Vector{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyVector);
  }
}

TEST(Alignment, ColinearAndScaleFree) {
  const Vector xi = {1, -2, 3};
  EXPECT_DOUBLE_EQ(alignment(xi, Vector{2, -4, 6}), 1.0);
  EXPECT_DOUBLE_EQ(alignment(xi, Vector{-1, 2, -3}), -1.0);
  const Vector h = {0.3, 0.1, -2};
  const double a = alignment(xi, h);
  EXPECT_NEAR(alignment(Vector{5, -10, 15}, h), a, 1e-12);
  EXPECT_NEAR(alignment(Vector{5, -10, 15}, Vector{0.6, 0.2, -4}), a, 1e-12);
}

TEST(Alignment, ZeroNorm) {
  try {
    alignment(Vector{0, 0}, Vector{1, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ZeroNormState);
  }
  EXPECT_THROW(alignment(Vector{1, 2}, Vector{0, 0}), Error);
}

TEST(MeasureRetrieval, SingleFeatureAggregateEqualsReport) {
  const Matrix x = gen_feature_map(5, 1, Seed{1});
  const auto set = measure_retrieval(x, Matrix(1, 1, 0.8), 1.0);
  ASSERT_EQ(set.features.size(), 1u);
  EXPECT_EQ(set.aggregate.energy, set.features[0].energy);
  EXPECT_EQ(set.aggregate.lambda, set.features[0].lambda);
  EXPECT_EQ(set.aggregate.alignment, set.features[0].alignment);
  EXPECT_EQ(set.aggregate.instability_fraction, set.features[0].instability_fraction);
}

TEST(MeasureRetrieval, MatchesScalarOracle) {
  const Matrix x = gen_feature_map(4, 3, Seed{61});
  const Matrix w = gen_feature_map(3, 3, Seed{62});
  const auto im = build_interaction(x, w, 0.5);
  const auto st = retrieve(x, im.m);
  const auto set = measure_retrieval(x, im, st);
  ASSERT_EQ(set.features.size(), 3u);

  // Scalar-by-scalar: M, its symmetric part, softmax, Xi, then each measure.
  const Matrix m = oracle::scaled(oracle::product(oracle::product(x, w), oracle::trans(x)), 0.5);
  const Matrix p = oracle::softmax_rows(m);
  const Matrix xi = oracle::product(p, x);
  double ms = 0, mk = 0;
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b) {
      ms += std::pow(0.5 * (m(a, b) + m(b, a)), 2);
      mk += std::pow(0.5 * (m(a, b) - m(b, a)), 2);
    }
  const double eta = (ms - mk) / (ms + mk);
  double agg_e = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    double e = 0, hx = 0, hh = 0, xx = 0;
    int neg = 0;
    for (std::size_t a = 0; a < 4; ++a) {
      double h = 0;
      for (std::size_t b = 0; b < 4; ++b) h += 0.5 * (m(a, b) + m(b, a)) * xi(b, i);
      e += -0.5 * xi(a, i) * h;
      const double lam = xi(a, i) * h;
      EXPECT_NEAR(set.features[i].lambda[a], lam, 1e-10);
      neg += lam < 0;
      hx += h * xi(a, i);
      hh += h * h;
      xx += xi(a, i) * xi(a, i);
    }
    EXPECT_NEAR(set.features[i].energy, e, 1e-10);
    EXPECT_NEAR(set.features[i].instability_fraction, neg / 4.0, 1e-15);
    EXPECT_NEAR(set.features[i].alignment, hx / std::sqrt(hh * xx), 1e-10);
    EXPECT_NEAR(set.features[i].eta_m, eta, 1e-10);
    agg_e += e / 3.0;
  }
  EXPECT_NEAR(set.aggregate.energy, agg_e, 1e-10);
}

TEST(MeasureRetrieval, FeaturePermutationEquivariance) {
  const Matrix x = gen_feature_map(6, 3, Seed{71});
  const Matrix w = gen_feature_map(3, 3, Seed{72});
  const auto im = build_interaction(x, w, 1.0);
  const Matrix xi = retrieve(x, im.m).xi;
  const std::vector<std::size_t> perm = {2, 0, 1};
  Matrix xp(6, 3), xip(6, 3);
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t c = 0; c < 3; ++c) {
      xp(a, c) = x(a, perm[c]);
      xip(a, c) = xi(a, perm[c]);
    }
  // Permuting X's columns leaves M unchanged when W is permuted alike.
  Matrix wp(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) wp(i, j) = w(perm[i], perm[j]);
  const auto imp = build_interaction(xp, wp, 1.0);
  const auto a = measure_retrieval(x, im, xi);
  const auto b = measure_retrieval(xp, imp, xip);
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(b.features[c].energy, a.features[perm[c]].energy, 1e-10);
    EXPECT_NEAR(b.features[c].alignment, a.features[perm[c]].alignment, 1e-10);
    EXPECT_EQ(b.features[c].instability_fraction, a.features[perm[c]].instability_fraction);
  }
}

TEST(MeasureRetrieval, ReportInvariants) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const Matrix x = gen_feature_map(9, 4, Seed{s});
    const auto set = measure_retrieval(x, gen_feature_map(4, 4, Seed{s + 50}), 0.5);
    for (const auto& r : set.features) {
      double sum = 0;
      int neg = 0;
      for (double l : r.lambda) {
        sum += l;
        neg += l < 0;
      }
      EXPECT_NEAR(r.energy, -0.5 * sum, 1e-9 * std::max(1.0, std::abs(r.energy)));
      EXPECT_EQ(r.instability_fraction, neg / 9.0);
      EXPECT_GE(r.alignment, -1.0);
      EXPECT_LE(r.alignment, 1.0);
    }
  }
}

TEST(MeasureRetrieval, ShapeMismatch) {
  const Matrix x = gen_feature_map(4, 3, Seed{1});
  const auto im = build_interaction(x, Matrix::identity(3), 1.0);
  EXPECT_THROW(measure_retrieval(x, im, Matrix(4, 2)), Error);
  EXPECT_THROW(measure_retrieval(Matrix(5, 3), im, Matrix(4, 3)), Error);
}
