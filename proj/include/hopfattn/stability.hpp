#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hopfattn/attention.hpp"
#include "hopfattn/decomposition.hpp"
#include "hopfattn/error.hpp"
#include "hopfattn/matrix.hpp"

namespace hopfattn {

/// Stability measures of one retrieved state against the symmetric memory.
struct StabilityReport {
  double energy = 0.0;
  Vector lambda;
  double instability_fraction = 0.0;
  double alignment = 0.0;
  double eta_m = 0.0;
};

struct FeatureStabilitySet {
  std::vector<StabilityReport> features;
  StabilityReport aggregate;
};

/// h = M_sym * xi.
inline Vector local_field(const InteractionMatrix& im, std::span<const double> xi) {
  if (xi.size() != im.size()) {
    throw Error(ErrorCode::ShapeMismatch, "state length " + std::to_string(xi.size()) +
                                              " vs L = " + std::to_string(im.size()));
  }
  return matvec(im.sym, xi);
}

inline Vector lambda_vec(std::span<const double> xi, std::span<const double> h) {
  if (xi.size() != h.size()) throw Error(ErrorCode::ShapeMismatch, "lambda length mismatch");
  Vector out(xi.size());
  for (std::size_t a = 0; a < xi.size(); ++a) out[a] = xi[a] * h[a];
  return out;
}

/// -1/2 xi^T M_sym xi.
inline double energy(const InteractionMatrix& im, std::span<const double> xi) {
  const Vector h = local_field(im, xi);
  return -0.5 * dot(xi, h);
}

/// Fraction of strictly negative entries; zeros count as stable.
inline double instability_fraction(std::span<const double> lambda) {
  if (lambda.empty()) throw Error(ErrorCode::EmptyVector, "lambda is empty");
  const auto neg = std::count_if(lambda.begin(), lambda.end(), [](double v) { return v < 0.0; });
  return static_cast<double>(neg) / static_cast<double>(lambda.size());
}

/// cos(xi, h).
inline double alignment(std::span<const double> xi, std::span<const double> h) {
  if (xi.size() != h.size()) throw Error(ErrorCode::ShapeMismatch, "alignment length mismatch");
  const double nx = norm2(xi);
  const double nh = norm2(h);
  if (nx == 0.0 || nh == 0.0) {
    throw Error(ErrorCode::ZeroNormState, "cosine is undefined for a zero state or field");
  }
  return std::clamp(dot(xi, h) / (nx * nh), -1.0, 1.0);
}

/// All measures for one state. eta_m is left for the caller.
inline StabilityReport measure_state(const InteractionMatrix& im, std::span<const double> xi) {
  StabilityReport r;
  const Vector h = local_field(im, xi);
  r.energy = -0.5 * dot(xi, h);
  r.lambda = lambda_vec(xi, h);
  r.instability_fraction = instability_fraction(r.lambda);
  r.alignment = alignment(xi, h);
  return r;
}

/// Arithmetic mean of every field, lambda elementwise.
inline StabilityReport mean_report(std::span<const StabilityReport> reports) {
  if (reports.empty()) throw Error(ErrorCode::EmptyList, "no reports to aggregate");
  StabilityReport agg;
  agg.lambda.assign(reports.front().lambda.size(), 0.0);
  for (const auto& r : reports) {
    if (r.lambda.size() != agg.lambda.size()) {
      throw Error(ErrorCode::ShapeMismatch, "reports have different lambda lengths");
    }
    agg.energy += r.energy;
    agg.instability_fraction += r.instability_fraction;
    agg.alignment += r.alignment;
    agg.eta_m += r.eta_m;
    for (std::size_t a = 0; a < agg.lambda.size(); ++a) agg.lambda[a] += r.lambda[a];
  }
  const double n = static_cast<double>(reports.size());
  agg.energy /= n;
  agg.instability_fraction /= n;
  agg.alignment /= n;
  agg.eta_m /= n;
  for (double& v : agg.lambda) v /= n;
  return agg;
}

/// One report per retrieved feature column xi^(i) = Xi[:, i], measured against
/// M_sym of the interaction that produced the retrieval.
inline FeatureStabilitySet measure_retrieval(const Matrix& x, const InteractionMatrix& im,
                                             const Matrix& xi) {
  if (x.rows() != im.size() || xi.rows() != im.size() || xi.cols() != x.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "X, M and Xi shapes are inconsistent");
  }
  const double eta = eta_M(im);
  FeatureStabilitySet set;
  set.features.reserve(xi.cols());
  for (std::size_t i = 0; i < xi.cols(); ++i) {
    auto r = measure_state(im, column(xi, i));
    r.eta_m = eta;
    set.features.push_back(std::move(r));
  }
  set.aggregate = mean_report(set.features);
  return set;
}

inline FeatureStabilitySet measure_retrieval(const Matrix& x, const InteractionMatrix& im,
                                             const RetrievalState& state) {
  return measure_retrieval(x, im, state.xi);
}

/// Builds M from (X, W, scale), retrieves, and measures.
inline FeatureStabilitySet measure_retrieval(const Matrix& x, const Matrix& w, double scale) {
  const auto im = build_interaction(x, w, scale);
  return measure_retrieval(x, im, retrieve(x, im.m));
}

}  // namespace hopfattn
