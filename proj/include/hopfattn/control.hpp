#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "hopfattn/attention.hpp"
#include "hopfattn/error.hpp"
#include "hopfattn/matrix.hpp"

namespace hopfattn {

/// Which retrieval sets the target row norms after blending.
enum class NormReference {
  AlphaScaled,  // the circulation-scaled (or adaptive) retrieval
  Baseline,     // the unperturbed retrieval
};

struct ControlParams {
  double alpha = 1.0;
  double beta = 0.0;
  double tau = 1.0;
  bool adaptive = false;
  double eps = 1e-6;
  double r_min = 0.25;
  double r_max = 4.0;
  NormReference norm_reference = NormReference::AlphaScaled;

  void validate() const {
    if (!std::isfinite(alpha)) throw Error(ErrorCode::InvalidParams, "alpha must be finite");
    if (!(beta >= 0.0) || !std::isfinite(beta)) {
      throw Error(ErrorCode::InvalidParams, "beta must be finite and >= 0");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      throw Error(ErrorCode::NonPositiveTau, "tau must be positive and finite");
    }
    if (!(eps > 0.0)) throw Error(ErrorCode::InvalidParams, "eps must be positive");
    if (!(r_min > 0.0 && r_min <= 1.0 && 1.0 <= r_max && std::isfinite(r_max))) {
      throw Error(ErrorCode::InvalidParams, "clamp bounds must satisfy 0 < r_min <= 1 <= r_max");
    }
  }
};

struct BlendResult {
  Matrix xi_base;
  Matrix xi_alpha;
  Matrix xi_blended;
  double delta_norm = 0.0;
  double applied_alpha_eff = 1.0;
  double applied_beta_eff = 0.0;
  double clamp_hit_fraction = 0.0;
};

/// M_sym + alpha * M_skew. At alpha == 1 this is M itself, so the perturbed
/// path reproduces the baseline retrieval bit for bit.
inline Matrix perturbed_logits(const InteractionMatrix& im, double alpha) {
  if (alpha == 1.0) return im.m;
  return axpy(im.sym, alpha, im.skew);
}

inline RetrievalState perturbed_retrieval(const Matrix& x, const InteractionMatrix& im,
                                          double alpha) {
  return retrieve(x, perturbed_logits(im, alpha));
}

/// Scales each row of `blended` toward the norm of the same row of `reference`,
/// with the ratio clamped to [r_min, r_max]. Returns the fraction of rows whose
/// ratio hit a bound.
inline double match_row_norms(Matrix& blended, const Matrix& reference,
                              const ControlParams& params) {
  require_same_shape(blended, reference, "norm matching");
  if (blended.rows() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t a = 0; a < blended.rows(); ++a) {
    auto row = blended.row(a);
    const double ref = std::max(norm2(reference.row(a)), params.eps);
    const double cur = std::max(norm2(row), params.eps);
    const double raw = ref / cur;
    if (raw < params.r_min || raw > params.r_max) ++hits;
    const double ratio = std::clamp(raw, params.r_min, params.r_max);
    for (double& v : row) v *= ratio;
  }
  return static_cast<double>(hits) / static_cast<double>(blended.rows());
}

namespace detail {

inline BlendResult finish_blend(Matrix base, Matrix perturbed, double beta_eff,
                                const ControlParams& params) {
  BlendResult out;
  const Matrix delta = perturbed - base;
  out.delta_norm = frobenius(delta);
  out.xi_blended = axpy(base, beta_eff, delta);
  const Matrix& ref =
      params.norm_reference == NormReference::AlphaScaled ? perturbed : base;
  out.clamp_hit_fraction = match_row_norms(out.xi_blended, ref, params);
  out.applied_beta_eff = beta_eff;
  out.xi_base = std::move(base);
  out.xi_alpha = std::move(perturbed);
  return out;
}

}  // namespace detail

/// Static circulation control: Xi + beta * (Xi_alpha - Xi), then clamped
/// per-token norm matching.
inline BlendResult blend(const Matrix& x, const InteractionMatrix& im,
                         const ControlParams& params) {
  params.validate();
  if (params.adaptive) {
    throw Error(ErrorCode::InvalidParams, "blend called with adaptive params");
  }
  if (x.rows() != im.size()) throw Error(ErrorCode::ShapeMismatch, "X rows must equal L");
  auto base = retrieve(x, im.m).xi;
  auto perturbed = perturbed_retrieval(x, im, params.alpha).xi;
  auto out = detail::finish_blend(std::move(base), std::move(perturbed), params.beta, params);
  out.applied_alpha_eff = params.alpha;
  return out;
}

/// M / tau. Both halves scale together.
inline Matrix temper(const InteractionMatrix& im, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw Error(ErrorCode::NonPositiveTau, "tau must be positive and finite");
  }
  if (tau == 1.0) return im.m;
  return (1.0 / tau) * im.m;
}

inline RetrievalState tempered_retrieval(const Matrix& x, const InteractionMatrix& im,
                                         double tau) {
  return retrieve(x, temper(im, tau));
}

/// Mean of per-(sample, head) symmetry indices.
inline double eta_bar(std::span<const double> etas) {
  if (etas.empty()) throw Error(ErrorCode::EmptyList, "eta_bar needs at least one value");
  double s = 0.0;
  for (double e : etas) s += e;
  return s / static_cast<double>(etas.size());
}

/// M + (alpha - 1) * eta_bar * M_skew.
inline Matrix adaptive_logits(const InteractionMatrix& im, double alpha, double eta_bar) {
  return axpy(im.m, (alpha - 1.0) * eta_bar, im.skew);
}

/// Adaptive circulation control driven by the shared symmetry index eta_bar.
inline BlendResult adaptive_blend(const Matrix& x, const InteractionMatrix& im,
                                  const ControlParams& params, double eta_bar) {
  params.validate();
  if (!params.adaptive) {
    throw Error(ErrorCode::InvalidParams, "adaptive_blend called with static params");
  }
  if (!std::isfinite(eta_bar)) throw Error(ErrorCode::InvalidParams, "eta_bar is not finite");
  if (x.rows() != im.size()) throw Error(ErrorCode::ShapeMismatch, "X rows must equal L");
  const double alpha_eff = (params.alpha - 1.0) * eta_bar;
  const double beta_eff = params.beta * (1.0 - eta_bar);
  auto base = retrieve(x, im.m).xi;
  auto adaptive = retrieve(x, adaptive_logits(im, params.alpha, eta_bar)).xi;
  auto out = detail::finish_blend(std::move(base), std::move(adaptive), beta_eff, params);
  out.applied_alpha_eff = alpha_eff;
  return out;
}

}  // namespace hopfattn
