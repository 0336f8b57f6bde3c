#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hopfattn/decomposition.hpp"
#include "hopfattn/error.hpp"
#include "hopfattn/matrix.hpp"

namespace hopfattn {

/// Projection weights of one attention layer, stored like a linear layer's
/// weight: each of Wq, Wk, Wv is (H*d) x d_in, and head h owns rows [h*d, (h+1)*d).
struct HeadWeights {
  std::size_t num_heads = 1;
  std::size_t head_dim = 1;
  std::size_t in_dim = 1;
  Matrix wq;
  Matrix wk;
  std::optional<Matrix> wv;
  double scale = 1.0;

  /// Validates shapes; scale defaults to 1/sqrt(head_dim).
  static HeadWeights make(std::size_t num_heads, Matrix wq, Matrix wk,
                          std::optional<Matrix> wv = std::nullopt,
                          std::optional<double> scale = std::nullopt) {
    if (num_heads == 0) throw Error(ErrorCode::ShapeMismatch, "num_heads must be >= 1");
    if (wq.rows() % num_heads != 0 || wq.rows() == 0) {
      throw Error(ErrorCode::ShapeMismatch,
                  "Wq has " + std::to_string(wq.rows()) + " rows, not a multiple of " +
                      std::to_string(num_heads) + " heads");
    }
    HeadWeights w;
    w.num_heads = num_heads;
    w.head_dim = wq.rows() / num_heads;
    w.in_dim = wq.cols();
    require_same_shape(wq, wk, "Wq vs Wk");
    if (wv) require_same_shape(wq, *wv, "Wq vs Wv");
    w.scale = scale.value_or(1.0 / std::sqrt(static_cast<double>(w.head_dim)));
    if (!(w.scale > 0.0) || !std::isfinite(w.scale)) {
      throw Error(ErrorCode::InvalidParams, "scale must be positive and finite");
    }
    w.wq = std::move(wq);
    w.wk = std::move(wk);
    w.wv = std::move(wv);
    return w;
  }

  /// Rows [h*d, (h+1)*d) of a stacked projection.
  Matrix head_slice(const Matrix& stacked, std::size_t head) const {
    if (head >= num_heads) {
      throw Error(ErrorCode::ShapeMismatch, "head index " + std::to_string(head) +
                                                " out of range for " +
                                                std::to_string(num_heads) + " heads");
    }
    Matrix out(head_dim, in_dim);
    for (std::size_t m = 0; m < head_dim; ++m) {
      const auto src = stacked.row(head * head_dim + m);
      std::copy(src.begin(), src.end(), out.row(m).begin());
    }
    return out;
  }
};

/// Pre-softmax logits M(X) with their symmetric and skew-symmetric halves.
struct InteractionMatrix {
  Matrix m;
  Matrix sym;
  Matrix skew;

  static InteractionMatrix from_logits(Matrix logits) {
    auto parts = split(logits);
    return {std::move(logits), std::move(parts.sym), std::move(parts.skew)};
  }

  std::size_t size() const noexcept { return m.rows(); }
};

inline double eta_M(const InteractionMatrix& im) { return eta_M(im.sym, im.skew); }

/// Row-stochastic mixing weights and the retrieved features they produce.
struct RetrievalState {
  Matrix probs;
  Matrix xi;
};

/// W_h[i][j] = sum_m Wq_h[m][i] * Wk_h[m][j] for every head, in head order.
/// The logit scale is not folded in.
inline std::vector<Matrix> interaction_per_head(const HeadWeights& w) {
  if (w.wq.rows() != w.num_heads * w.head_dim || w.wk.rows() != w.num_heads * w.head_dim ||
      w.wq.cols() != w.in_dim || w.wk.cols() != w.in_dim) {
    throw Error(ErrorCode::ShapeMismatch, "Wq/Wk rows must equal num_heads * head_dim");
  }
  std::vector<Matrix> out;
  out.reserve(w.num_heads);
  for (std::size_t h = 0; h < w.num_heads; ++h) {
    out.push_back(matmul(transpose(w.head_slice(w.wq, h)), w.head_slice(w.wk, h)));
  }
  return out;
}

/// M = scale * X W X^T, split into halves.
inline InteractionMatrix build_interaction(const Matrix& x, const Matrix& w, double scale) {
  if (!w.is_square() || x.cols() != w.rows()) {
    throw Error(ErrorCode::ShapeMismatch,
                "X is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                    ", W is " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
  }
  if (!(scale > 0.0)) throw Error(ErrorCode::InvalidParams, "scale must be positive");
  Matrix logits = matmul_transposed(matmul(x, w), x);
  if (scale != 1.0) logits = scale * logits;
  return InteractionMatrix::from_logits(std::move(logits));
}

/// Softmax of each row with the row maximum subtracted first.
inline Matrix row_softmax(const Matrix& m) {
  if (!all_finite(m)) throw Error(ErrorCode::NonFiniteInput, "softmax input is not finite");
  Matrix p(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto in = m.row(r);
    auto out = p.row(r);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      out[c] = std::exp(in[c] - mx);
      z += out[c];
    }
    for (double& v : out) v /= z;
  }
  return p;
}

/// Row-wise map of logits onto the probability simplex. Only softmax ships.
using SimplexMap = std::function<Matrix(const Matrix&)>;

/// probs = Phi(M), Xi = probs * X.
inline RetrievalState retrieve(const Matrix& x, const Matrix& logits,
                               const SimplexMap& phi = row_softmax) {
  if (!logits.is_square() || logits.rows() != x.rows()) {
    throw Error(ErrorCode::ShapeMismatch,
                "logits are " + std::to_string(logits.rows()) + "x" +
                    std::to_string(logits.cols()) + " for L = " + std::to_string(x.rows()));
  }
  Matrix probs = phi(logits);
  Matrix xi = matmul(probs, x);
  return {std::move(probs), std::move(xi)};
}

/// out[t][m] = sum_c Xi[t][c] * Wv_h[m][c].
inline Matrix value_project(const Matrix& xi, const HeadWeights& w, std::size_t head) {
  if (!w.wv) throw Error(ErrorCode::MissingValueWeights, "no value projection supplied");
  if (xi.cols() != w.in_dim) {
    throw Error(ErrorCode::ShapeMismatch, "retrieved features have " +
                                              std::to_string(xi.cols()) +
                                              " columns, Wv expects " +
                                              std::to_string(w.in_dim));
  }
  return matmul_transposed(xi, w.head_slice(*w.wv, head));
}

}  // namespace hopfattn
