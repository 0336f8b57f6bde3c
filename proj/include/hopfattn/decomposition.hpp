#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "hopfattn/error.hpp"
#include "hopfattn/matrix.hpp"

namespace hopfattn {

struct SymSkewPair {
  Matrix sym;
  Matrix skew;
};

/// sym = (W + W^T)/2, skew = (W - W^T)/2.
///
/// Both halves are bitwise (anti)symmetric. sym + skew reproduces W up to one
/// rounding per entry.
inline SymSkewPair split(const Matrix& w) {
  if (!w.is_square()) {
    throw Error(ErrorCode::NotSquare, "split needs a square matrix, got " +
                                          std::to_string(w.rows()) + "x" +
                                          std::to_string(w.cols()));
  }
  const std::size_t n = w.rows();
  SymSkewPair p{Matrix(n, n), Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double s = 0.5 * (w(i, j) + w(j, i));
      p.sym(i, j) = s;
      p.skew(i, j) = 0.5 * (w(i, j) - w(j, i));
    }
  }
  return p;
}

/// <J_ij J_ji> / <J_ij^2> over ordered off-diagonal pairs.
inline double eta_H(const Matrix& j) {
  if (!j.is_square()) throw Error(ErrorCode::NotSquare, "eta_H needs a square coupling");
  if (j.rows() < 2) throw Error(ErrorCode::InvalidSize, "eta_H needs n >= 2");
  double cross = 0.0;
  double sq = 0.0;
  for (std::size_t a = 0; a < j.rows(); ++a) {
    for (std::size_t b = 0; b < j.cols(); ++b) {
      if (a == b) continue;
      cross += j(a, b) * j(b, a);
      sq += j(a, b) * j(a, b);
    }
  }
  if (sq == 0.0) {
    throw Error(ErrorCode::DegenerateZeroCoupling, "all off-diagonal couplings are zero");
  }
  // Both averages share the n(n-1) denominator.
  return cross / sq;
}

/// (||sym||^2 - ||skew||^2) / (||sym||^2 + ||skew||^2).
inline double eta_M(const Matrix& sym, const Matrix& skew) {
  const double s = frobenius_sq(sym);
  const double k = frobenius_sq(skew);
  if (s + k == 0.0) {
    throw Error(ErrorCode::DegenerateZeroMatrix, "interaction matrix is identically zero");
  }
  return (s - k) / (s + k);
}

}  // namespace hopfattn
