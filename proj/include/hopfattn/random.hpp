#pragma once

// Seeded generators. Uniforms come from std::mt19937_64 (fully specified by the
// standard) mapped to [0,1) through the top 53 bits; normals use the Marsaglia
// polar method with the spare deviate cached. std::normal_distribution is not
// used because its algorithm is implementation-defined.

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "hopfattn/error.hpp"
#include "hopfattn/matrix.hpp"

namespace hopfattn {

struct Seed {
  std::uint64_t value = 0;
};

class GaussianSource {
 public:
  explicit GaussianSource(Seed seed) : engine_(seed.value) {}

  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    return u * f;
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

/// L x d_in matrix of i.i.d. standard normals, filled row-major.
inline Matrix gen_feature_map(std::size_t L, std::size_t d_in, Seed seed) {
  if (L < 1 || d_in < 1) {
    throw Error(ErrorCode::InvalidSize, "feature map needs L >= 1 and d_in >= 1");
  }
  GaussianSource g(seed);
  Matrix x(L, d_in);
  for (double& v : x.data()) v = g.normal();
  return x;
}

/// Symmetric and skew-symmetric halves of a controlled-symmetry coupling.
struct CouplingParts {
  Matrix sym;
  Matrix skew;
};

/// Draws S0 (symmetric) and N0 (skew) with zero diagonals. For each pair i < j,
/// in row-major order, one normal goes to S0 and then one to N0.
inline CouplingParts gen_coupling_parts(std::size_t n, Seed seed) {
  if (n < 2) {
    throw Error(ErrorCode::InvalidSize, "coupling needs n >= 2, got " + std::to_string(n));
  }
  GaussianSource g(seed);
  CouplingParts p{Matrix(n, n), Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double s = g.normal();
      const double a = g.normal();
      p.sym(i, j) = s;
      p.sym(j, i) = s;
      p.skew(i, j) = a;
      p.skew(j, i) = -a;
    }
  }
  return p;
}

/// J = S0 + k * N0.
inline Matrix gen_controlled_symmetry_coupling(std::size_t n, double k, Seed seed) {
  if (!(k >= 0.0) || !std::isfinite(k)) {
    throw Error(ErrorCode::InvalidSize, "asymmetry scale k must be finite and >= 0");
  }
  const auto parts = gen_coupling_parts(n, seed);
  return axpy(parts.sym, k, parts.skew);
}

}  // namespace hopfattn
