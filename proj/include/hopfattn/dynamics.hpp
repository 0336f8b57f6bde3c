#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "hopfattn/attention.hpp"
#include "hopfattn/decomposition.hpp"
#include "hopfattn/error.hpp"
#include "hopfattn/matrix.hpp"
#include "hopfattn/stability.hpp"

namespace hopfattn {

enum class Outcome { FixedPoint, Cycle, MaxIters };

/// Per-step diagnostics of state X_t: mean energy of the retrieved features
/// X_{t+1} under M_sym(X_t), and eta_M of the realized logits (absent when
/// the logits vanish).
struct StepSummary {
  double energy = 0.0;
  std::optional<double> eta_m;
};

struct TrajectoryRecord {
  std::vector<Matrix> states;  // X_0, X_1, ...
  std::vector<StepSummary> steps;  // one per computed transition
  Outcome outcome = Outcome::MaxIters;
  std::size_t period = 0;  // >= 2 for Cycle, 1 for FixedPoint, 0 otherwise
  std::optional<std::size_t> converged_at;
};

struct IterateOptions {
  double alpha = 1.0;
  double scale = 1.0;
  std::size_t max_iters = 100;
  double tol = 1e-9;
};

inline bool states_close(const Matrix& a, const Matrix& b, double tol) {
  return frobenius(a - b) <= tol * frobenius(b);
}

/// Iterates X_{t+1} = softmax(scale * X_t (S + alpha N) X_t^T) X_t.
///
/// Fixed point at t when ||X_{t+1} - X_t|| <= tol ||X_t|| (converged_at = t).
/// Cycle of period p when X_{t+1} matches X_{t+1-p} for the smallest p >= 2
/// within the last min(64, max_iters) states (converged_at = t+1).
inline TrajectoryRecord iterate_retrieval(const Matrix& x0, const Matrix& w,
                                          const IterateOptions& opt) {
  if (!(opt.tol > 0.0) || !std::isfinite(opt.tol)) {
    throw Error(ErrorCode::InvalidTolerance, "tol must be positive");
  }
  if (opt.max_iters < 1) throw Error(ErrorCode::InvalidParams, "max_iters must be >= 1");
  const auto parts = split(w);
  const Matrix w_alpha = opt.alpha == 1.0 ? w : axpy(parts.sym, opt.alpha, parts.skew);
  const std::size_t window = std::min<std::size_t>(64, opt.max_iters);

  TrajectoryRecord rec;
  rec.states.push_back(x0);
  for (std::size_t t = 0; t < opt.max_iters; ++t) {
    const Matrix& cur = rec.states.back();
    const auto im = build_interaction(cur, w_alpha, opt.scale);
    Matrix next = retrieve(cur, im.m).xi;

    StepSummary step;
    double e = 0.0;
    for (std::size_t i = 0; i < next.cols(); ++i) e += energy(im, column(next, i));
    step.energy = e / static_cast<double>(next.cols());
    if (frobenius_sq(im.m) > 0.0) step.eta_m = eta_M(im);
    rec.steps.push_back(step);

    if (states_close(next, cur, opt.tol)) {
      rec.states.push_back(std::move(next));
      rec.outcome = Outcome::FixedPoint;
      rec.period = 1;
      rec.converged_at = t;
      return rec;
    }
    // Candidate X_{t+1-p} sits at states[t+1-p].
    for (std::size_t p = 2; p <= window && p <= t + 1; ++p) {
      if (states_close(next, rec.states[t + 1 - p], opt.tol)) {
        rec.states.push_back(std::move(next));
        rec.outcome = Outcome::Cycle;
        rec.period = p;
        rec.converged_at = t + 1;
        return rec;
      }
    }
    rec.states.push_back(std::move(next));
  }
  return rec;
}

}  // namespace hopfattn
