#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hopfattn/attention.hpp"
#include "hopfattn/control.hpp"
#include "hopfattn/error.hpp"
#include "hopfattn/parallel.hpp"
#include "hopfattn/stability.hpp"
#include "hopfattn/table.hpp"

namespace hopfattn {

/// 1-based ranks with tied values sharing the mean of their positions.
inline std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    // Positions i..j-1 (0-based) hold equal values.
    const double r = 0.5 * static_cast<double>(i + j - 1) + 1.0;
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

/// Pearson correlation of midranks. No p-values.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::LengthMismatch, "spearman inputs have lengths " +
                                               std::to_string(x.size()) + " and " +
                                               std::to_string(y.size()));
  }
  if (x.size() < 3) {
    throw Error(ErrorCode::LengthMismatch, "spearman needs at least 3 paired values");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
      throw Error(ErrorCode::NonFiniteInput, "spearman input contains a non-finite value");
    }
  }
  const auto rx = midranks(x);
  const auto ry = midranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;  // midranks always average to this
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw Error(ErrorCode::DegenerateConstantInput, "spearman input is constant");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct StratificationResult {
  double q = 0.0;
  std::string by;
  std::vector<std::string> top_ids;
  std::vector<std::string> bottom_ids;
  std::vector<std::string> columns;
  std::vector<double> full_means;
  std::vector<double> top_means;
  std::vector<double> bottom_means;
  std::vector<double> top_deltas;     // top mean - full mean
  std::vector<double> bottom_deltas;  // bottom mean - full mean
};

/// ceil(q*n), tolerant of q*n landing a hair above an integer.
inline std::size_t quantile_count(double q, std::size_t n) {
  return static_cast<std::size_t>(std::ceil(q * static_cast<double>(n) - 1e-9));
}

namespace detail {

inline double subset_mean(const std::vector<double>& col, std::span<const std::size_t> rows) {
  double s = 0.0;
  for (std::size_t r : rows) s += col[r];
  return s / static_cast<double>(rows.size());
}

}  // namespace detail

/// Sorts rows by `by` descending (ties by ascending sample_id), takes the first
/// and last ceil(q*n) rows, and reports per-column subset means and their
/// deltas against the full-set mean.
inline StratificationResult stratify(const MetricTable& t, const std::string& by, double q) {
  const auto& key = t.finite_column(by);
  if (!(q > 0.0 && q < 0.5)) {
    throw Error(ErrorCode::BadQuantile, "quantile must lie in (0, 0.5), got " + format_double(q));
  }
  const std::size_t n = t.num_rows();
  const std::size_t k = quantile_count(q, n);
  if (k == 0 || 2 * k > n) {
    throw Error(ErrorCode::BadQuantile, "quantile " + format_double(q) + " gives subsets of " +
                                            std::to_string(k) + " rows out of " +
                                            std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (key[a] != key[b]) return key[a] > key[b];
    return t.ids()[a] < t.ids()[b];
  });
  const std::span<const std::size_t> top(order.data(), k);
  const std::span<const std::size_t> bottom(order.data() + (n - k), k);

  StratificationResult out;
  out.q = q;
  out.by = by;
  for (std::size_t r : top) out.top_ids.push_back(t.ids()[r]);
  for (std::size_t r : bottom) out.bottom_ids.push_back(t.ids()[r]);
  out.columns = t.columns();
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (const auto& c : out.columns) {
    const auto& col = t.column(c);
    const double full = detail::subset_mean(col, all);
    const double tm = detail::subset_mean(col, top);
    const double bm = detail::subset_mean(col, bottom);
    out.full_means.push_back(full);
    out.top_means.push_back(tm);
    out.bottom_means.push_back(bm);
    out.top_deltas.push_back(tm - full);
    out.bottom_deltas.push_back(bm - full);
  }
  return out;
}

struct MetricDelta {
  std::string metric;
  double delta = 0.0;
};

/// Mean over the subset of (treated - base) for every column the two tables
/// share, matched on sample_id. Columns follow the base table's order.
inline std::vector<MetricDelta> paired_delta(const MetricTable& base, const MetricTable& treated,
                                             std::span<const std::string> subset_ids) {
  if (subset_ids.empty()) throw Error(ErrorCode::EmptyList, "paired_delta needs a non-empty subset");
  std::vector<std::size_t> base_rows, treated_rows;
  for (const auto& id : subset_ids) {
    auto b = base.row_of(id);
    auto t = treated.row_of(id);
    if (!b || !t) {
      throw Error(ErrorCode::MissingId, "sample_id \"" + id + "\" is missing from the " +
                                            (!b ? "base" : "treated") + " table");
    }
    base_rows.push_back(*b);
    treated_rows.push_back(*t);
  }
  std::vector<MetricDelta> out;
  for (const auto& c : base.columns()) {
    if (!treated.has_column(c)) continue;
    const auto& bc = base.column(c);
    const auto& tc = treated.column(c);
    double s = 0.0;
    for (std::size_t i = 0; i < base_rows.size(); ++i) s += tc[treated_rows[i]] - bc[base_rows[i]];
    out.push_back({c, s / static_cast<double>(base_rows.size())});
  }
  return out;
}

/// One (alpha, beta) cell of a control sweep, averaged over samples.
struct SweepCell {
  double alpha = 1.0;
  double beta = 0.0;
  StabilityReport stability;   // of the blended retrieval; eta_m is of M(X)
  double eta_m_perturbed = 0.0;  // of the logits that produced Xi_alpha
  double delta_norm = 0.0;
  double clamp_hit_fraction = 0.0;
  double alpha_eff = 0.0;
  double beta_eff = 0.0;
  std::size_t num_samples = 0;
};

/// Runs blend (or adaptive_blend when params.adaptive) for every sample at each
/// grid cell and aggregates the stability of the blended retrieval. Cells are
/// returned alpha-major, beta-minor regardless of `threads`.
inline std::vector<SweepCell> sweep(std::span<const Matrix> samples, const Matrix& w, double scale,
                                    std::span<const double> alphas, std::span<const double> betas,
                                    const ControlParams& params, std::size_t threads = 1) {
  if (samples.empty()) throw Error(ErrorCode::EmptyList, "sweep needs at least one sample");
  if (alphas.empty() || betas.empty()) throw Error(ErrorCode::EmptyList, "sweep grid is empty");

  std::vector<InteractionMatrix> interactions;
  interactions.reserve(samples.size());
  for (const auto& x : samples) interactions.push_back(build_interaction(x, w, scale));

  std::vector<SweepCell> cells(alphas.size() * betas.size());
  parallel_for(cells.size(), threads, [&](std::size_t idx) {
    ControlParams p = params;
    p.alpha = alphas[idx / betas.size()];
    p.beta = betas[idx % betas.size()];
    std::vector<StabilityReport> reports;
    SweepCell cell;
    cell.alpha = p.alpha;
    cell.beta = p.beta;
    for (std::size_t s = 0; s < samples.size(); ++s) {
      const auto& x = samples[s];
      const auto& im = interactions[s];
      const double eta = eta_M(im);
      BlendResult br;
      Matrix logits;
      if (p.adaptive) {
        br = adaptive_blend(x, im, p, eta);
        logits = adaptive_logits(im, p.alpha, eta);
      } else {
        br = blend(x, im, p);
        logits = perturbed_logits(im, p.alpha);
      }
      reports.push_back(measure_retrieval(x, im, br.xi_blended).aggregate);
      const auto parts = split(logits);
      cell.eta_m_perturbed += eta_M(parts.sym, parts.skew);
      cell.delta_norm += br.delta_norm;
      cell.clamp_hit_fraction += br.clamp_hit_fraction;
      cell.alpha_eff += br.applied_alpha_eff;
      cell.beta_eff += br.applied_beta_eff;
    }
    const double n = static_cast<double>(samples.size());
    cell.stability = mean_report(reports);
    cell.eta_m_perturbed /= n;
    cell.delta_norm /= n;
    cell.clamp_hit_fraction /= n;
    // Static cells apply the grid values verbatim; skip the averaging round-off.
    cell.alpha_eff = p.adaptive ? cell.alpha_eff / n : p.alpha;
    cell.beta_eff = p.adaptive ? cell.beta_eff / n : p.beta;
    cell.num_samples = samples.size();
    cells[idx] = std::move(cell);
  });
  return cells;
}

}  // namespace hopfattn
