#pragma once

// JSON and CSV serialization of reports.

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "hopfattn/analysis.hpp"
#include "hopfattn/control.hpp"
#include "hopfattn/dynamics.hpp"
#include "hopfattn/stability.hpp"
#include "hopfattn/table.hpp"

namespace hopfattn {

using json = nlohmann::ordered_json;

inline json to_json(const StabilityReport& r) {
  return json{{"energy", r.energy},
              {"lambda", r.lambda},
              {"instability_fraction", r.instability_fraction},
              {"alignment", r.alignment},
              {"eta_m", r.eta_m}};
}

inline json to_json(const FeatureStabilitySet& s) {
  json features = json::array();
  for (const auto& r : s.features) features.push_back(to_json(r));
  return json{{"features", std::move(features)}, {"aggregate", to_json(s.aggregate)}};
}

inline std::string to_string(NormReference ref) {
  return ref == NormReference::AlphaScaled ? "alpha_scaled" : "baseline";
}

inline json to_json(const ControlParams& p) {
  return json{{"alpha", p.alpha},   {"beta", p.beta},   {"tau", p.tau},
              {"adaptive", p.adaptive}, {"eps", p.eps}, {"r_min", p.r_min},
              {"r_max", p.r_max}, {"norm_reference", to_string(p.norm_reference)}};
}

/// Audit fields of a blend; the matrices themselves go to tensor files.
inline json to_json(const BlendResult& b) {
  return json{{"delta_norm", b.delta_norm},
              {"applied_alpha_eff", b.applied_alpha_eff},
              {"applied_beta_eff", b.applied_beta_eff},
              {"clamp_hit_fraction", b.clamp_hit_fraction}};
}

inline json to_json(const StratificationResult& s) {
  json metrics = json::object();
  for (std::size_t c = 0; c < s.columns.size(); ++c) {
    metrics[s.columns[c]] = json{{"full_mean", s.full_means[c]},
                                 {"top_mean", s.top_means[c]},
                                 {"bottom_mean", s.bottom_means[c]},
                                 {"top_delta", s.top_deltas[c]},
                                 {"bottom_delta", s.bottom_deltas[c]}};
  }
  return json{{"by", s.by},
              {"q", s.q},
              {"subset_size", s.top_ids.size()},
              {"top_ids", s.top_ids},
              {"bottom_ids", s.bottom_ids},
              {"metrics", std::move(metrics)}};
}

inline std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::FixedPoint: return "fixed_point";
    case Outcome::Cycle: return "cycle";
    case Outcome::MaxIters: return "max_iters";
  }
  return "unknown";
}

inline json to_json(const TrajectoryRecord& t) {
  json j{{"outcome", to_string(t.outcome)},
         {"period", t.period},
         {"iterations", t.steps.size()}};
  j["converged_at"] = t.converged_at ? json(*t.converged_at) : json(nullptr);
  return j;
}

/// Columns of flat stability CSVs, after the leading key columns.
inline const std::vector<std::string>& stability_csv_columns() {
  static const std::vector<std::string> cols = {"energy", "neg_energy", "instability_fraction",
                                                "alignment", "eta_m"};
  return cols;
}

inline std::string stability_csv_fields(const StabilityReport& r) {
  return format_double(r.energy) + ',' + format_double(-r.energy) + ',' +
         format_double(r.instability_fraction) + ',' + format_double(r.alignment) + ',' +
         format_double(r.eta_m);
}

inline void write_sweep_csv(const std::vector<SweepCell>& cells, std::ostream& out) {
  out << "alpha,beta,energy,neg_energy,instability_fraction,alignment,eta_m,eta_m_perturbed,"
         "delta_norm,clamp_hit_fraction,alpha_eff,beta_eff,num_samples\n";
  for (const auto& c : cells) {
    out << format_double(c.alpha) << ',' << format_double(c.beta) << ','
        << stability_csv_fields(c.stability) << ',' << format_double(c.eta_m_perturbed) << ','
        << format_double(c.delta_norm) << ',' << format_double(c.clamp_hit_fraction) << ','
        << format_double(c.alpha_eff) << ',' << format_double(c.beta_eff) << ','
        << c.num_samples << '\n';
  }
}

inline void write_trajectory_csv(const TrajectoryRecord& t, std::ostream& out) {
  out << "step,energy,neg_energy,eta_m\n";
  for (std::size_t s = 0; s < t.steps.size(); ++s) {
    const auto& st = t.steps[s];
    out << s << ',' << format_double(st.energy) << ',' << format_double(-st.energy) << ','
        << (st.eta_m ? format_double(*st.eta_m) : std::string()) << '\n';
  }
}

}  // namespace hopfattn
