// hopfattn: command-line front end for the attention decomposition, stability,
// control and analysis routines.
//
// Exit codes: 0 on success, 2 for invalid input or flags, 1 for anything else.
// Outputs of a failed run are removed.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hopfattn/hopfattn.hpp"

namespace fs = std::filesystem;
using namespace hopfattn;

namespace {

/// Files written by the current command; removed unless commit() is reached.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {}
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& p : written_) fs::remove(p, ec);
  }

  fs::path path(const std::string& name) {
    if (!fs::exists(dir_)) {
      std::error_code ec;
      fs::create_directories(dir_, ec);
      if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir_.string());
    }
    fs::path p = dir_ / name;
    written_.push_back(p);
    return p;
  }

  void tensor(const std::string& name, const Matrix& m) { write_tensor(m, path(name)); }

  void text(const std::string& name, const std::string& body) {
    const auto p = path(name);
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + p.string() + " for writing");
    out << body;
    if (!out) throw Error(ErrorCode::IoFailure, "short write to " + p.string());
  }

  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }

  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> written_;
  bool committed_ = false;
};

enum class Format { Both, Json, Csv };

struct Common {
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  std::string format = "both";

  Format fmt() const {
    if (format == "json") return Format::Json;
    if (format == "csv") return Format::Csv;
    return Format::Both;
  }
  bool want_json() const { return fmt() != Format::Csv; }
  bool want_csv() const { return fmt() != Format::Json; }
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--out-dir,-o", c.out_dir, "Directory for output files")
      ->capture_default_str();
  cmd->add_option("--format", c.format, "Report format: json, csv or both")
      ->check(CLI::IsMember({"json", "csv", "both"}))
      ->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed for generated data")->capture_default_str();
}

/// Interaction weights for one or more heads.
struct WeightSource {
  std::string w;
  std::string wq;
  std::string wk;
  std::string wv;
  std::size_t heads = 1;
  std::optional<double> scale;
};

void add_weight_flags(CLI::App* cmd, WeightSource& s) {
  cmd->add_option("--w", s.w, "Interaction matrix W (d_in x d_in tensor)");
  cmd->add_option("--wq", s.wq, "Stacked query weights ((H*d) x d_in tensor)");
  cmd->add_option("--wk", s.wk, "Stacked key weights ((H*d) x d_in tensor)");
  cmd->add_option("--wv", s.wv, "Stacked value weights ((H*d) x d_in tensor)");
  cmd->add_option("--heads", s.heads, "Number of heads in --wq/--wk/--wv")->capture_default_str();
  cmd->add_option("--scale", s.scale,
                  "Logit scale (default 1 with --w, 1/sqrt(d) with --wq/--wk)");
}

struct LoadedHeads {
  std::vector<Matrix> ws;
  double scale = 1.0;
  std::optional<HeadWeights> weights;

  bool multi() const { return ws.size() > 1; }
  std::string suffix(std::size_t h) const {
    return multi() ? "_h" + std::to_string(h) : std::string();
  }
};

LoadedHeads load_heads(const WeightSource& s) {
  LoadedHeads out;
  const bool have_w = !s.w.empty();
  const bool have_qk = !s.wq.empty() || !s.wk.empty();
  if (have_w == have_qk) {
    throw Error(ErrorCode::ConflictingModes, "give either --w or both --wq and --wk");
  }
  if (have_w) {
    if (!s.wv.empty()) throw Error(ErrorCode::ConflictingModes, "--wv needs --wq/--wk");
    out.ws.push_back(read_tensor(s.w));
    if (!out.ws.front().is_square()) {
      throw Error(ErrorCode::NotSquare, s.w + " is not a square interaction matrix");
    }
    out.scale = s.scale.value_or(1.0);
  } else {
    if (s.wq.empty() || s.wk.empty()) {
      throw Error(ErrorCode::ConflictingModes, "--wq and --wk must be given together");
    }
    std::optional<Matrix> wv;
    if (!s.wv.empty()) wv = read_tensor(s.wv);
    out.weights = HeadWeights::make(s.heads, read_tensor(s.wq), read_tensor(s.wk),
                                    std::move(wv), s.scale);
    out.ws = interaction_per_head(*out.weights);
    out.scale = out.weights->scale;
  }
  if (!(out.scale > 0.0)) throw Error(ErrorCode::InvalidParams, "--scale must be positive");
  return out;
}

std::vector<fs::path> list_tensors(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoFailure, "cannot open directory " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".atnt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::EmptyList, "no .atnt files in " + dir);
  return files;
}

/// Stability of one sample, averaged over heads.
StabilityReport measure_heads(const Matrix& x, const LoadedHeads& heads,
                              std::vector<FeatureStabilitySet>* per_head = nullptr,
                              const Matrix* xi_override = nullptr) {
  std::vector<StabilityReport> aggs;
  for (const auto& w : heads.ws) {
    const auto im = build_interaction(x, w, heads.scale);
    const Matrix xi = xi_override ? *xi_override : retrieve(x, im.m).xi;
    auto set = measure_retrieval(x, im, xi);
    aggs.push_back(set.aggregate);
    if (per_head) per_head->push_back(std::move(set));
  }
  return mean_report(aggs);
}

// ---------------------------------------------------------------- decompose

struct DecomposeArgs {
  Common common;
  WeightSource weights;
  std::string x;
};

void run_decompose(const DecomposeArgs& a) {
  const Matrix x = read_tensor(a.x);
  const auto heads = load_heads(a.weights);
  OutputSet out(a.common.out_dir);
  json summary{{"scale", heads.scale}, {"num_heads", heads.ws.size()}};
  json per_head = json::array();
  std::vector<double> etas;
  for (std::size_t h = 0; h < heads.ws.size(); ++h) {
    const auto parts = split(heads.ws[h]);
    const auto im = build_interaction(x, heads.ws[h], heads.scale);
    const std::string sfx = heads.suffix(h);
    out.tensor("S" + sfx + ".atnt", parts.sym);
    out.tensor("N" + sfx + ".atnt", parts.skew);
    out.tensor("M_sym" + sfx + ".atnt", im.sym);
    out.tensor("M_skew" + sfx + ".atnt", im.skew);
    const double eta = eta_M(im);
    etas.push_back(eta);
    json entry{{"head", h},
               {"eta_m", eta},
               {"m_sym_frobenius_sq", frobenius_sq(im.sym)},
               {"m_skew_frobenius_sq", frobenius_sq(im.skew)},
               {"s_frobenius", frobenius(parts.sym)},
               {"n_frobenius", frobenius(parts.skew)}};
    if (heads.ws[h].rows() >= 2 && frobenius_sq(heads.ws[h]) > 0.0) {
      try {
        entry["eta_h_w"] = eta_H(heads.ws[h]);
      } catch (const Error&) {
        entry["eta_h_w"] = nullptr;
      }
    }
    per_head.push_back(std::move(entry));
  }
  summary["heads"] = std::move(per_head);
  summary["eta_bar"] = eta_bar(etas);
  out.json_file("decompose.json", summary);
  out.commit();
}

// ------------------------------------------------------------------ measure

struct MeasureArgs {
  Common common;
  WeightSource weights;
  std::string x;
  std::string x_dir;
  std::string xi;
};

void run_measure(const MeasureArgs& a) {
  if (a.x.empty() == a.x_dir.empty()) {
    throw Error(ErrorCode::ConflictingModes, "give exactly one of --x and --x-dir");
  }
  const auto heads = load_heads(a.weights);
  OutputSet out(a.common.out_dir);

  if (!a.x.empty()) {
    const Matrix x = read_tensor(a.x);
    std::optional<Matrix> xi;
    if (!a.xi.empty()) {
      if (heads.multi()) {
        throw Error(ErrorCode::ConflictingModes, "--xi override needs a single head");
      }
      xi = read_tensor(a.xi);
    }
    std::vector<FeatureStabilitySet> sets;
    const auto agg = measure_heads(x, heads, &sets, xi ? &*xi : nullptr);
    if (a.common.want_json()) {
      json j{{"scale", heads.scale}};
      json hs = json::array();
      for (const auto& s : sets) hs.push_back(to_json(s));
      j["heads"] = std::move(hs);
      j["aggregate"] = to_json(agg);
      out.json_file("measure.json", j);
    }
    if (a.common.want_csv()) {
      std::ostringstream csv;
      csv << "head,feature";
      for (const auto& c : stability_csv_columns()) csv << ',' << c;
      csv << '\n';
      for (std::size_t h = 0; h < sets.size(); ++h) {
        for (std::size_t i = 0; i < sets[h].features.size(); ++i) {
          csv << h << ',' << i << ',' << stability_csv_fields(sets[h].features[i]) << '\n';
        }
      }
      out.text("measure.csv", csv.str());
    }
  } else {
    if (!a.xi.empty()) throw Error(ErrorCode::ConflictingModes, "--xi needs --x");
    const auto files = list_tensors(a.x_dir);
    std::ostringstream csv;
    csv << "sample_id";
    for (const auto& c : stability_csv_columns()) csv << ',' << c;
    csv << '\n';
    json samples = json::object();
    for (const auto& f : files) {
      const auto agg = measure_heads(read_tensor(f), heads);
      const std::string id = f.stem().string();
      csv << csv_escape(id) << ',' << stability_csv_fields(agg) << '\n';
      samples[id] = to_json(agg);
    }
    if (a.common.want_json()) out.json_file("stability.json", json{{"samples", samples}});
    if (a.common.want_csv()) out.text("stability.csv", csv.str());
  }
  out.commit();
}

// ------------------------------------------------------------------ perturb

struct ControlFlags {
  ControlParams params;
  std::string norm_reference = "alpha_scaled";
  CLI::Option* alpha = nullptr;
  CLI::Option* beta = nullptr;
  CLI::Option* tau = nullptr;
  CLI::Option* adaptive = nullptr;

  ControlParams resolved() const {
    ControlParams p = params;
    p.norm_reference =
        norm_reference == "baseline" ? NormReference::Baseline : NormReference::AlphaScaled;
    return p;
  }
};

void add_control_flags(CLI::App* cmd, ControlFlags& f, bool with_scalars) {
  if (with_scalars) {
    f.alpha = cmd->add_option("--alpha", f.params.alpha, "Circulation scale alpha")
                  ->capture_default_str();
    f.beta = cmd->add_option("--beta", f.params.beta, "Injection scale beta")
                 ->capture_default_str();
    f.tau = cmd->add_option("--tau", f.params.tau,
                            "Temperature baseline: retrieve with M/tau (excludes alpha/beta)")
                ->capture_default_str();
  }
  f.adaptive = cmd->add_flag("--adaptive", f.params.adaptive,
                             "Scale alpha-1 and beta by the call's symmetry index");
  cmd->add_option("--eps", f.params.eps, "Norm floor in per-token rescaling")
      ->capture_default_str();
  cmd->add_option("--r-min", f.params.r_min, "Lower clamp on per-token norm ratio")
      ->capture_default_str();
  cmd->add_option("--r-max", f.params.r_max, "Upper clamp on per-token norm ratio")
      ->capture_default_str();
  cmd->add_option("--norm-reference", f.norm_reference,
                  "Target row norms: alpha_scaled or baseline")
      ->check(CLI::IsMember({"alpha_scaled", "baseline"}))
      ->capture_default_str();
}

struct PerturbArgs {
  Common common;
  WeightSource weights;
  ControlFlags control;
  std::string x;
};

void run_perturb(const PerturbArgs& a) {
  const bool tau_mode = a.control.tau->count() > 0;
  if (tau_mode && (a.control.alpha->count() > 0 || a.control.beta->count() > 0 ||
                   a.control.adaptive->count() > 0)) {
    throw Error(ErrorCode::ConflictingModes,
                "--tau is a separate baseline and cannot be combined with --alpha/--beta/--adaptive");
  }
  ControlParams params = a.control.resolved();
  params.validate();
  const Matrix x = read_tensor(a.x);
  const auto heads = load_heads(a.weights);

  std::vector<InteractionMatrix> ims;
  std::vector<double> etas;
  for (const auto& w : heads.ws) {
    ims.push_back(build_interaction(x, w, heads.scale));
    etas.push_back(eta_M(ims.back()));
  }
  const double shared_eta = eta_bar(etas);

  OutputSet out(a.common.out_dir);
  json audit{{"mode", tau_mode ? "temperature" : (params.adaptive ? "adaptive" : "static")},
             {"params", to_json(params)},
             {"scale", heads.scale},
             {"eta_bar", shared_eta}};
  json per_head = json::array();
  std::vector<StabilityReport> before_all, after_all;
  for (std::size_t h = 0; h < ims.size(); ++h) {
    const auto& im = ims[h];
    const std::string sfx = heads.suffix(h);
    json entry{{"head", h}, {"eta_m", etas[h]}};
    Matrix base, blended;
    if (tau_mode) {
      base = retrieve(x, im.m).xi;
      blended = tempered_retrieval(x, im, params.tau).xi;
      entry["tau"] = params.tau;
    } else {
      auto br = params.adaptive ? adaptive_blend(x, im, params, shared_eta)
                                : blend(x, im, params);
      entry["blend"] = to_json(br);
      out.tensor("xi_alpha" + sfx + ".atnt", br.xi_alpha);
      base = std::move(br.xi_base);
      blended = std::move(br.xi_blended);
    }
    const auto before = measure_retrieval(x, im, base).aggregate;
    const auto after = measure_retrieval(x, im, blended).aggregate;
    entry["before"] = to_json(before);
    entry["after"] = to_json(after);
    before_all.push_back(before);
    after_all.push_back(after);
    out.tensor("xi_base" + sfx + ".atnt", base);
    out.tensor("xi_blended" + sfx + ".atnt", blended);
    if (heads.weights && heads.weights->wv) {
      out.tensor("attn_base" + sfx + ".atnt", value_project(base, *heads.weights, h));
      out.tensor("attn_blended" + sfx + ".atnt", value_project(blended, *heads.weights, h));
    }
    per_head.push_back(std::move(entry));
  }
  audit["heads"] = std::move(per_head);
  audit["before"] = to_json(mean_report(before_all));
  audit["after"] = to_json(mean_report(after_all));
  out.json_file("audit.json", audit);
  out.commit();
}

// -------------------------------------------------------------------- sweep

struct SweepArgs {
  Common common;
  WeightSource weights;
  ControlFlags control;
  std::string samples;
  std::vector<double> alpha_grid = {1.05, 1.10, 1.15};
  std::vector<double> beta_grid = {0.0, 3.0, 4.0, 5.0, 6.0, 7.5};
};

void run_sweep(const SweepArgs& a) {
  const ControlParams params = a.control.resolved();
  params.validate();
  const auto heads = load_heads(a.weights);
  std::vector<Matrix> samples;
  for (const auto& f : list_tensors(a.samples)) samples.push_back(read_tensor(f));
  const std::size_t threads = default_thread_count();

  std::vector<std::vector<SweepCell>> per_head;
  for (const auto& w : heads.ws) {
    per_head.push_back(sweep(samples, w, heads.scale, a.alpha_grid, a.beta_grid, params, threads));
  }
  // Mean over heads, cell by cell.
  std::vector<SweepCell> cells = per_head.front();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::vector<StabilityReport> reps;
    SweepCell& cell = cells[c];
    cell.eta_m_perturbed = cell.delta_norm = cell.clamp_hit_fraction = 0.0;
    cell.alpha_eff = cell.beta_eff = 0.0;
    for (const auto& hc : per_head) {
      reps.push_back(hc[c].stability);
      cell.eta_m_perturbed += hc[c].eta_m_perturbed;
      cell.delta_norm += hc[c].delta_norm;
      cell.clamp_hit_fraction += hc[c].clamp_hit_fraction;
      cell.alpha_eff += hc[c].alpha_eff;
      cell.beta_eff += hc[c].beta_eff;
    }
    const double n = static_cast<double>(per_head.size());
    cell.stability = mean_report(reps);
    cell.eta_m_perturbed /= n;
    cell.delta_norm /= n;
    cell.clamp_hit_fraction /= n;
    cell.alpha_eff = params.adaptive ? cell.alpha_eff / n : cell.alpha;
    cell.beta_eff = params.adaptive ? cell.beta_eff / n : cell.beta;
  }

  OutputSet out(a.common.out_dir);
  std::ostringstream csv;
  write_sweep_csv(cells, csv);
  out.text("sweep.csv", csv.str());
  out.json_file("sweep_config.json", json{{"params", to_json(params)},
                                          {"alpha_grid", a.alpha_grid},
                                          {"beta_grid", a.beta_grid},
                                          {"num_samples", samples.size()},
                                          {"num_heads", heads.ws.size()},
                                          {"scale", heads.scale}});
  out.commit();
}

// ---------------------------------------------------------------- correlate

struct CorrelateArgs {
  Common common;
  std::string stability;
  std::string metrics;
  std::vector<std::string> columns;
  std::string layers;
};

std::optional<LayerRange> parse_layers(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const auto dash = s.find('-', 1);
  if (dash == std::string::npos) {
    const double v = parse_double(s, "--layers");
    return LayerRange{v, v};
  }
  return LayerRange{parse_double(s.substr(0, dash), "--layers"),
                    parse_double(s.substr(dash + 1), "--layers")};
}

void run_correlate(const CorrelateArgs& a) {
  const auto stab = read_metric_csv(a.stability, parse_layers(a.layers));
  const auto metrics = read_metric_csv(a.metrics);

  std::vector<std::pair<std::string, std::string>> pairs;
  if (a.columns.empty()) {
    for (const auto& s : stab.columns())
      for (const auto& m : metrics.columns()) pairs.emplace_back(s, m);
  } else {
    for (const auto& c : a.columns) {
      const auto colon = c.find(':');
      if (colon == std::string::npos) {
        throw Error(ErrorCode::InvalidParams, "--columns entries look like stab_col:metric_col");
      }
      pairs.emplace_back(c.substr(0, colon), c.substr(colon + 1));
    }
  }

  std::vector<std::pair<std::size_t, std::size_t>> joined;
  for (std::size_t r = 0; r < stab.num_rows(); ++r) {
    if (auto m = metrics.row_of(stab.ids()[r])) joined.emplace_back(r, *m);
  }
  std::set<std::string> all_ids(stab.ids().begin(), stab.ids().end());
  all_ids.insert(metrics.ids().begin(), metrics.ids().end());
  const std::size_t dropped = all_ids.size() - joined.size();
  if (dropped > 0) {
    std::cerr << "correlate: dropped " << dropped << " sample_id(s) not present in both tables\n";
  }

  std::ostringstream csv;
  csv << "stability_column,metric_column,rho,n,dropped\n";
  json rows = json::array();
  for (const auto& [sc, mc] : pairs) {
    const auto& scol = stab.column(sc);
    const auto& mcol = metrics.column(mc);
    std::vector<double> xs, ys;
    for (const auto& [r, m] : joined) {
      xs.push_back(scol[r]);
      ys.push_back(mcol[m]);
    }
    const double rho = spearman(xs, ys);
    csv << csv_escape(sc) << ',' << csv_escape(mc) << ',' << format_double(rho) << ','
        << joined.size() << ',' << dropped << '\n';
    rows.push_back(json{{"stability_column", sc},
                        {"metric_column", mc},
                        {"rho", rho},
                        {"n", joined.size()},
                        {"dropped", dropped}});
  }
  OutputSet out(a.common.out_dir);
  if (a.common.want_csv()) out.text("correlate.csv", csv.str());
  if (a.common.want_json()) out.json_file("correlate.json", json{{"correlations", rows}});
  out.commit();
}

// ----------------------------------------------------------------- stratify

struct StratifyArgs {
  Common common;
  std::string metrics;
  std::string treated;
  std::string by;
  double q = 0.2;
};

void run_stratify(const StratifyArgs& a) {
  const auto table = read_metric_csv(a.metrics);
  const auto result = stratify(table, a.by, a.q);
  json j = to_json(result);
  if (!a.treated.empty()) {
    const auto treated = read_metric_csv(a.treated);
    auto deltas = [&](const std::vector<std::string>& ids) {
      json d = json::object();
      for (const auto& md : paired_delta(table, treated, ids)) d[md.metric] = md.delta;
      return d;
    };
    j["paired_delta"] = json{{"top", deltas(result.top_ids)},
                             {"bottom", deltas(result.bottom_ids)},
                             {"all", deltas(table.ids())}};
  }
  OutputSet out(a.common.out_dir);
  out.json_file("stratify.json", j);
  out.commit();
}

// -------------------------------------------------------------------- synth

struct SynthArgs {
  Common common;
  std::string kind = "features";
  std::size_t L = 16;
  std::size_t d = 8;
  std::size_t n = 8;
  double k = 0.0;
  std::size_t count = 1;
  std::string out;
};

void run_synth(const SynthArgs& a) {
  OutputSet out(a.common.out_dir);
  const Seed seed{a.common.seed};
  if (a.kind == "coupling") {
    if (a.count != 1) throw Error(ErrorCode::InvalidParams, "--count applies to features only");
    out.tensor(a.out.empty() ? "coupling.atnt" : a.out,
               gen_controlled_symmetry_coupling(a.n, a.k, seed));
  } else if (a.count == 1) {
    out.tensor(a.out.empty() ? "features.atnt" : a.out, gen_feature_map(a.L, a.d, seed));
  } else {
    // Sample i uses seed + i.
    for (std::size_t i = 0; i < a.count; ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "sample_%04zu.atnt", i);
      out.tensor(name, gen_feature_map(a.L, a.d, Seed{a.common.seed + i}));
    }
  }
  out.commit();
}

// ------------------------------------------------------------------ iterate

struct IterateArgs {
  Common common;
  std::string x;
  std::string w;
  IterateOptions opt;
};

void run_iterate(const IterateArgs& a) {
  const Matrix x = read_tensor(a.x);
  const Matrix w = read_tensor(a.w);
  const auto rec = iterate_retrieval(x, w, a.opt);
  OutputSet out(a.common.out_dir);
  std::ostringstream csv;
  write_trajectory_csv(rec, csv);
  out.text("trajectory.csv", csv.str());
  json j = to_json(rec);
  j["alpha"] = a.opt.alpha;
  j["scale"] = a.opt.scale;
  j["tol"] = a.opt.tol;
  j["max_iters"] = a.opt.max_iters;
  out.json_file("trajectory.json", j);
  out.tensor("final_state.atnt", rec.states.back());
  out.commit();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symmetric/skew analysis and circulation control of self-attention"};
  app.require_subcommand(1);

  DecomposeArgs dec;
  auto* c_dec = app.add_subcommand("decompose", "Split W and M(X) into symmetric and skew parts");
  add_common(c_dec, dec.common);
  add_weight_flags(c_dec, dec.weights);
  c_dec->add_option("--x", dec.x, "Feature map X (L x d_in tensor)")->required();

  MeasureArgs mea;
  auto* c_mea = app.add_subcommand("measure", "Energy, lambda, instability and alignment of Xi");
  add_common(c_mea, mea.common);
  add_weight_flags(c_mea, mea.weights);
  c_mea->add_option("--x", mea.x, "Feature map X (L x d_in tensor)");
  c_mea->add_option("--x-dir", mea.x_dir, "Directory of feature maps; writes stability.csv");
  c_mea->add_option("--xi", mea.xi, "Measure this retrieved state instead of softmax(M) X");

  PerturbArgs per;
  auto* c_per = app.add_subcommand("perturb", "Static, adaptive or temperature control");
  add_common(c_per, per.common);
  add_weight_flags(c_per, per.weights);
  add_control_flags(c_per, per.control, true);
  c_per->add_option("--x", per.x, "Feature map X (L x d_in tensor)")->required();

  SweepArgs swp;
  auto* c_swp = app.add_subcommand("sweep", "Stability over an (alpha, beta) grid");
  add_common(c_swp, swp.common);
  add_weight_flags(c_swp, swp.weights);
  add_control_flags(c_swp, swp.control, false);
  c_swp->add_option("--samples", swp.samples, "Directory of feature-map tensors")->required();
  c_swp->add_option("--alpha-grid", swp.alpha_grid, "Comma-separated alphas")
      ->delimiter(',')
      ->capture_default_str();
  c_swp->add_option("--beta-grid", swp.beta_grid, "Comma-separated betas")
      ->delimiter(',')
      ->capture_default_str();

  CorrelateArgs cor;
  auto* c_cor = app.add_subcommand("correlate", "Spearman rho between stability and metric columns");
  add_common(c_cor, cor.common);
  c_cor->add_option("--stability", cor.stability, "Stability CSV (sample_id first)")->required();
  c_cor->add_option("--metrics", cor.metrics, "External metric CSV (sample_id first)")->required();
  c_cor->add_option("--columns", cor.columns,
                    "Pairs stab_col:metric_col, comma-separated (default: all pairs)")
      ->delimiter(',');
  c_cor->add_option("--layers", cor.layers,
                    "Average stability rows whose layer column lies in s-e");

  StratifyArgs str;
  auto* c_str = app.add_subcommand("stratify", "Top/bottom quantile subsets of a metric table");
  add_common(c_str, str.common);
  c_str->add_option("--metrics", str.metrics, "Metric CSV (sample_id first)")->required();
  c_str->add_option("--by", str.by, "Column to sort by (descending)")->required();
  c_str->add_option("--q", str.q, "Quantile in (0, 0.5)")->capture_default_str();
  c_str->add_option("--treated", str.treated, "Treated table for paired deltas");

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Seeded synthetic feature maps or couplings");
  add_common(c_syn, syn.common);
  c_syn->add_option("--kind", syn.kind, "features or coupling")
      ->check(CLI::IsMember({"features", "coupling"}))
      ->capture_default_str();
  c_syn->add_option("--L", syn.L, "Rows of the feature map")->capture_default_str();
  c_syn->add_option("--d", syn.d, "Columns of the feature map")->capture_default_str();
  c_syn->add_option("--n", syn.n, "Size of the coupling matrix")->capture_default_str();
  c_syn->add_option("--k", syn.k, "Asymmetry scale of the coupling")->capture_default_str();
  c_syn->add_option("--count", syn.count, "Number of feature maps (seeds seed..seed+count-1)")
      ->capture_default_str();
  c_syn->add_option("--out", syn.out, "Output file name inside --out-dir");

  IterateArgs itr;
  auto* c_itr = app.add_subcommand("iterate", "Iterate retrieval and classify the attractor");
  add_common(c_itr, itr.common);
  c_itr->add_option("--x", itr.x, "Initial feature map X0")->required();
  c_itr->add_option("--w", itr.w, "Interaction matrix W")->required();
  c_itr->add_option("--alpha", itr.opt.alpha, "Circulation scale")->capture_default_str();
  c_itr->add_option("--scale", itr.opt.scale, "Logit scale")->capture_default_str();
  c_itr->add_option("--max-iters", itr.opt.max_iters, "Iteration cap")->capture_default_str();
  c_itr->add_option("--tol", itr.opt.tol, "Relative recurrence tolerance")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*c_dec) run_decompose(dec);
    else if (*c_mea) run_measure(mea);
    else if (*c_per) run_perturb(per);
    else if (*c_swp) run_sweep(swp);
    else if (*c_cor) run_correlate(cor);
    else if (*c_str) run_stratify(str);
    else if (*c_syn) run_synth(syn);
    else if (*c_itr) run_iterate(itr);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
