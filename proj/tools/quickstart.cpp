// Minimal tour of the library: decompose a random head, measure the baseline
// retrieval, then apply static circulation control at alpha = 1.05, beta = 5.

#include <iostream>

#include "hopfattn/hopfattn.hpp"

int main() {
  using namespace hopfattn;

  const Matrix x = gen_feature_map(16, 8, Seed{7});
  const Matrix w = gen_feature_map(8, 8, Seed{8});
  const auto im = build_interaction(x, w, 1.0 / std::sqrt(8.0));

  std::cout << "eta_M = " << eta_M(im) << '\n';

  const auto baseline = measure_retrieval(x, im, retrieve(x, im.m));
  std::cout << "baseline: -E = " << -baseline.aggregate.energy
            << "  r = " << baseline.aggregate.instability_fraction
            << "  align = " << baseline.aggregate.alignment << '\n';

  ControlParams params;
  params.alpha = 1.05;
  params.beta = 5.0;
  const auto br = blend(x, im, params);
  const auto after = measure_retrieval(x, im, br.xi_blended);
  std::cout << "blended:  -E = " << -after.aggregate.energy
            << "  r = " << after.aggregate.instability_fraction
            << "  align = " << after.aggregate.alignment
            << "  |delta| = " << br.delta_norm
            << "  clamped rows = " << br.clamp_hit_fraction << '\n';
  return 0;
}
