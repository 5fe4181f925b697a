#pragma once

#include "mcpanel/panel.hpp"
#include "oracles.hpp"

#include <random>

namespace fixtures {

struct Shape {
  int N = 8;
  int T = 6;
  int P = 0;
  int Q = 0;
  int J = 0;
  double w = 0.0;  // treatment probability
};

inline mcpanel::PanelData random_data(const Shape& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  mcpanel::PanelData d;
  d.Y = oracle::gaussian(s.N, s.T, rng);
  d.W = Eigen::MatrixXd::Zero(s.N, s.T);
  std::bernoulli_distribution b(s.w);
  for (int i = 0; i < s.N; ++i) {
    for (int t = 0; t < s.T; ++t) d.W(i, t) = b(rng) ? 1.0 : 0.0;
  }
  d.X = oracle::gaussian(s.N, s.P, rng);
  d.Z = oracle::gaussian(s.Q, s.T, rng);
  for (int j = 0; j < s.J; ++j) d.V.push_back(oracle::gaussian(s.N, s.T, rng));
  return d;
}

inline mcpanel::Panel random_panel(const Shape& s, std::uint64_t seed) {
  return mcpanel::validate(random_data(s, seed));
}

}  // namespace fixtures
