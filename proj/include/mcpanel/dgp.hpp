#pragma once

#include "mcpanel/panel.hpp"

#include <cstdint>
#include <random>

namespace mcpanel {

struct DgpConfig {
  Index N = 100;
  Index T = 80;
  double tau = 1.0;
  Index rank_L = 5;
  double w = 0.1;
  double sigma_max = 0.8;
  Index p = 50;
  Index q = 20;
  double h_size = 1.0;   // variance of active H entries
  double h_prob = 0.025;
  Index B = 1000;
  double b_size = 1.0;   // variance of active beta entries
  double b_prob = 0.02;
  double sigma_eps = 1.0;  // shock standard deviation
  double zeta_L = 1.0;     // rate of the exponential singular values
  std::uint64_t seed = 1;
  bool exact_count_bernoulli = false;

  void check() const;
};

struct SimulatedPanel {
  Panel panel;
  ModelParams truth;
  double tau = 0.0;
  Eigen::MatrixXd shocks;
};

SimulatedPanel generate(const DgpConfig& config);

/// Symmetric matrix with unit diagonal and U(0, sigma_max) off-diagonals,
/// repaired to be positive semidefinite.
Eigen::MatrixXd random_correlation(Index dim, double sigma_max, std::mt19937_64& rng);

}  // namespace mcpanel
