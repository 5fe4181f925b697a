#pragma once

#include "mcpanel/estimator.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace mcpanel {

enum class PermutationFamily { iid, moving_block };

std::string to_string(PermutationFamily family);
/// Accepts "iid", "moving_block", "moving-block".
PermutationFamily parse_family(const std::string& text);

/// Index 0 is always the identity. moving_block: index = common time shift,
/// count = T. iid: random bijections of the NT cells drawn from (seed, index),
/// or every bijection when (NT)! does not exceed the requested count + 1.
struct PermutationPlan {
  PermutationFamily family = PermutationFamily::moving_block;
  Index count = 0;
  std::uint64_t seed = 0;
  Index N = 0;
  Index T = 0;
  bool exhaustive = false;
};

PermutationPlan make_plan(PermutationFamily family, Index N, Index T, Index n_perm = 999,
                          std::uint64_t seed = 0);

/// Mean absolute residual over the treated cells.
double test_statistic(const Eigen::MatrixXd& residuals, const std::vector<Cell>& treated);

/// moving_block: entry (i, t) <- U(i, (t + index) mod T). iid: entries
/// rearranged by the index-th bijection.
Eigen::MatrixXd permute_residuals(const Eigen::MatrixXd& residuals, const PermutationPlan& plan,
                                  Index index);

struct InferenceResult {
  double statistic = 0.0;
  std::vector<double> permuted_statistics;  // in plan order, identity first
  double p_value = 1.0;
  PermutationPlan plan;
};

/// p = 1 - F(S) with F(x) the share of permuted statistics strictly below x.
InferenceResult permutation_test(const Eigen::MatrixXd& residuals, const std::vector<Cell>& treated,
                                 const PermutationPlan& plan);

/// Residuals Y - predict_y0 of an imposed-null fit; control-only fits are
/// rejected.
InferenceResult permutation_p_value(const Panel& panel, const FitResult& fit,
                                    const PermutationPlan& plan);

/// index,statistic rows then a final p_value row.
void write_inference_csv(std::ostream& os, const InferenceResult& result);

}  // namespace mcpanel
