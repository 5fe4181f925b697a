#include "mcpanel/inference.hpp"

#include "mcpanel/csv_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>

namespace mcpanel {

std::string to_string(PermutationFamily family) {
  return family == PermutationFamily::iid ? "iid" : "moving_block";
}

PermutationFamily parse_family(const std::string& text) {
  if (text == "iid") return PermutationFamily::iid;
  if (text == "moving_block" || text == "moving-block") return PermutationFamily::moving_block;
  throw std::invalid_argument("unknown permutation family '" + text + "'");
}

namespace {

// min(n!, cap)
Index capped_factorial(Index n, Index cap) {
  Index f = 1;
  for (Index k = 2; k <= n; ++k) {
    if (f > cap / k) return cap;
    f *= k;
  }
  return std::min(f, cap);
}

std::vector<Index> iid_bijection(const PermutationPlan& plan, Index index) {
  const Index n = plan.N * plan.T;
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  if (index == 0) return perm;
  if (plan.exhaustive) {
    for (Index k = 0; k < index; ++k) std::next_permutation(perm.begin(), perm.end());
    return perm;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(plan.seed), static_cast<std::uint32_t>(plan.seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  for (Index k = n - 1; k > 0; --k) {
    std::uniform_int_distribution<Index> pick(0, k);
    std::swap(perm[k], perm[pick(rng)]);
  }
  return perm;
}

}  // namespace

PermutationPlan make_plan(PermutationFamily family, Index N, Index T, Index n_perm,
                          std::uint64_t seed) {
  if (N <= 0 || T <= 0) throw std::invalid_argument("permutation plan needs a nonempty panel");
  PermutationPlan plan;
  plan.family = family;
  plan.N = N;
  plan.T = T;
  plan.seed = seed;
  if (family == PermutationFamily::moving_block) {
    plan.count = T;
    return plan;
  }
  if (n_perm < 0) throw std::invalid_argument("n_perm must be nonnegative");
  const Index feasible = capped_factorial(N * T, n_perm + 2);
  plan.exhaustive = feasible <= n_perm + 1;
  plan.count = plan.exhaustive ? feasible : n_perm + 1;
  return plan;
}

double test_statistic(const Eigen::MatrixXd& residuals, const std::vector<Cell>& treated) {
  if (treated.empty()) throw std::invalid_argument("test statistic needs at least one treated cell");
  double s = 0.0;
  for (const Cell& c : treated) s += std::abs(residuals(c.i, c.t));
  return s / static_cast<double>(treated.size());
}

Eigen::MatrixXd permute_residuals(const Eigen::MatrixXd& residuals, const PermutationPlan& plan,
                                  Index index) {
  if (index < 0 || index >= plan.count) throw std::out_of_range("permutation index out of range");
  if (residuals.rows() != plan.N || residuals.cols() != plan.T) {
    throw std::invalid_argument("residual dimensions do not match the permutation plan");
  }
  const Index N = plan.N, T = plan.T;
  Eigen::MatrixXd out(N, T);
  if (plan.family == PermutationFamily::moving_block) {
    for (Index t = 0; t < T; ++t) out.col(t) = residuals.col((t + index) % T);
    return out;
  }
  const std::vector<Index> perm = iid_bijection(plan, index);
  for (Index k = 0; k < N * T; ++k) out(k % N, k / N) = residuals(perm[k] % N, perm[k] / N);
  return out;
}

InferenceResult permutation_test(const Eigen::MatrixXd& residuals, const std::vector<Cell>& treated,
                                 const PermutationPlan& plan) {
  InferenceResult r;
  r.plan = plan;
  r.statistic = test_statistic(residuals, treated);
  r.permuted_statistics.reserve(plan.count);
  Index below = 0;
  for (Index k = 0; k < plan.count; ++k) {
    const double s = k == 0 ? r.statistic : test_statistic(permute_residuals(residuals, plan, k), treated);
    r.permuted_statistics.push_back(s);
    if (s < r.statistic) ++below;
  }
  r.p_value = 1.0 - static_cast<double>(below) / static_cast<double>(plan.count);
  return r;
}

InferenceResult permutation_p_value(const Panel& panel, const FitResult& fit,
                                    const PermutationPlan& plan) {
  if (fit.mode != Mode::imposed_null) {
    throw std::invalid_argument("permutation inference requires an imposed_null fit");
  }
  if (plan.N != panel.N() || plan.T != panel.T()) {
    throw std::invalid_argument("permutation plan does not match the panel");
  }
  const Eigen::MatrixXd U = panel.Y() - predict_y0(panel, fit.params);
  return permutation_test(U, panel.treated(), plan);
}

void write_inference_csv(std::ostream& os, const InferenceResult& r) {
  os << "index,statistic\n";
  for (std::size_t k = 0; k < r.permuted_statistics.size(); ++k) {
    os << k << ',' << format_double(r.permuted_statistics[k]) << '\n';
  }
  os << "p_value," << format_double(r.p_value) << '\n';
}

}  // namespace mcpanel
