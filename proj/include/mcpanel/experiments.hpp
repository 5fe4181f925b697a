#pragma once

#include "mcpanel/dgp.hpp"
#include "mcpanel/inference.hpp"
#include "mcpanel/selection.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace mcpanel {

/// Estimator variants: no_reg, imp0, imp0_rot, imp0_post, imp0_1se, not0.
const std::vector<std::string>& variant_names();

struct VariantOutcome {
  std::string variant;
  double tau_hat = 0.0;
  double size_H = 0.0;
  double size_beta = 0.0;
  double rank_L = 0.0;
  double h_mse = 0.0;     // mean squared error over all H entries
  double beta_mse = 0.0;
  double p_value = -1.0;  // negative when no test was run
  bool converged = true;
};

struct ExperimentSettings {
  GridSpec grid;
  int folds = 5;
  CvOptions cv;
  int max_iterations = 500;
  double rel_tolerance = 1e-6;
  bool inference = true;
  PermutationFamily family = PermutationFamily::moving_block;
  Index n_perm = 999;
  std::vector<std::string> variants;  // empty: all
};

struct RunOutcome {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  std::string status = "ok";
  Index N = 0;
  Index T = 0;
  double sigma_eps = 0.0;
  Index true_size_H = 0;
  Index true_size_beta = 0;
  std::vector<VariantOutcome> variants;
};

/// Draws one panel and evaluates the requested variants. Cross-validation
/// uses cv_seed; permutation plans use the DGP seed.
RunOutcome run_experiment(const DgpConfig& dgp, const ExperimentSettings& settings,
                          std::uint64_t cv_seed);

/// Deterministic 64-bit seed from a base seed and two indices.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b);

/// Worker count from MCPANEL_WORKERS (default 1).
int workers_from_env();

struct Setting {
  std::string name;  // "T" or "sigma_eps"
  double value = 0.0;
  DgpConfig dgp;
  int runs = 0;
};

struct ReplicationSpec {
  std::string target;  // fig3, fig4, fig5, fig8, fig9, fig10 or "simulate"
  double scale = 0.25;
  int runs = -1;         // < 0: scaled default
  int grid_points = -1;  // < 0: scaled default
  // Below full scale, start the penalty axes at 1e-2 of the maximum and
  // leave out zero.
  bool desk_grid = true;
  std::uint64_t seed = 1;
  int workers = 1;
  DgpConfig dgp;  // base configuration; N, T and sigma_eps are overridden per setting
  ExperimentSettings settings;
};

const std::vector<std::string>& replication_targets();

/// Settings of a target at the requested scale. "simulate" yields a single
/// setting using the base configuration unchanged.
std::vector<Setting> replication_settings(const ReplicationSpec& spec);
int default_runs(const std::string& target, double scale);
int default_grid_points(double scale);
void apply_desk_grid(GridSpec& grid, double scale);

struct ReplicationResult {
  ReplicationSpec spec;
  std::vector<Setting> settings;
  std::vector<std::vector<RunOutcome>> runs;  // per setting, by run index
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

ReplicationResult replicate(const ReplicationSpec& spec, const ProgressFn& progress = {});

/// One row per run and variant.
void write_runs_csv(std::ostream& os, const ReplicationResult& result);
/// Per setting and variant: the quantity plotted by the target figure.
void write_aggregate_csv(std::ostream& os, const ReplicationResult& result);

}  // namespace mcpanel
