#pragma once

#include "mcpanel/panel.hpp"

#include <string>
#include <vector>

namespace mcpanel {

enum class Mode { imposed_null, control_only };

std::string to_string(Mode mode);
/// Accepts "imposed_null", "imposed-null", "control_only", "control-only".
Mode parse_mode(const std::string& text);

struct FitOptions {
  bool unit_effects = true;
  bool time_effects = true;
  bool standardize = true;
};

struct FitResult {
  ModelParams params;
  std::vector<double> objective_trace;
  bool converged = false;
  int n_iterations = 0;
  std::vector<std::pair<Index, Index>> support_H;
  std::vector<Index> support_beta;
  Index rank_L = 0;

  Mode mode = Mode::imposed_null;
  PenaltyConfig penalties;
  FitOptions options;
  double loss = 0.0;       // (1/n) squared residual norm over the loss cells
  double objective = 0.0;  // final entry of objective_trace
  std::vector<std::string> warnings;

  // Set by fit_post: coefficients outside these sets were pinned to zero and
  // L was hard-truncated to rank_cap.
  bool post = false;
  Index rank_cap = -1;
  std::vector<std::pair<Index, Index>> allowed_H;
  std::vector<Index> allowed_beta;
};

/// Cells entering the loss: all cells, or the control cells.
Eigen::ArrayXXd loss_mask(const Panel& panel, Mode mode);

FitResult fit(const Panel& panel, const PenaltyConfig& penalties, Mode mode,
              const FitOptions& options = {});

/// Unpenalized refit on the first-stage supports with L truncated to the
/// first-stage rank.
FitResult fit_post(const Panel& panel, const FitResult& first_stage, Mode mode);

struct LambdaMax {
  double lambda_L = 0.0;
  double lambda_H = 0.0;
  double lambda_beta = 0.0;
};

LambdaMax lambda_max(const Panel& panel, Mode mode, const FitOptions& options = {});
double lambda_max_L(const Panel& panel, Mode mode, const FitOptions& options = {});
double lambda_max_H(const Panel& panel, Mode mode, const FitOptions& options = {});
double lambda_max_beta(const Panel& panel, Mode mode, const FitOptions& options = {});

/// Largest subgradient violation of the fitted parameters (H, beta, L and
/// fixed effects), evaluated on the standardized scale used by the solver.
double kkt_violation(const Panel& panel, const FitResult& fit);

}  // namespace mcpanel
