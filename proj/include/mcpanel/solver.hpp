#pragma once

// Block-coordinate solver for the penalized potential-outcome model on a
// standardized design. The public entry points in estimator.hpp wrap this;
// model selection uses it directly so that the standardized design and the
// per-mask feature norms are built once per fold.

#include "mcpanel/panel.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mcpanel {

using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using BoolVector = Eigen::Array<bool, Eigen::Dynamic, 1>;

/// Parameters on the standardized covariate scale.
struct StdParams {
  Eigen::MatrixXd L;
  Eigen::MatrixXd H;  // kept X columns x kept Z rows
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd delta;
};

/// Covariates centered and scaled to unit sample standard deviation (X
/// columns, Z rows, V slices). Constant covariates are dropped.
class Design {
 public:
  static Design build(const Panel& panel, bool standardize);

  Index N() const { return N_; }
  Index T() const { return T_; }
  Index P() const { return X_.cols(); }
  Index Q() const { return Z_.rows(); }
  Index J() const { return static_cast<Index>(V_.size()); }

  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::MatrixXd& Z() const { return Z_; }
  const Eigen::MatrixXd& Zt() const { return Zt_; }
  const std::vector<Eigen::MatrixXd>& V() const { return V_; }
  /// False for H entries linking two identity blocks.
  const BoolMatrix& h_allowed() const { return h_allowed_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  StdParams zeros() const;
  Eigen::MatrixXd predict(const StdParams& p) const;

  /// Back-transform to the original covariate scale; centering shifts are
  /// absorbed into gamma and delta.
  ModelParams to_original(const StdParams& p, bool normalize_effects) const;
  StdParams to_standardized(const ModelParams& p) const;

  /// Original-scale support restricted to the kept covariates.
  BoolMatrix h_mask_from(const Eigen::MatrixXd& H_original) const;
  BoolVector beta_mask_from(const Eigen::VectorXd& beta_original) const;

 private:
  Index N_ = 0, T_ = 0;
  Index P_orig_ = 0, Q_orig_ = 0, J_orig_ = 0;
  Eigen::MatrixXd X_, Z_, Zt_;
  std::vector<Eigen::MatrixXd> V_;
  std::vector<Index> x_cols_, z_rows_, v_slices_;
  Eigen::VectorXd x_center_, x_scale_, z_center_, z_scale_, v_center_, v_scale_;
  BoolMatrix h_allowed_;
  std::vector<std::string> warnings_;
};

/// Mask-dependent quantities shared by every fit on the same observed set.
struct MaskGeometry {
  Eigen::ArrayXXd mask;          // 1 = cell enters the loss
  bool full = false;             // every cell observed
  double n = 0.0;                // number of observed cells
  Eigen::VectorXd row_count;     // observed cells per unit
  Eigen::VectorXd col_count;     // observed cells per period
  Eigen::MatrixXd x_sq_mask;     // P x T: sum_i mask_it X_ia^2
  Eigen::MatrixXd h_norm;        // P x Q: squared norm of masked X_a Z_b'
  Eigen::VectorXd beta_norm;     // J: squared norm of masked V_j

  static MaskGeometry build(const Design& design, Eigen::ArrayXXd mask);
};

struct SolverSettings {
  double lambda_L = 0.0;
  double lambda_H = 0.0;
  double lambda_beta = 0.0;
  int max_iterations = 500;
  double rel_tolerance = 1e-6;
  bool unit_effects = true;
  bool time_effects = true;
  Index rank_cap = -1;              // >= 0: keep at most this many singular values
  const BoolMatrix* h_support = nullptr;    // optional restriction
  const BoolVector* beta_support = nullptr;
};

struct SolveResult {
  StdParams params;
  Eigen::MatrixXd residual;  // mask o (Y - prediction)
  std::vector<double> objective_trace;  // entry 0 is the starting point
  bool converged = false;
  int n_iterations = 0;
  double loss = 0.0;         // (1/n) ||residual||_F^2
  double nuclear_norm = 0.0;
  Index rank_L = 0;          // singular values above the reporting cutoffs
};

SolveResult solve(const Design& design, const MaskGeometry& geometry, const Eigen::MatrixXd& Y,
                  const SolverSettings& settings, const StdParams* warm_start = nullptr);

/// Penalty values at which each regularized block is exactly zero, computed
/// from the residual of a fixed-effects-only fit.
struct LambdaBounds {
  double lambda_L = 0.0;
  double lambda_H = 0.0;
  double lambda_beta = 0.0;
};

LambdaBounds lambda_bounds(const Design& design, const MaskGeometry& geometry,
                           const Eigen::MatrixXd& Y, bool unit_effects, bool time_effects);

/// First-order optimality diagnostics of a solution.
struct OptimalityReport {
  double h_violation = 0.0;     // worst subgradient violation over H entries
  double beta_violation = 0.0;  // same for beta
  double svt_gap = 0.0;         // max |L - svt(L + R, lambda_L n / 2)|
  double effects_gap = 0.0;     // max |(2/n) * row/col sums of R|
  double worst() const;
};

OptimalityReport optimality(const Design& design, const MaskGeometry& geometry,
                            const StdParams& params, const Eigen::MatrixXd& residual,
                            const SolverSettings& settings);

}  // namespace mcpanel
