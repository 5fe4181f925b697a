#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace mcpanel {

using Index = Eigen::Index;

/// Raised when panel inputs violate a structural invariant. Carries the
/// coordinates of the first offending cell when there is one.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what, Index row = -1, Index col = -1)
      : std::invalid_argument(what), row_(row), col_(col) {}
  Index row() const { return row_; }
  Index col() const { return col_; }

 private:
  Index row_;
  Index col_;
};

struct Cell {
  Index i;
  Index t;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// Unvalidated panel inputs as read from disk or produced by a generator.
struct PanelData {
  Eigen::MatrixXd Y;               // N x T outcomes
  Eigen::MatrixXd W;               // N x T, entries in {0, 1}
  Eigen::MatrixXd X;               // N x P unit covariates (P may be 0)
  Eigen::MatrixXd Z;               // Q x T time covariates (Q may be 0)
  std::vector<Eigen::MatrixXd> V;  // J slices, each N x T

  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::vector<std::string> v_names;

  // Marks X columns / Z rows that are identity blocks added by
  // augment_linear_terms; H entries linking two such blocks are pinned to 0.
  std::vector<bool> x_identity;
  std::vector<bool> z_identity;
};

/// A panel whose invariants have been checked. Immutable; the treated set M
/// and control set O are computed once.
class Panel {
 public:
  const PanelData& data() const { return data_; }
  const Eigen::MatrixXd& Y() const { return data_.Y; }
  const Eigen::MatrixXd& W() const { return data_.W; }
  const Eigen::MatrixXd& X() const { return data_.X; }
  const Eigen::MatrixXd& Z() const { return data_.Z; }
  const std::vector<Eigen::MatrixXd>& V() const { return data_.V; }

  Index N() const { return data_.Y.rows(); }
  Index T() const { return data_.Y.cols(); }
  Index P() const { return data_.X.cols(); }
  Index Q() const { return data_.Z.rows(); }
  Index J() const { return static_cast<Index>(data_.V.size()); }

  const std::vector<Cell>& treated() const { return treated_; }
  const std::vector<Cell>& control() const { return control_; }
  Index n_treated() const { return static_cast<Index>(treated_.size()); }
  Index n_control() const { return static_cast<Index>(control_.size()); }

  /// 1.0 on control cells, 0.0 on treated cells.
  Eigen::ArrayXXd control_mask() const;

 private:
  friend Panel validate(PanelData panel);
  explicit Panel(PanelData data) : data_(std::move(data)) {}

  PanelData data_;
  std::vector<Cell> treated_;
  std::vector<Cell> control_;
};

/// Checks dimensions, finiteness and binary treatment; fills default covariate
/// names. Throws ValidationError naming the first offending cell.
Panel validate(PanelData panel);

/// Fitted parameters of the potential-outcome model on the original covariate
/// scale.
struct ModelParams {
  Eigen::MatrixXd L;      // N x T
  Eigen::MatrixXd H;      // P x Q
  Eigen::VectorXd beta;   // J
  Eigen::VectorXd gamma;  // N unit effects
  Eigen::VectorXd delta;  // T time effects

  static ModelParams zeros(Index N, Index T, Index P, Index Q, Index J);
  bool all_finite() const;
};

struct PenaltyConfig {
  double lambda_L = 0.0;
  double lambda_H = 0.0;
  double lambda_beta = 0.0;
  int max_iterations = 500;
  double rel_tolerance = 1e-6;

  void check() const;
};

/// L + X H Z + [V_it' beta] + gamma 1' + 1 delta'.
Eigen::MatrixXd predict_y0(const Panel& panel, const ModelParams& params);

/// X~ = [X | I_N], Z~ = [Z ; I_T]. Not idempotent: a second call appends
/// another pair of identity blocks.
Panel augment_linear_terms(const Panel& panel);

}  // namespace mcpanel
