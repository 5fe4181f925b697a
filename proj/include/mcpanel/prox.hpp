#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mcpanel {

/// Entries with |value| at or below this cutoff count as zero when reporting
/// supports of H and beta.
inline constexpr double kZeroCutoff = 1e-10;

/// Singular values below this fraction of the largest one count as zero when
/// reporting rank.
inline constexpr double kRankCutoff = 1e-12;

inline constexpr double kGramThreshold = 1e-4;

class SvdError : public std::runtime_error {
 public:
  SvdError(Eigen::Index rows, Eigen::Index cols);
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

 private:
  Eigen::Index rows_;
  Eigen::Index cols_;
};

/// Thin singular value decomposition, r = min(N, T).
struct SvdFactors {
  Eigen::MatrixXd left_vectors;    // N x r, orthonormal columns
  Eigen::VectorXd singular_values; // length r, nonincreasing, >= 0
  Eigen::MatrixXd right_vectors;   // T x r, orthonormal columns

  Eigen::MatrixXd reconstruct() const;
  /// Number of singular values above kRankCutoff * sigma_max.
  Eigen::Index rank() const;
};

SvdFactors thin_svd(const Eigen::MatrixXd& matrix);

inline double soft_threshold(double x, double threshold) {
  if (x > threshold) return x - threshold;
  if (x < -threshold) return x + threshold;
  return 0.0;
}

/// Result of singular value thresholding: the shrunk matrix together with its
/// singular values, so callers can evaluate the nuclear norm without a second
/// decomposition.
struct SvtResult {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd singular_values;  // after shrinkage (and truncation)

  double nuclear_norm() const { return singular_values.sum(); }
};

/// U * diag(max(sigma - threshold, 0)) * V^T. When max_rank >= 0 only the
/// leading max_rank singular values are kept. For thresholds of at least
/// kGramThreshold * sigma_max the kept directions come from the eigenvectors of
/// the smaller Gram matrix; otherwise from a bidiagonal SVD.
SvtResult svt_full(const Eigen::MatrixXd& matrix, double threshold, Eigen::Index max_rank = -1);

inline Eigen::MatrixXd svt(const Eigen::MatrixXd& matrix, double threshold) {
  return svt_full(matrix, threshold).matrix;
}

double nuclear_norm(const Eigen::MatrixXd& matrix);

/// Rank with the kRankCutoff convention.
Eigen::Index numerical_rank(const Eigen::MatrixXd& matrix);

}  // namespace mcpanel
