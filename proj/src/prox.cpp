#include "mcpanel/prox.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mcpanel {

SvdError::SvdError(Eigen::Index rows, Eigen::Index cols)
    : std::runtime_error("SVD did not converge for " + std::to_string(rows) + "x" +
                         std::to_string(cols) + " matrix"),
      rows_(rows),
      cols_(cols) {}

Eigen::MatrixXd SvdFactors::reconstruct() const {
  return left_vectors * singular_values.asDiagonal() * right_vectors.transpose();
}

Eigen::Index SvdFactors::rank() const {
  if (singular_values.size() == 0) return 0;
  const double cutoff = kRankCutoff * singular_values(0);
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < singular_values.size(); ++k) {
    if (singular_values(k) > cutoff && singular_values(k) > 0.0) ++r;
  }
  return r;
}

SvdFactors thin_svd(const Eigen::MatrixXd& matrix) {
  SvdFactors out;
  const Eigen::Index r = std::min(matrix.rows(), matrix.cols());
  if (r == 0) {
    out.left_vectors.resize(matrix.rows(), 0);
    out.right_vectors.resize(matrix.cols(), 0);
    return out;
  }
  if (!matrix.allFinite()) throw SvdError(matrix.rows(), matrix.cols());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(matrix, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw SvdError(matrix.rows(), matrix.cols());
  out.left_vectors = svd.matrixU();
  out.singular_values = svd.singularValues();
  out.right_vectors = svd.matrixV();
  return out;
}

namespace {

// With A A^T = U diag(s^2) U^T (A wide; the tall case is transposed), the
// result is U_k diag(1 - threshold / s_k) U_k^T A. Returns false when the
// threshold is too small relative to sigma_max for the squared spectrum to
// resolve the kept singular values.
bool svt_gram(const Eigen::MatrixXd& matrix, double threshold, SvtResult& out) {
  const bool wide = matrix.rows() <= matrix.cols();
  const Eigen::MatrixXd gram = wide ? Eigen::MatrixXd(matrix * matrix.transpose())
                                    : Eigen::MatrixXd(matrix.transpose() * matrix);
  out.singular_values = Eigen::VectorXd::Zero(gram.rows());
  if (std::sqrt(gram.cwiseAbs().rowwise().sum().maxCoeff()) <= threshold) {
    out.matrix = Eigen::MatrixXd::Zero(matrix.rows(), matrix.cols());
    return true;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  if (eig.info() != Eigen::Success) throw SvdError(matrix.rows(), matrix.cols());
  const Eigen::Index m = gram.rows();
  const Eigen::VectorXd& ev = eig.eigenvalues();  // ascending
  const double smax = std::sqrt(std::max(0.0, ev(m - 1)));
  if (smax <= threshold) {
    out.matrix = Eigen::MatrixXd::Zero(matrix.rows(), matrix.cols());
    return true;
  }
  if (threshold < kGramThreshold * smax) return false;
  Eigen::Index keep = 0;
  Eigen::VectorXd shrink(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double s = std::sqrt(std::max(0.0, ev(m - 1 - k)));
    if (s <= threshold) break;
    out.singular_values(k) = s - threshold;
    shrink(k) = 1.0 - threshold / s;
    keep = k + 1;
  }
  const Eigen::MatrixXd U = eig.eigenvectors().rightCols(keep).rowwise().reverse();
  const Eigen::MatrixXd P = U * shrink.head(keep).asDiagonal() * U.transpose();
  out.matrix = wide ? Eigen::MatrixXd(P * matrix) : Eigen::MatrixXd(matrix * P);
  return true;
}

}  // namespace

SvtResult svt_full(const Eigen::MatrixXd& matrix, double threshold, Eigen::Index max_rank) {
  if (!(threshold >= 0.0)) throw std::invalid_argument("svt: threshold must be nonnegative");
  SvtResult out;
  if (threshold > 0.0 && max_rank < 0 && matrix.size() > 0) {
    if (!matrix.allFinite()) throw SvdError(matrix.rows(), matrix.cols());
    if (svt_gram(matrix, threshold, out)) return out;
  }
  const SvdFactors f = thin_svd(matrix);
  const Eigen::Index r = f.singular_values.size();
  Eigen::Index keep = 0;
  out.singular_values = Eigen::VectorXd::Zero(r);
  for (Eigen::Index k = 0; k < r; ++k) {
    if (max_rank >= 0 && k >= max_rank) break;
    const double s = f.singular_values(k) - threshold;
    if (s <= 0.0) break;
    out.singular_values(k) = s;
    keep = k + 1;
  }
  if (keep == 0) {
    out.matrix = Eigen::MatrixXd::Zero(matrix.rows(), matrix.cols());
    return out;
  }
  out.matrix = f.left_vectors.leftCols(keep) * out.singular_values.head(keep).asDiagonal() *
               f.right_vectors.leftCols(keep).transpose();
  return out;
}

double nuclear_norm(const Eigen::MatrixXd& matrix) {
  if (matrix.size() == 0) return 0.0;
  return thin_svd(matrix).singular_values.sum();
}

Eigen::Index numerical_rank(const Eigen::MatrixXd& matrix) {
  if (matrix.size() == 0) return 0;
  return thin_svd(matrix).rank();
}

}  // namespace mcpanel
