#include "mcpanel/dgp.hpp"

#include "mcpanel/prox.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mcpanel {

void DgpConfig::check() const {
  if (N <= 0 || T <= 0) throw std::invalid_argument("dgp: N and T must be positive");
  if (rank_L < 0 || rank_L > std::min(N, T)) {
    throw std::invalid_argument("dgp: rank_L must lie in [0, min(N, T)]");
  }
  if (!(w >= 0.0 && w <= 1.0) || !(h_prob >= 0.0 && h_prob <= 1.0) ||
      !(b_prob >= 0.0 && b_prob <= 1.0)) {
    throw std::invalid_argument("dgp: probabilities must lie in [0, 1]");
  }
  if (!(sigma_max >= 0.0 && sigma_max < 1.0)) throw std::invalid_argument("dgp: sigma_max must lie in [0, 1)");
  if (p < 0 || q < 0 || B < 0) throw std::invalid_argument("dgp: covariate counts must be nonnegative");
  if (!(h_size > 0.0) || !(b_size > 0.0) || !(sigma_eps > 0.0) || !(zeta_L > 0.0)) {
    throw std::invalid_argument("dgp: scales must be positive");
  }
  if (!std::isfinite(tau)) throw std::invalid_argument("dgp: tau must be finite");
}

namespace {

Eigen::MatrixXd normal_matrix(Index rows, Index cols, double sd, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Index c = 0; c < cols; ++c) {
    for (Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  }
  return m;
}

// Activity indicators in column-major order: independent Bernoulli draws, or
// exactly round(count * prob) positions drawn without replacement.
std::vector<char> activity(Index count, double prob, bool exact, std::mt19937_64& rng) {
  std::vector<char> on(count, 0);
  if (count == 0) return on;
  if (!exact) {
    std::bernoulli_distribution dist(prob);
    for (Index k = 0; k < count; ++k) on[k] = dist(rng) ? 1 : 0;
    return on;
  }
  const auto m = static_cast<Index>(std::llround(static_cast<double>(count) * prob));
  std::vector<Index> idx(count);
  std::iota(idx.begin(), idx.end(), Index{0});
  for (Index k = 0; k < m; ++k) {
    std::uniform_int_distribution<Index> pick(k, count - 1);
    std::swap(idx[k], idx[pick(rng)]);
    on[idx[k]] = 1;
  }
  return on;
}

// Rows are eta * MVN(0, sigma) draws, eta ~ U(0, 1).
Eigen::MatrixXd scaled_mvn_rows(Index rows, const Eigen::MatrixXd& sigma, std::mt19937_64& rng) {
  const Index dim = sigma.rows();
  if (dim == 0) return Eigen::MatrixXd(rows, 0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
  if (es.info() != Eigen::Success) throw std::runtime_error("dgp: covariance factorization failed");
  const Eigen::MatrixXd root =
      es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::MatrixXd out(rows, dim);
  Eigen::VectorXd z(dim);
  for (Index i = 0; i < rows; ++i) {
    const double eta = unif(rng);
    for (Index k = 0; k < dim; ++k) z(k) = norm(rng);
    out.row(i) = eta * (root * z).transpose();
  }
  return out;
}

}  // namespace

Eigen::MatrixXd random_correlation(Index dim, double sigma_max, std::mt19937_64& rng) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(dim, dim);
  std::uniform_real_distribution<double> unif(0.0, sigma_max);
  for (Index a = 0; a < dim; ++a) {
    for (Index b = a + 1; b < dim; ++b) {
      s(a, b) = sigma_max > 0.0 ? unif(rng) : 0.0;
      s(b, a) = s(a, b);
    }
  }
  if (dim == 0) return s;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  if (es.info() != Eigen::Success) throw std::runtime_error("dgp: covariance eigendecomposition failed");
  if (es.eigenvalues().minCoeff() >= 1e-8) return s;
  const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-8);
  Eigen::MatrixXd r = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  const Eigen::VectorXd d = r.diagonal().cwiseSqrt().cwiseInverse();
  r = d.asDiagonal() * r * d.asDiagonal();
  r = (0.5 * (r + r.transpose())).eval();
  r.diagonal().setOnes();
  return r;
}

SimulatedPanel generate(const DgpConfig& c) {
  c.check();
  std::mt19937_64 rng(c.seed);
  const Index N = c.N, T = c.T;

  // Treatment
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(N, T);
  {
    const auto on = activity(N * T, c.w, c.exact_count_bernoulli, rng);
    for (Index k = 0; k < N * T; ++k) W(k % N, k / N) = on[k];
  }

  // Low-rank component
  ModelParams truth = ModelParams::zeros(N, T, c.p, c.q, c.B);
  if (c.rank_L > 0) {
    const SvdFactors f = thin_svd(normal_matrix(N, T, 1.0, rng));
    std::exponential_distribution<double> expo(c.zeta_L);
    Eigen::VectorXd s(c.rank_L);
    for (Index k = 0; k < c.rank_L; ++k) s(k) = expo(rng);
    truth.L = f.left_vectors.leftCols(c.rank_L) * s.asDiagonal() *
              f.right_vectors.leftCols(c.rank_L).transpose();
  }

  // Covariates
  const Eigen::MatrixXd X = scaled_mvn_rows(N, random_correlation(c.p, c.sigma_max, rng), rng);
  const Eigen::MatrixXd Z =
      scaled_mvn_rows(T, random_correlation(c.q, c.sigma_max, rng), rng).transpose();
  {
    const Eigen::MatrixXd draw = normal_matrix(c.p, c.q, std::sqrt(c.h_size), rng);
    const auto on = activity(c.p * c.q, c.h_prob, c.exact_count_bernoulli, rng);
    for (Index k = 0; k < c.p * c.q; ++k) {
      truth.H(k % c.p, k / c.p) = on[k] ? draw(k % c.p, k / c.p) : 0.0;
    }
  }
  std::vector<Eigen::MatrixXd> V;
  V.reserve(c.B);
  for (Index j = 0; j < c.B; ++j) V.push_back(normal_matrix(N, T, 1.0, rng));
  {
    const Eigen::MatrixXd draw = normal_matrix(c.B, 1, std::sqrt(c.b_size), rng);
    const auto on = activity(c.B, c.b_prob, c.exact_count_bernoulli, rng);
    for (Index j = 0; j < c.B; ++j) truth.beta(j) = on[j] ? draw(j, 0) : 0.0;
  }

  truth.gamma = normal_matrix(N, 1, 1.0, rng).col(0);
  truth.delta = normal_matrix(T, 1, 1.0, rng).col(0);
  Eigen::MatrixXd U = normal_matrix(N, T, c.sigma_eps, rng);

  Eigen::MatrixXd Y = c.tau * W + truth.L + U;
  if (c.p > 0 && c.q > 0) Y.noalias() += X * truth.H * Z;
  for (Index j = 0; j < c.B; ++j) {
    if (truth.beta(j) != 0.0) Y += truth.beta(j) * V[j];
  }
  Y.colwise() += truth.gamma;
  Y.rowwise() += truth.delta.transpose();

  PanelData d;
  d.Y = std::move(Y);
  d.W = std::move(W);
  d.X = X;
  d.Z = Z;
  d.V = std::move(V);
  return {validate(std::move(d)), std::move(truth), c.tau, std::move(U)};
}

}  // namespace mcpanel
