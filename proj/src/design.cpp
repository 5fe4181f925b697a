#include "mcpanel/prox.hpp"
#include "mcpanel/solver.hpp"

#include <cmath>

namespace mcpanel {

namespace {

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

template <typename Derived>
Moments moments(const Eigen::DenseBase<Derived>& v) {
  Moments m;
  const double n = static_cast<double>(v.size());
  if (n == 0) return m;
  m.mean = v.sum() / n;
  if (n > 1) {
    const double ss = (v.derived().array() - m.mean).square().sum();
    m.sd = std::sqrt(ss / (n - 1.0));
  }
  return m;
}

bool is_constant(const Moments& m) { return m.sd <= 1e-12 * std::max(1.0, std::abs(m.mean)); }

}  // namespace

Design Design::build(const Panel& panel, bool standardize) {
  Design d;
  d.N_ = panel.N();
  d.T_ = panel.T();
  d.P_orig_ = panel.P();
  d.Q_orig_ = panel.Q();
  d.J_orig_ = panel.J();
  const auto& data = panel.data();

  // X columns
  std::vector<Moments> xm;
  for (Index a = 0; a < panel.P(); ++a) {
    const Moments m = moments(panel.X().col(a));
    if (standardize && is_constant(m)) {
      d.warnings_.push_back("dropping constant unit covariate '" + data.x_names[a] + "'");
      continue;
    }
    d.x_cols_.push_back(a);
    xm.push_back(standardize ? m : Moments{0.0, 1.0});
  }
  d.X_.resize(d.N_, static_cast<Index>(d.x_cols_.size()));
  d.x_center_.resize(d.X_.cols());
  d.x_scale_.resize(d.X_.cols());
  for (Index k = 0; k < d.X_.cols(); ++k) {
    d.x_center_(k) = xm[k].mean;
    d.x_scale_(k) = xm[k].sd;
    d.X_.col(k) = (panel.X().col(d.x_cols_[k]).array() - xm[k].mean) / xm[k].sd;
  }

  // Z rows
  std::vector<Moments> zm;
  for (Index b = 0; b < panel.Q(); ++b) {
    const Moments m = moments(panel.Z().row(b));
    if (standardize && is_constant(m)) {
      d.warnings_.push_back("dropping constant time covariate '" + data.z_names[b] + "'");
      continue;
    }
    d.z_rows_.push_back(b);
    zm.push_back(standardize ? m : Moments{0.0, 1.0});
  }
  d.Z_.resize(static_cast<Index>(d.z_rows_.size()), d.T_);
  d.z_center_.resize(d.Z_.rows());
  d.z_scale_.resize(d.Z_.rows());
  for (Index k = 0; k < d.Z_.rows(); ++k) {
    d.z_center_(k) = zm[k].mean;
    d.z_scale_(k) = zm[k].sd;
    d.Z_.row(k) = (panel.Z().row(d.z_rows_[k]).array() - zm[k].mean) / zm[k].sd;
  }
  d.Zt_ = d.Z_.transpose();

  // V slices
  std::vector<Moments> vm;
  for (Index j = 0; j < panel.J(); ++j) {
    const Moments m = moments(panel.V()[j].reshaped());
    if (standardize && is_constant(m)) {
      d.warnings_.push_back("dropping constant unit-time covariate '" + data.v_names[j] + "'");
      continue;
    }
    d.v_slices_.push_back(j);
    vm.push_back(standardize ? m : Moments{0.0, 1.0});
  }
  const Index J = static_cast<Index>(d.v_slices_.size());
  d.V_.reserve(J);
  d.v_center_.resize(J);
  d.v_scale_.resize(J);
  for (Index k = 0; k < J; ++k) {
    d.v_center_(k) = vm[k].mean;
    d.v_scale_(k) = vm[k].sd;
    d.V_.push_back((panel.V()[d.v_slices_[k]].array() - vm[k].mean) / vm[k].sd);
  }

  d.h_allowed_ = BoolMatrix::Constant(d.P(), d.Q(), true);
  for (Index a = 0; a < d.P(); ++a) {
    for (Index b = 0; b < d.Q(); ++b) {
      if (data.x_identity[d.x_cols_[a]] && data.z_identity[d.z_rows_[b]]) d.h_allowed_(a, b) = false;
    }
  }
  return d;
}

StdParams Design::zeros() const {
  StdParams p;
  p.L = Eigen::MatrixXd::Zero(N_, T_);
  p.H = Eigen::MatrixXd::Zero(P(), Q());
  p.beta = Eigen::VectorXd::Zero(J());
  p.gamma = Eigen::VectorXd::Zero(N_);
  p.delta = Eigen::VectorXd::Zero(T_);
  return p;
}

Eigen::MatrixXd Design::predict(const StdParams& p) const {
  Eigen::MatrixXd out = p.L;
  if (P() > 0 && Q() > 0) out.noalias() += X_ * p.H * Z_;
  for (Index j = 0; j < J(); ++j) {
    if (p.beta(j) != 0.0) out += p.beta(j) * V_[j];
  }
  out.colwise() += p.gamma;
  out.rowwise() += p.delta.transpose();
  return out;
}

ModelParams Design::to_original(const StdParams& p, bool normalize_effects) const {
  ModelParams o = ModelParams::zeros(N_, T_, P_orig_, Q_orig_, J_orig_);
  o.L = p.L;
  o.gamma = p.gamma;
  o.delta = p.delta;

  // H on the original scale for the kept block
  Eigen::MatrixXd Hk(P(), Q());
  for (Index a = 0; a < P(); ++a) {
    for (Index b = 0; b < Q(); ++b) Hk(a, b) = p.H(a, b) / (x_scale_(a) * z_scale_(b));
  }
  for (Index a = 0; a < P(); ++a) {
    for (Index b = 0; b < Q(); ++b) o.H(x_cols_[a], z_rows_[b]) = Hk(a, b);
  }
  if (P() > 0 && Q() > 0) {
    // X_s H_s Z_s = (X - 1 mx')Hk(Z - mz 1') expands into XHkZ, a unit term,
    // a time term and a constant.
    Eigen::MatrixXd Xk(N_, P());
    for (Index a = 0; a < P(); ++a) Xk.col(a) = X_.col(a) * x_scale_(a) + Eigen::VectorXd::Constant(N_, x_center_(a));
    Eigen::MatrixXd Zk(Q(), T_);
    for (Index b = 0; b < Q(); ++b) Zk.row(b) = Z_.row(b) * z_scale_(b) + Eigen::RowVectorXd::Constant(T_, z_center_(b));
    const Eigen::VectorXd Hmz = Hk * z_center_;
    o.gamma -= Xk * Hmz;
    o.gamma.array() += x_center_.dot(Hmz);
    o.delta -= (x_center_.transpose() * Hk * Zk).transpose();
  }
  double shift = 0.0;
  for (Index j = 0; j < J(); ++j) {
    const double bj = p.beta(j) / v_scale_(j);
    o.beta(v_slices_[j]) = bj;
    shift += bj * v_center_(j);
  }
  o.gamma.array() -= shift;

  if (normalize_effects && T_ > 0) {
    const double c = o.delta(0);
    o.gamma.array() += c;
    o.delta.array() -= c;
  }
  return o;
}

StdParams Design::to_standardized(const ModelParams& o) const {
  StdParams p = zeros();
  p.L = o.L;
  p.gamma = o.gamma;
  p.delta = o.delta;
  Eigen::MatrixXd Hk(P(), Q());
  for (Index a = 0; a < P(); ++a) {
    for (Index b = 0; b < Q(); ++b) {
      Hk(a, b) = o.H(x_cols_[a], z_rows_[b]);
      p.H(a, b) = Hk(a, b) * x_scale_(a) * z_scale_(b);
    }
  }
  if (P() > 0 && Q() > 0) {
    Eigen::MatrixXd Xk(N_, P());
    for (Index a = 0; a < P(); ++a) Xk.col(a) = X_.col(a) * x_scale_(a) + Eigen::VectorXd::Constant(N_, x_center_(a));
    Eigen::MatrixXd Zk(Q(), T_);
    for (Index b = 0; b < Q(); ++b) Zk.row(b) = Z_.row(b) * z_scale_(b) + Eigen::RowVectorXd::Constant(T_, z_center_(b));
    const Eigen::VectorXd Hmz = Hk * z_center_;
    p.gamma += Xk * Hmz;
    p.gamma.array() -= x_center_.dot(Hmz);
    p.delta += (x_center_.transpose() * Hk * Zk).transpose();
  }
  double shift = 0.0;
  for (Index j = 0; j < J(); ++j) {
    const double bj = o.beta(v_slices_[j]);
    p.beta(j) = bj * v_scale_(j);
    shift += bj * v_center_(j);
  }
  p.gamma.array() += shift;
  return p;
}

BoolMatrix Design::h_mask_from(const Eigen::MatrixXd& H) const {
  BoolMatrix m(P(), Q());
  for (Index a = 0; a < P(); ++a) {
    for (Index b = 0; b < Q(); ++b) m(a, b) = std::abs(H(x_cols_[a], z_rows_[b])) > kZeroCutoff;
  }
  return m;
}

BoolVector Design::beta_mask_from(const Eigen::VectorXd& beta) const {
  BoolVector m(J());
  for (Index j = 0; j < J(); ++j) m(j) = std::abs(beta(v_slices_[j])) > kZeroCutoff;
  return m;
}

}  // namespace mcpanel
