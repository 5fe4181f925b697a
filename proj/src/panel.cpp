#include "mcpanel/panel.hpp"

#include <cmath>
#include <sstream>

namespace mcpanel {

namespace {

std::string cell_str(Index i, Index t) {
  std::ostringstream os;
  os << "(" << i << "," << t << ")";
  return os.str();
}

void require_finite(const Eigen::MatrixXd& m, const std::string& name) {
  for (Index c = 0; c < m.cols(); ++c) {
    for (Index r = 0; r < m.rows(); ++r) {
      if (!std::isfinite(m(r, c))) {
        throw ValidationError("non-finite value in " + name + " at " + cell_str(r, c), r, c);
      }
    }
  }
}

void fill_names(std::vector<std::string>& names, Index count, const std::string& prefix,
                const std::string& what) {
  if (names.empty()) {
    names.reserve(count);
    for (Index k = 0; k < count; ++k) names.push_back(prefix + std::to_string(k + 1));
  } else if (static_cast<Index>(names.size()) != count) {
    throw ValidationError(what + " names: expected " + std::to_string(count) + ", got " +
                          std::to_string(names.size()));
  }
}

void fill_flags(std::vector<bool>& flags, Index count, const std::string& what) {
  if (flags.empty()) {
    flags.assign(count, false);
  } else if (static_cast<Index>(flags.size()) != count) {
    throw ValidationError(what + " identity flags do not match covariate count");
  }
}

}  // namespace

Eigen::ArrayXXd Panel::control_mask() const {
  return (data_.W.array() == 0.0).cast<double>();
}

Panel validate(PanelData d) {
  const Index N = d.Y.rows();
  const Index T = d.Y.cols();
  if (N == 0 || T == 0) throw ValidationError("empty outcome matrix");
  if (d.W.rows() != N || d.W.cols() != T) {
    throw ValidationError("dimension mismatch: W is " + std::to_string(d.W.rows()) + "x" +
                          std::to_string(d.W.cols()) + ", Y is " + std::to_string(N) + "x" +
                          std::to_string(T));
  }
  if (d.X.size() == 0) d.X.resize(N, 0);
  if (d.Z.size() == 0) d.Z.resize(0, T);
  if (d.X.rows() != N) {
    throw ValidationError("dimension mismatch: X has " + std::to_string(d.X.rows()) +
                          " rows, panel has N=" + std::to_string(N));
  }
  if (d.Z.cols() != T) {
    throw ValidationError("dimension mismatch: Z has " + std::to_string(d.Z.cols()) +
                          " columns, panel has T=" + std::to_string(T));
  }
  for (std::size_t j = 0; j < d.V.size(); ++j) {
    if (d.V[j].rows() != N || d.V[j].cols() != T) {
      throw ValidationError("dimension mismatch: V slice " + std::to_string(j + 1) + " is " +
                            std::to_string(d.V[j].rows()) + "x" + std::to_string(d.V[j].cols()));
    }
  }

  require_finite(d.Y, "Y");
  for (Index t = 0; t < T; ++t) {
    for (Index i = 0; i < N; ++i) {
      const double w = d.W(i, t);
      if (w != 0.0 && w != 1.0) {
        throw ValidationError("non-binary treatment at " + cell_str(i, t), i, t);
      }
    }
  }
  require_finite(d.X, "X");
  require_finite(d.Z, "Z");
  for (std::size_t j = 0; j < d.V.size(); ++j) require_finite(d.V[j], "V slice " + std::to_string(j + 1));

  fill_names(d.x_names, d.X.cols(), "x", "X");
  fill_names(d.z_names, d.Z.rows(), "z", "Z");
  fill_names(d.v_names, static_cast<Index>(d.V.size()), "v", "V");
  fill_flags(d.x_identity, d.X.cols(), "X");
  fill_flags(d.z_identity, d.Z.rows(), "Z");

  Panel panel(std::move(d));
  const auto& W = panel.data_.W;
  for (Index i = 0; i < N; ++i) {
    for (Index t = 0; t < T; ++t) {
      (W(i, t) == 1.0 ? panel.treated_ : panel.control_).push_back({i, t});
    }
  }
  return panel;
}

ModelParams ModelParams::zeros(Index N, Index T, Index P, Index Q, Index J) {
  ModelParams p;
  p.L = Eigen::MatrixXd::Zero(N, T);
  p.H = Eigen::MatrixXd::Zero(P, Q);
  p.beta = Eigen::VectorXd::Zero(J);
  p.gamma = Eigen::VectorXd::Zero(N);
  p.delta = Eigen::VectorXd::Zero(T);
  return p;
}

bool ModelParams::all_finite() const {
  return L.allFinite() && H.allFinite() && beta.allFinite() && gamma.allFinite() &&
         delta.allFinite();
}

void PenaltyConfig::check() const {
  if (!(lambda_L >= 0.0) || !(lambda_H >= 0.0) || !(lambda_beta >= 0.0)) {
    throw std::invalid_argument("penalties must be nonnegative");
  }
  if (max_iterations <= 0) throw std::invalid_argument("max_iterations must be positive");
  if (!(rel_tolerance > 0.0)) throw std::invalid_argument("rel_tolerance must be positive");
}

Eigen::MatrixXd predict_y0(const Panel& panel, const ModelParams& params) {
  const Index N = panel.N(), T = panel.T();
  if (params.L.rows() != N || params.L.cols() != T || params.H.rows() != panel.P() ||
      params.H.cols() != panel.Q() || params.beta.size() != panel.J() ||
      params.gamma.size() != N || params.delta.size() != T) {
    throw ValidationError("dimension mismatch between panel and model parameters");
  }
  Eigen::MatrixXd out = params.L;
  if (panel.P() > 0 && panel.Q() > 0) out.noalias() += panel.X() * params.H * panel.Z();
  for (Index j = 0; j < panel.J(); ++j) {
    if (params.beta(j) != 0.0) out += params.beta(j) * panel.V()[j];
  }
  out.colwise() += params.gamma;
  out.rowwise() += params.delta.transpose();
  return out;
}

Panel augment_linear_terms(const Panel& panel) {
  PanelData d = panel.data();
  const Index N = panel.N(), T = panel.T(), P = panel.P(), Q = panel.Q();

  Eigen::MatrixXd X(N, P + N);
  X << d.X, Eigen::MatrixXd::Identity(N, N);
  Eigen::MatrixXd Z(Q + T, T);
  Z << d.Z, Eigen::MatrixXd::Identity(T, T);
  d.X = std::move(X);
  d.Z = std::move(Z);
  for (Index i = 0; i < N; ++i) {
    d.x_names.push_back("unit" + std::to_string(i + 1));
    d.x_identity.push_back(true);
  }
  for (Index t = 0; t < T; ++t) {
    d.z_names.push_back("time" + std::to_string(t + 1));
    d.z_identity.push_back(true);
  }
  return validate(std::move(d));
}

}  // namespace mcpanel
