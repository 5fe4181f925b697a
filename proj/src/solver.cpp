#include "mcpanel/solver.hpp"

#include "mcpanel/prox.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mcpanel {

MaskGeometry MaskGeometry::build(const Design& design, Eigen::ArrayXXd mask) {
  if (mask.rows() != design.N() || mask.cols() != design.T()) {
    throw std::invalid_argument("mask dimensions do not match the design");
  }
  MaskGeometry g;
  g.n = mask.sum();
  g.full = g.n == static_cast<double>(mask.size());
  g.row_count = mask.rowwise().sum().matrix();
  g.col_count = mask.colwise().sum().transpose().matrix();
  const Eigen::MatrixXd Xsq = design.X().array().square().matrix();
  g.x_sq_mask = Xsq.transpose() * mask.matrix();
  g.h_norm = g.x_sq_mask * design.Zt().array().square().matrix();
  g.beta_norm.resize(design.J());
  for (Index j = 0; j < design.J(); ++j) {
    g.beta_norm(j) = (design.V()[j].array().square() * mask).sum();
  }
  g.mask = std::move(mask);
  return g;
}

namespace {

void check_inputs(const Design& design, const MaskGeometry& g, const Eigen::MatrixXd& Y) {
  if (Y.rows() != design.N() || Y.cols() != design.T()) {
    throw std::invalid_argument("outcome dimensions do not match the design");
  }
  if (g.mask.rows() != design.N() || g.mask.cols() != design.T()) {
    throw std::invalid_argument("mask dimensions do not match the design");
  }
  if (!(g.n > 0.0)) throw std::invalid_argument("no observed cells enter the loss");
}

// Exact minimization over gamma and delta by alternating closed-form means,
// then delta(0) is moved into gamma.
void effects_step(const MaskGeometry& g, Eigen::MatrixXd& R, Eigen::VectorXd& gamma,
                  Eigen::VectorXd& delta, bool unit, bool time) {
  if (!unit && !time) return;
  const double scale = std::max(1.0, R.cwiseAbs().maxCoeff());
  for (int pass = 0; pass < 100; ++pass) {
    double moved = 0.0;
    if (unit) {
      Eigen::VectorXd c = R.rowwise().sum();
      for (Index i = 0; i < c.size(); ++i) c(i) = g.row_count(i) > 0 ? c(i) / g.row_count(i) : 0.0;
      gamma += c;
      moved = std::max(moved, c.cwiseAbs().maxCoeff());
      if (g.full) {
        R.colwise() -= c;
      } else {
        R.array() -= g.mask.colwise() * c.array();
      }
    }
    if (time) {
      Eigen::VectorXd c = R.colwise().sum().transpose();
      for (Index t = 0; t < c.size(); ++t) c(t) = g.col_count(t) > 0 ? c(t) / g.col_count(t) : 0.0;
      delta += c;
      moved = std::max(moved, c.cwiseAbs().maxCoeff());
      if (g.full) {
        R.rowwise() -= c.transpose();
      } else {
        R.array() -= g.mask.rowwise() * c.transpose().array();
      }
    }
    if (!(unit && time) || moved <= 1e-13 * scale) break;
  }
  if (unit && time && delta.size() > 0) {
    const double c = delta(0);
    gamma.array() += c;
    delta.array() -= c;
  }
}

bool h_free(const Design& design, const SolverSettings& s, Index a, Index b) {
  if (!design.h_allowed()(a, b)) return false;
  return s.h_support == nullptr || (*s.h_support)(a, b);
}

bool beta_free(const SolverSettings& s, Index j) {
  return s.beta_support == nullptr || (*s.beta_support)(j);
}

void h_step(const Design& design, const MaskGeometry& g, const SolverSettings& s,
            Eigen::MatrixXd& R, Eigen::MatrixXd& H, bool active_only) {
  const Index P = design.P(), Q = design.Q();
  if (P == 0 || Q == 0) return;
  const double thr = s.lambda_H * g.n / 2.0;
  const Eigen::MatrixXd& X = design.X();
  const Eigen::MatrixXd& Zt = design.Zt();
  Eigen::VectorXd r(design.T());
  Eigen::VectorXd dh(Q);
  for (Index a = 0; a < P; ++a) {
    if (active_only && (H.row(a).array() == 0.0).all()) continue;
    r.noalias() = R.transpose() * X.col(a);
    dh.setZero();
    bool changed = false;
    for (Index b = 0; b < Q; ++b) {
      if (!h_free(design, s, a, b) || (active_only && H(a, b) == 0.0)) continue;
      const double norm = g.h_norm(a, b);
      if (!(norm > 0.0)) continue;
      const double old = H(a, b);
      const double grad = r.dot(Zt.col(b)) + norm * old;
      const double next = soft_threshold(grad, thr) / norm;
      const double d = next - old;
      if (d == 0.0) continue;
      H(a, b) = next;
      dh(b) += d;
      r.array() -= d * g.x_sq_mask.row(a).transpose().array() * Zt.col(b).array();
      changed = true;
    }
    if (!changed) continue;
    const Eigen::VectorXd w = Zt * dh;
    if (g.full) {
      R.noalias() -= X.col(a) * w.transpose();
    } else {
      R.array() -= g.mask * (X.col(a) * w.transpose()).array();
    }
  }
}

void beta_step(const Design& design, const MaskGeometry& g, const SolverSettings& s,
               Eigen::MatrixXd& R, Eigen::VectorXd& beta, bool active_only) {
  const double thr = s.lambda_beta * g.n / 2.0;
  for (Index j = 0; j < design.J(); ++j) {
    if (!beta_free(s, j) || (active_only && beta(j) == 0.0)) continue;
    const double norm = g.beta_norm(j);
    if (!(norm > 0.0)) continue;
    const Eigen::MatrixXd& Vj = design.V()[j];
    const double old = beta(j);
    const double grad = (Vj.array() * R.array()).sum() + norm * old;
    const double next = soft_threshold(grad, thr) / norm;
    const double d = next - old;
    if (d == 0.0) continue;
    beta(j) = next;
    if (g.full) {
      R -= d * Vj;
    } else {
      R.array() -= d * Vj.array() * g.mask;
    }
  }
}

// One proximal-gradient step on L with step n/2; exact when every cell is
// observed. Returns the nuclear norm of the new L.
double l_step(const MaskGeometry& g, const SolverSettings& s, Eigen::MatrixXd& R,
              Eigen::MatrixXd& L) {
  const double thr = s.lambda_L * g.n / 2.0;
  Eigen::MatrixXd target = L + R;
  if (s.rank_cap == 0 || (thr > 0.0 && target.norm() <= thr)) {
    L.setZero();
    R = g.full ? target : (target.array() * g.mask).matrix();
    return 0.0;
  }
  if (thr == 0.0 && s.rank_cap < 0) {
    L = std::move(target);
    R.setZero();
    return -1.0;
  }
  SvtResult res = svt_full(target, thr, s.rank_cap);
  L = std::move(res.matrix);
  if (g.full) {
    R = target - L;
  } else {
    R = ((target - L).array() * g.mask).matrix();
  }
  return res.singular_values.sum();
}

double penalty(const SolverSettings& s, const StdParams& p, double nuc) {
  double out = 0.0;
  if (s.lambda_L > 0.0) out += s.lambda_L * nuc;
  if (s.lambda_H > 0.0) out += s.lambda_H * p.H.cwiseAbs().sum();
  if (s.lambda_beta > 0.0) out += s.lambda_beta * p.beta.cwiseAbs().sum();
  return out;
}

StdParams start_point(const Design& design, const SolverSettings& s, const StdParams* warm) {
  StdParams p = design.zeros();
  if (warm != nullptr) {
    if (warm->L.rows() != p.L.rows() || warm->L.cols() != p.L.cols() ||
        warm->H.rows() != p.H.rows() || warm->H.cols() != p.H.cols() ||
        warm->beta.size() != p.beta.size() || warm->gamma.size() != p.gamma.size() ||
        warm->delta.size() != p.delta.size()) {
      throw std::invalid_argument("warm start dimensions do not match the design");
    }
    p = *warm;
  }
  for (Index a = 0; a < design.P(); ++a) {
    for (Index b = 0; b < design.Q(); ++b) {
      if (!h_free(design, s, a, b)) p.H(a, b) = 0.0;
    }
  }
  for (Index j = 0; j < design.J(); ++j) {
    if (!beta_free(s, j)) p.beta(j) = 0.0;
  }
  if (!s.unit_effects) p.gamma.setZero();
  if (!s.time_effects) p.delta.setZero();
  if (s.rank_cap >= 0 && p.L.size() > 0) p.L = svt_full(p.L, 0.0, s.rank_cap).matrix;
  return p;
}

}  // namespace

SolveResult solve(const Design& design, const MaskGeometry& geometry, const Eigen::MatrixXd& Y,
                  const SolverSettings& settings, const StdParams* warm_start) {
  check_inputs(design, geometry, Y);
  if (!(settings.lambda_L >= 0.0) || !(settings.lambda_H >= 0.0) ||
      !(settings.lambda_beta >= 0.0)) {
    throw std::invalid_argument("penalties must be nonnegative");
  }
  if (settings.max_iterations <= 0) throw std::invalid_argument("max_iterations must be positive");
  if (!(settings.rel_tolerance > 0.0)) throw std::invalid_argument("rel_tolerance must be positive");

  SolveResult out;
  StdParams& p = out.params;
  p = start_point(design, settings, warm_start);
  Eigen::MatrixXd& R = out.residual;
  R = Y - design.predict(p);
  if (!geometry.full) R.array() *= geometry.mask;

  const double n = geometry.n;
  double nuc = (settings.lambda_L > 0.0 && !p.L.isZero(0.0)) ? nuclear_norm(p.L) : 0.0;
  double prev = R.squaredNorm() / n + penalty(settings, p, nuc);
  out.objective_trace.push_back(prev);
  if (prev == 0.0) {
    out.converged = true;
  }

  // Sweeps over all coefficients alternate with cheaper sweeps over the
  // current nonzero ones; convergence is only declared after a full sweep.
  bool full_sweep = true;
  int since_full = 0;
  for (int it = 1; it <= settings.max_iterations && !out.converged; ++it) {
    const bool active_only = !full_sweep;
    effects_step(geometry, R, p.gamma, p.delta, settings.unit_effects, settings.time_effects);
    h_step(design, geometry, settings, R, p.H, active_only);
    beta_step(design, geometry, settings, R, p.beta, active_only);
    nuc = l_step(geometry, settings, R, p.L);
    const double obj = R.squaredNorm() / n + penalty(settings, p, nuc);
    out.objective_trace.push_back(obj);
    out.n_iterations = it;
    if (!std::isfinite(obj)) break;
    const bool small = obj == 0.0 || (prev - obj) / prev < settings.rel_tolerance;
    prev = obj;
    if (small && full_sweep) {
      out.converged = true;
    } else {
      since_full = full_sweep ? 0 : since_full + 1;
      full_sweep = small || since_full >= 9;
    }
  }

  out.loss = R.squaredNorm() / n;
  if (!p.L.isZero(0.0)) {
    const Eigen::VectorXd sv = thin_svd(p.L).singular_values;
    out.nuclear_norm = sv.sum();
    for (Index k = 0; k < sv.size(); ++k) {
      if (sv(k) > kZeroCutoff && sv(k) > kRankCutoff * sv(0)) ++out.rank_L;
    }
  }
  return out;
}

LambdaBounds lambda_bounds(const Design& design, const MaskGeometry& geometry,
                           const Eigen::MatrixXd& Y, bool unit_effects, bool time_effects) {
  check_inputs(design, geometry, Y);
  Eigen::MatrixXd R = Y;
  if (!geometry.full) R.array() *= geometry.mask;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(design.N());
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(design.T());
  effects_step(geometry, R, gamma, delta, unit_effects, time_effects);

  const double n = geometry.n;
  LambdaBounds b;
  if (R.size() > 0) b.lambda_L = 2.0 / n * thin_svd(R).singular_values(0);
  if (design.P() > 0 && design.Q() > 0) {
    const Eigen::MatrixXd G = design.X().transpose() * R * design.Zt();
    for (Index a = 0; a < G.rows(); ++a) {
      for (Index c = 0; c < G.cols(); ++c) {
        if (design.h_allowed()(a, c)) b.lambda_H = std::max(b.lambda_H, 2.0 / n * std::abs(G(a, c)));
      }
    }
  }
  for (Index j = 0; j < design.J(); ++j) {
    const double v = (design.V()[j].array() * R.array()).sum();
    b.lambda_beta = std::max(b.lambda_beta, 2.0 / n * std::abs(v));
  }
  return b;
}

double OptimalityReport::worst() const {
  return std::max({h_violation, beta_violation, svt_gap, effects_gap});
}

namespace {

double subgradient_violation(double grad, double coef, double lambda) {
  if (coef != 0.0) return std::abs(grad + lambda * (coef > 0.0 ? 1.0 : -1.0));
  return std::max(0.0, std::abs(grad) - lambda);
}

}  // namespace

OptimalityReport optimality(const Design& design, const MaskGeometry& geometry,
                            const StdParams& params, const Eigen::MatrixXd& residual,
                            const SolverSettings& settings) {
  OptimalityReport rep;
  const double n = geometry.n;
  if (design.P() > 0 && design.Q() > 0) {
    const Eigen::MatrixXd G = -2.0 / n * (design.X().transpose() * residual * design.Zt());
    for (Index a = 0; a < G.rows(); ++a) {
      for (Index b = 0; b < G.cols(); ++b) {
        if (!h_free(design, settings, a, b)) continue;
        rep.h_violation = std::max(
            rep.h_violation, subgradient_violation(G(a, b), params.H(a, b), settings.lambda_H));
      }
    }
  }
  for (Index j = 0; j < design.J(); ++j) {
    if (!beta_free(settings, j)) continue;
    const double g = -2.0 / n * (design.V()[j].array() * residual.array()).sum();
    rep.beta_violation =
        std::max(rep.beta_violation, subgradient_violation(g, params.beta(j), settings.lambda_beta));
  }
  const Eigen::MatrixXd target = params.L + residual;
  const Eigen::MatrixXd prox = svt_full(target, settings.lambda_L * n / 2.0, settings.rank_cap).matrix;
  rep.svt_gap = (params.L - prox).cwiseAbs().maxCoeff();
  if (settings.unit_effects) {
    rep.effects_gap = std::max(rep.effects_gap, 2.0 / n * residual.rowwise().sum().cwiseAbs().maxCoeff());
  }
  if (settings.time_effects) {
    rep.effects_gap = std::max(rep.effects_gap, 2.0 / n * residual.colwise().sum().cwiseAbs().maxCoeff());
  }
  return rep;
}

}  // namespace mcpanel
