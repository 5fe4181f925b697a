#include "mcpanel/estimator.hpp"

#include "mcpanel/prox.hpp"
#include "mcpanel/solver.hpp"

#include <cmath>
#include <stdexcept>

namespace mcpanel {

std::string to_string(Mode mode) {
  return mode == Mode::imposed_null ? "imposed_null" : "control_only";
}

Mode parse_mode(const std::string& text) {
  if (text == "imposed_null" || text == "imposed-null") return Mode::imposed_null;
  if (text == "control_only" || text == "control-only") return Mode::control_only;
  throw std::invalid_argument("unknown mode '" + text + "'");
}

Eigen::ArrayXXd loss_mask(const Panel& panel, Mode mode) {
  if (mode == Mode::imposed_null) return Eigen::ArrayXXd::Ones(panel.N(), panel.T());
  if (panel.n_control() == 0) throw std::invalid_argument("control_only fit requires control cells");
  return panel.control_mask();
}

namespace {

Index reported_rank(const Eigen::MatrixXd& L) {
  if (L.size() == 0 || L.cwiseAbs().maxCoeff() <= kZeroCutoff) return 0;
  const Eigen::VectorXd s = thin_svd(L).singular_values;
  Index r = 0;
  for (Index k = 0; k < s.size(); ++k) {
    if (s(k) > kZeroCutoff && s(k) > kRankCutoff * s(0)) ++r;
  }
  return r;
}

FitResult package(const Design& design, const SolveResult& res, Mode mode,
                  const PenaltyConfig& penalties, const FitOptions& options) {
  FitResult out;
  out.params = design.to_original(res.params, options.unit_effects && options.time_effects);
  out.objective_trace = res.objective_trace;
  out.converged = res.converged;
  out.n_iterations = res.n_iterations;
  for (Index a = 0; a < out.params.H.rows(); ++a) {
    for (Index b = 0; b < out.params.H.cols(); ++b) {
      if (std::abs(out.params.H(a, b)) > kZeroCutoff) out.support_H.emplace_back(a, b);
    }
  }
  for (Index j = 0; j < out.params.beta.size(); ++j) {
    if (std::abs(out.params.beta(j)) > kZeroCutoff) out.support_beta.push_back(j);
  }
  out.rank_L = reported_rank(out.params.L);
  out.mode = mode;
  out.penalties = penalties;
  out.options = options;
  out.loss = res.loss;
  out.objective = res.objective_trace.back();
  out.warnings = design.warnings();
  return out;
}

SolverSettings settings_from(const PenaltyConfig& p, const FitOptions& o) {
  SolverSettings s;
  s.lambda_L = p.lambda_L;
  s.lambda_H = p.lambda_H;
  s.lambda_beta = p.lambda_beta;
  s.max_iterations = p.max_iterations;
  s.rel_tolerance = p.rel_tolerance;
  s.unit_effects = o.unit_effects;
  s.time_effects = o.time_effects;
  return s;
}

struct Restriction {
  BoolMatrix h;
  BoolVector beta;
};

Restriction restriction_of(const Design& design, const Panel& panel, const FitResult& f) {
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(panel.P(), panel.Q());
  for (const auto& [a, b] : f.allowed_H) H(a, b) = 1.0;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(panel.J());
  for (Index j : f.allowed_beta) beta(j) = 1.0;
  return {design.h_mask_from(H), design.beta_mask_from(beta)};
}

}  // namespace

FitResult fit(const Panel& panel, const PenaltyConfig& penalties, Mode mode,
              const FitOptions& options) {
  penalties.check();
  const Design design = Design::build(panel, options.standardize);
  const MaskGeometry geometry = MaskGeometry::build(design, loss_mask(panel, mode));
  const SolveResult res = solve(design, geometry, panel.Y(), settings_from(penalties, options));
  return package(design, res, mode, penalties, options);
}

FitResult fit_post(const Panel& panel, const FitResult& first_stage, Mode mode) {
  if (first_stage.mode != mode) throw std::invalid_argument("first stage was fitted in a different mode");
  const ModelParams& fp = first_stage.params;
  if (fp.L.rows() != panel.N() || fp.L.cols() != panel.T() || fp.H.rows() != panel.P() ||
      fp.H.cols() != panel.Q() || fp.beta.size() != panel.J()) {
    throw ValidationError("first stage does not match the panel dimensions");
  }
  const FitOptions& options = first_stage.options;
  const Design design = Design::build(panel, options.standardize);
  const MaskGeometry geometry = MaskGeometry::build(design, loss_mask(panel, mode));

  PenaltyConfig penalties = first_stage.penalties;
  penalties.lambda_L = penalties.lambda_H = penalties.lambda_beta = 0.0;
  SolverSettings s = settings_from(penalties, options);
  const BoolMatrix h_support = design.h_mask_from(fp.H);
  const BoolVector beta_support = design.beta_mask_from(fp.beta);
  s.h_support = &h_support;
  s.beta_support = &beta_support;
  s.rank_cap = first_stage.rank_L;

  const StdParams warm = design.to_standardized(fp);
  const SolveResult res = solve(design, geometry, panel.Y(), s, &warm);
  FitResult out = package(design, res, mode, penalties, options);
  out.post = true;
  out.rank_cap = first_stage.rank_L;
  out.allowed_H = first_stage.support_H;
  out.allowed_beta = first_stage.support_beta;
  return out;
}

LambdaMax lambda_max(const Panel& panel, Mode mode, const FitOptions& options) {
  const Design design = Design::build(panel, options.standardize);
  const MaskGeometry geometry = MaskGeometry::build(design, loss_mask(panel, mode));
  const LambdaBounds b =
      lambda_bounds(design, geometry, panel.Y(), options.unit_effects, options.time_effects);
  return {b.lambda_L, b.lambda_H, b.lambda_beta};
}

double lambda_max_L(const Panel& panel, Mode mode, const FitOptions& options) {
  return lambda_max(panel, mode, options).lambda_L;
}

double lambda_max_H(const Panel& panel, Mode mode, const FitOptions& options) {
  return lambda_max(panel, mode, options).lambda_H;
}

double lambda_max_beta(const Panel& panel, Mode mode, const FitOptions& options) {
  return lambda_max(panel, mode, options).lambda_beta;
}

double kkt_violation(const Panel& panel, const FitResult& f) {
  const Design design = Design::build(panel, f.options.standardize);
  const MaskGeometry geometry = MaskGeometry::build(design, loss_mask(panel, f.mode));
  const StdParams p = design.to_standardized(f.params);
  Eigen::MatrixXd residual = panel.Y() - design.predict(p);
  residual.array() *= geometry.mask;
  SolverSettings s = settings_from(f.penalties, f.options);
  Restriction r;
  if (f.post) {
    r = restriction_of(design, panel, f);
    s.h_support = &r.h;
    s.beta_support = &r.beta;
    s.rank_cap = f.rank_cap;
  }
  return optimality(design, geometry, p, residual, s).worst();
}

}  // namespace mcpanel
