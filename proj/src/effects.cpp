#include "mcpanel/effects.hpp"

#include <stdexcept>

namespace mcpanel {

Eigen::MatrixXd treated_effects(const Panel& panel, const FitResult& fit) {
  const Eigen::MatrixXd diff = panel.Y() - predict_y0(panel, fit.params);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(panel.N(), panel.T());
  for (const Cell& c : panel.treated()) out(c.i, c.t) = diff(c.i, c.t);
  return out;
}

EffectEstimate estimate_atet(const Panel& panel, const FitResult& fit) {
  if (panel.n_treated() == 0) throw std::invalid_argument("ATET needs at least one treated cell");
  if (panel.n_control() == 0) throw std::invalid_argument("ATET correction needs at least one control cell");
  const Eigen::MatrixXd diff = panel.Y() - predict_y0(panel, fit.params);
  double sum = 0.0;
  for (const Cell& c : panel.treated()) sum += diff(c.i, c.t);
  EffectEstimate e;
  e.n_treated = panel.n_treated();
  e.n_control = panel.n_control();
  e.mode = fit.mode;
  e.atet = sum / static_cast<double>(e.n_treated);
  e.atet_rot = fit.mode == Mode::imposed_null
                   ? e.atet * static_cast<double>(panel.N() * panel.T()) / static_cast<double>(e.n_control)
                   : e.atet;
  return e;
}

}  // namespace mcpanel
