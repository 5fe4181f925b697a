#pragma once

#include "mcpanel/estimator.hpp"

namespace mcpanel {

struct EffectEstimate {
  double atet = 0.0;
  double atet_rot = 0.0;  // atet * NT / |O| for imposed_null fits, atet otherwise
  Index n_treated = 0;
  Index n_control = 0;
  Mode mode = Mode::imposed_null;
};

EffectEstimate estimate_atet(const Panel& panel, const FitResult& fit);

/// Y - predict_y0 on the treated cells, zero elsewhere.
Eigen::MatrixXd treated_effects(const Panel& panel, const FitResult& fit);

}  // namespace mcpanel
