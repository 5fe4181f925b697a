#include "mcpanel/effects.hpp"

#include "fixtures.hpp"

#include <doctest.h>

using namespace mcpanel;

namespace {

FitResult zero_fit(Index N, Index T, Index P, Index Q, Index J, Mode mode) {
  FitResult f;
  f.params = ModelParams::zeros(N, T, P, Q, J);
  f.mode = mode;
  return f;
}

}  // namespace

TEST_SUITE("effects") {

TEST_CASE("rule-of-thumb rescaling") {
  PanelData d;
  d.Y = Eigen::MatrixXd::Zero(80, 100);
  d.W = Eigen::MatrixXd::Zero(80, 100);
  d.W.rightCols(10).setOnes();
  d.Y.rightCols(10).setConstant(0.9);
  const Panel p = validate(d);
  REQUIRE(p.n_treated() == 800);
  const EffectEstimate e = estimate_atet(p, zero_fit(80, 100, 0, 0, 0, Mode::imposed_null));
  CHECK(e.atet == doctest::Approx(0.9));
  CHECK(e.atet_rot == doctest::Approx(1.0));
  CHECK(e.n_control == 7200);
  const EffectEstimate c = estimate_atet(p, zero_fit(80, 100, 0, 0, 0, Mode::control_only));
  CHECK(c.atet_rot == c.atet);
}

TEST_CASE("a fit that reproduces Y gives zero effect") {
  std::mt19937_64 rng(31);
  PanelData d = fixtures::random_data({6, 5, 2, 2, 2, 0.3}, 32);
  FitResult f = zero_fit(6, 5, 2, 2, 2, Mode::imposed_null);
  f.params.H = oracle::gaussian(2, 2, rng);
  f.params.beta = oracle::gaussian(2, 1, rng).col(0);
  f.params.gamma = oracle::gaussian(6, 1, rng).col(0);
  d.Y = predict_y0(validate(d), f.params);
  const Panel p = validate(d);
  REQUIRE(p.n_treated() > 0);
  CHECK(std::abs(estimate_atet(p, f).atet) < 1e-12);
  CHECK(treated_effects(p, f).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("shifting treated outcomes shifts the estimate") {
  const PanelData d = fixtures::random_data({7, 6, 0, 0, 0, 0.3}, 33);
  const Panel p = validate(d);
  REQUIRE(p.n_treated() > 0);
  PenaltyConfig pen;
  pen.lambda_L = 0.3;
  const FitResult f = fit(p, pen, Mode::control_only);
  PanelData shifted = d;
  shifted.Y += 2.5 * d.W;
  const Panel q = validate(shifted);
  CHECK(estimate_atet(q, f).atet == doctest::Approx(estimate_atet(p, f).atet + 2.5));
  const Eigen::MatrixXd te = treated_effects(p, f);
  for (Index i = 0; i < 7; ++i) {
    for (Index t = 0; t < 6; ++t) {
      if (d.W(i, t) == 0.0) CHECK(te(i, t) == 0.0);
    }
  }
  CHECK(te.sum() / p.n_treated() == doctest::Approx(estimate_atet(p, f).atet));
}

TEST_CASE("errors") {
  PanelData d;
  d.Y = Eigen::MatrixXd::Zero(2, 2);
  d.W = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(estimate_atet(validate(d), zero_fit(2, 2, 0, 0, 0, Mode::imposed_null)),
                  std::invalid_argument);
  d.W.setOnes();
  CHECK_THROWS_AS(estimate_atet(validate(d), zero_fit(2, 2, 0, 0, 0, Mode::imposed_null)),
                  std::invalid_argument);
}

}  // TEST_SUITE
