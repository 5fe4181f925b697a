#include "mcpanel/panel.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <limits>
#include <random>
#include <string>

using namespace mcpanel;

namespace {

PanelData small(Index N, Index T) {
  PanelData d;
  d.Y = Eigen::MatrixXd::Zero(N, T);
  d.W = Eigen::MatrixXd::Zero(N, T);
  return d;
}

std::string message_of(PanelData d) {
  try {
    validate(std::move(d));
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("panel") {

TEST_CASE("treated and control sets") {
  PanelData d = small(2, 2);
  d.W(0, 1) = 1.0;
  const Panel p = validate(d);
  CHECK(p.n_treated() == 1);
  CHECK(p.n_control() == 3);
  CHECK(p.treated().front() == Cell{0, 1});
  CHECK(p.control_mask()(0, 1) == 0.0);
  CHECK(p.control_mask().sum() == 3.0);
}

TEST_CASE("non-binary treatment names the cell") {
  PanelData d = small(3, 3);
  d.W(1, 2) = 2.0;
  try {
    validate(d);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("non-binary treatment at") != std::string::npos);
    CHECK(e.row() == 1);
    CHECK(e.col() == 2);
  }
}

TEST_CASE("dimension and finiteness errors") {
  PanelData d = small(2, 3);
  d.X = Eigen::MatrixXd::Zero(3, 1);
  CHECK(message_of(d).find("dimension mismatch") != std::string::npos);

  d = small(2, 3);
  d.Z = Eigen::MatrixXd::Zero(1, 4);
  CHECK(message_of(d).find("dimension mismatch") != std::string::npos);

  d = small(2, 3);
  d.W = Eigen::MatrixXd::Zero(3, 2);
  CHECK(message_of(d).find("dimension mismatch") != std::string::npos);

  d = small(2, 3);
  d.V.push_back(Eigen::MatrixXd::Zero(2, 2));
  CHECK(message_of(d).find("dimension mismatch") != std::string::npos);

  d = small(2, 3);
  d.Y(1, 0) = std::numeric_limits<double>::infinity();
  try {
    validate(d);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.row() == 1);
    CHECK(e.col() == 0);
  }

  CHECK_THROWS_AS(validate(small(0, 0)), ValidationError);
}

TEST_CASE("default covariate names") {
  PanelData d = small(2, 3);
  d.X = Eigen::MatrixXd::Ones(2, 2);
  d.Z = Eigen::MatrixXd::Ones(1, 3);
  d.V.push_back(Eigen::MatrixXd::Ones(2, 3));
  const Panel p = validate(d);
  REQUIRE(p.data().x_names.size() == 2);
  REQUIRE(p.data().z_names.size() == 1);
  REQUIRE(p.data().v_names.size() == 1);
  CHECK(p.data().x_names[0] != p.data().x_names[1]);
}

TEST_CASE("predict_y0 examples") {
  const Panel p = validate(small(2, 2));
  ModelParams m = ModelParams::zeros(2, 2, 0, 0, 0);
  CHECK(predict_y0(p, m).isZero(0.0));

  m.gamma << 1.0, 2.0;
  m.delta << 3.0, 4.0;
  Eigen::MatrixXd expected(2, 2);
  expected << 4.0, 5.0, 5.0, 6.0;
  CHECK(predict_y0(p, m) == expected);

  PanelData d = small(1, 1);
  d.X = Eigen::MatrixXd::Constant(1, 1, 2.0);
  d.Z = Eigen::MatrixXd::Constant(1, 1, 3.0);
  const Panel q = validate(d);
  ModelParams h = ModelParams::zeros(1, 1, 1, 1, 0);
  h.H(0, 0) = 0.5;
  CHECK(predict_y0(q, h)(0, 0) == doctest::Approx(3.0));
}

TEST_CASE("predict_y0 elementwise formula and block linearity") {
  std::mt19937_64 rng(11);
  PanelData d = small(4, 5);
  d.X = oracle::gaussian(4, 3, rng);
  d.Z = oracle::gaussian(2, 5, rng);
  for (int j = 0; j < 3; ++j) d.V.push_back(oracle::gaussian(4, 5, rng));
  const Panel p = validate(d);
  ModelParams m = ModelParams::zeros(4, 5, 3, 2, 3);
  m.L = oracle::gaussian(4, 5, rng);
  m.H = oracle::gaussian(3, 2, rng);
  m.beta = oracle::gaussian(3, 1, rng).col(0);
  m.gamma = oracle::gaussian(4, 1, rng).col(0);
  m.delta = oracle::gaussian(5, 1, rng).col(0);
  const Eigen::MatrixXd pred = predict_y0(p, m);
  for (Index i = 0; i < 4; ++i) {
    for (Index t = 0; t < 5; ++t) {
      double v = m.L(i, t) + m.gamma(i) + m.delta(t);
      for (Index a = 0; a < 3; ++a) {
        for (Index b = 0; b < 2; ++b) v += d.X(i, a) * m.H(a, b) * d.Z(b, t);
      }
      for (Index j = 0; j < 3; ++j) v += d.V[j](i, t) * m.beta(j);
      CHECK(pred(i, t) == doctest::Approx(v).epsilon(1e-12));
    }
  }

  ModelParams only_h = ModelParams::zeros(4, 5, 3, 2, 3);
  only_h.H = m.H;
  ModelParams scaled = only_h;
  scaled.H *= 2.5;
  CHECK((predict_y0(p, scaled) - 2.5 * predict_y0(p, only_h)).cwiseAbs().maxCoeff() < 1e-12);

  ModelParams only_b = ModelParams::zeros(4, 5, 3, 2, 3);
  only_b.beta = m.beta;
  ModelParams scaled_b = only_b;
  scaled_b.beta *= -3.0;
  CHECK((predict_y0(p, scaled_b) + 3.0 * predict_y0(p, only_b)).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(predict_y0(p, ModelParams::zeros(4, 5, 2, 2, 3)), ValidationError);
}

TEST_CASE("augment_linear_terms") {
  const Panel p = validate(small(2, 3));
  const Panel a = augment_linear_terms(p);
  CHECK(a.X() == Eigen::MatrixXd::Identity(2, 2));
  CHECK(a.Z() == Eigen::MatrixXd::Identity(3, 3));
  CHECK(a.Y() == p.Y());

  PanelData d = small(2, 3);
  d.X = Eigen::MatrixXd::Constant(2, 1, 7.0);
  const Panel b = augment_linear_terms(validate(d));
  REQUIRE(b.P() == 3);
  CHECK(b.X().col(0) == d.X.col(0));
  CHECK(b.X().rightCols(2) == Eigen::MatrixXd::Identity(2, 2));
  CHECK(b.data().x_identity == std::vector<bool>{false, true, true});

  const Panel twice = augment_linear_terms(augment_linear_terms(validate(d)));
  CHECK(twice.P() == 1 + 2 * 2);
  CHECK(twice.Q() == 2 * 3);
}

TEST_CASE("penalty configuration checks") {
  PenaltyConfig c;
  CHECK_NOTHROW(c.check());
  c.lambda_H = -1.0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = PenaltyConfig{};
  c.max_iterations = 0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = PenaltyConfig{};
  c.rel_tolerance = 0.0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
}

}  // TEST_SUITE
