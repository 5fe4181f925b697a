#include "mcpanel/estimator.hpp"
#include "mcpanel/prox.hpp"
#include "mcpanel/solver.hpp"

#include "fixtures.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace mcpanel;

namespace {

PenaltyConfig tight(double lL, double lH, double lb) {
  PenaltyConfig p;
  p.lambda_L = lL;
  p.lambda_H = lH;
  p.lambda_beta = lb;
  p.max_iterations = 20000;
  p.rel_tolerance = 1e-13;
  return p;
}

double max_sv(const Eigen::MatrixXd& m) { return thin_svd(m).singular_values(0); }

}  // namespace

TEST_SUITE("estimator") {

TEST_CASE("mode names") {
  CHECK(parse_mode("imposed-null") == Mode::imposed_null);
  CHECK(parse_mode("control_only") == Mode::control_only);
  CHECK(to_string(Mode::control_only) == "control_only");
  CHECK_THROWS_AS(parse_mode("both"), std::invalid_argument);
}

TEST_CASE("large nuclear penalty reduces to two-way fixed effects") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const Panel p = fixtures::random_panel({9, 7, 0, 0, 0, 0.2}, seed);
    for (Mode mode : {Mode::imposed_null, Mode::control_only}) {
      const Eigen::ArrayXXd mask = loss_mask(p, mode);
      const double n = mask.sum();
      const FitResult f = fit(p, tight(10.0 * 2.0 / n * max_sv(p.Y()), 0, 0), mode);
      CHECK(f.converged);
      CHECK(f.rank_L == 0);
      const oracle::TwoWay o = oracle::two_way_least_squares(p.Y(), mask);
      CHECK((f.params.gamma - o.gamma).cwiseAbs().maxCoeff() < 1e-6);
      CHECK((f.params.delta - o.delta).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("without covariates or effects the imposed-null fit is one svt") {
  const Panel p = fixtures::random_panel({7, 9}, 3);
  const double n = 63.0;
  for (double lambda : {0.01, 0.05, 0.2}) {
    const FitResult f = fit(p, tight(lambda, 0, 0), Mode::imposed_null, {false, false, true});
    CHECK(f.converged);
    CHECK((f.params.L - oracle::svt_eig(p.Y(), lambda * n / 2.0)).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("objective trace is nonincreasing") {
  const Panel p = fixtures::random_panel({12, 10, 4, 3, 5, 0.15}, 4);
  for (Mode mode : {Mode::imposed_null, Mode::control_only}) {
    const LambdaMax lm = lambda_max(p, mode);
    const FitResult f = fit(p, tight(0.2 * lm.lambda_L, 0.1 * lm.lambda_H, 0.1 * lm.lambda_beta), mode);
    for (std::size_t k = 1; k < f.objective_trace.size(); ++k) {
      CHECK(f.objective_trace[k] <= f.objective_trace[k - 1] + 1e-10);
    }
    CHECK(f.objective == f.objective_trace.back());
  }
}

TEST_CASE("converged fits satisfy the optimality conditions") {
  for (std::uint64_t seed = 10; seed < 14; ++seed) {
    const Panel p = fixtures::random_panel({12, 10, 4, 3, 6, 0.15}, seed);
    for (Mode mode : {Mode::imposed_null, Mode::control_only}) {
      const LambdaMax lm = lambda_max(p, mode);
      const FitResult f = fit(p, tight(0.3 * lm.lambda_L, 0.2 * lm.lambda_H, 0.2 * lm.lambda_beta), mode);
      REQUIRE(f.converged);
      CHECK(kkt_violation(p, f) <= 1e-6);
    }
  }
}

TEST_CASE("support sizes count entries above the zero cutoff") {
  const Panel p = fixtures::random_panel({12, 10, 4, 3, 6, 0.1}, 21);
  const LambdaMax lm = lambda_max(p, Mode::imposed_null);
  const FitResult f = fit(p, tight(0.5 * lm.lambda_L, 0.3 * lm.lambda_H, 0.3 * lm.lambda_beta), Mode::imposed_null);
  CHECK(static_cast<Index>(f.support_H.size()) == (f.params.H.array().abs() > kZeroCutoff).count());
  CHECK(static_cast<Index>(f.support_beta.size()) == (f.params.beta.array().abs() > kZeroCutoff).count());
  CHECK(f.rank_L == numerical_rank(f.params.L));
}

TEST_CASE("lambda_max examples") {
  fixtures::Shape s{8, 6, 2, 2, 3, 0.2};
  PanelData d = fixtures::random_data(s, 5);
  d.Y.setZero();
  const LambdaMax zero = lambda_max(validate(d), Mode::control_only);
  CHECK(zero.lambda_L == 0.0);
  CHECK(zero.lambda_H == 0.0);
  CHECK(zero.lambda_beta == 0.0);

  const Panel p = fixtures::random_panel(s, 6);
  PanelData scaled = p.data();
  scaled.Y *= 3.5;
  for (Mode mode : {Mode::imposed_null, Mode::control_only}) {
    const LambdaMax a = lambda_max(p, mode);
    const LambdaMax b = lambda_max(validate(scaled), mode);
    CHECK(b.lambda_L == doctest::Approx(3.5 * a.lambda_L).epsilon(1e-12));
    CHECK(b.lambda_H == doctest::Approx(3.5 * a.lambda_H).epsilon(1e-12));
    CHECK(b.lambda_beta == doctest::Approx(3.5 * a.lambda_beta).epsilon(1e-12));
    CHECK(lambda_max_L(p, mode) == a.lambda_L);
    CHECK(lambda_max_H(p, mode) == a.lambda_H);
    CHECK(lambda_max_beta(p, mode) == a.lambda_beta);
  }
}

TEST_CASE("a covariate orthogonal to the residual has lambda_max_H zero") {
  std::mt19937_64 rng(8);
  PanelData d = fixtures::random_data({8, 6}, 9);
  Eigen::VectorXd x = oracle::gaussian(8, 1, rng).col(0);
  Eigen::VectorXd z = oracle::gaussian(6, 1, rng).col(0);
  x.array() -= x.mean();
  z.array() -= z.mean();
  Eigen::MatrixXd R = d.Y;
  R.colwise() -= R.rowwise().mean();
  R.rowwise() -= R.colwise().mean();
  const double g = x.dot(R * z);
  d.Y -= g / (x.squaredNorm() * z.squaredNorm()) * x * z.transpose();
  d.X = x;
  d.Z = z.transpose();
  CHECK(lambda_max_H(validate(d), Mode::imposed_null) < 1e-12);
}

TEST_CASE("fitting at lambda_max zeroes every regularized block") {
  for (std::uint64_t seed = 30; seed < 34; ++seed) {
    const Panel p = fixtures::random_panel({10, 8, 3, 3, 4, 0.2}, seed);
    for (Mode mode : {Mode::imposed_null, Mode::control_only}) {
      const LambdaMax lm = lambda_max(p, mode);
      const FitResult f = fit(p, tight(lm.lambda_L, lm.lambda_H, lm.lambda_beta), mode);
      CHECK(f.rank_L == 0);
      CHECK(f.support_H.empty());
      CHECK(f.support_beta.empty());
      const FitResult below = fit(p, tight(lm.lambda_L, 0.9 * lm.lambda_H, lm.lambda_beta), mode);
      CHECK(!below.support_H.empty());
    }
  }
}

TEST_CASE("without treated cells both modes give the same fit") {
  const Panel p = fixtures::random_panel({10, 8, 3, 2, 3, 0.0}, 40);
  const LambdaMax lm = lambda_max(p, Mode::imposed_null);
  const PenaltyConfig pen = tight(0.3 * lm.lambda_L, 0.3 * lm.lambda_H, 0.3 * lm.lambda_beta);
  const FitResult a = fit(p, pen, Mode::imposed_null);
  const FitResult b = fit(p, pen, Mode::control_only);
  CHECK((a.params.L - b.params.L).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a.params.H - b.params.H).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a.params.beta - b.params.beta).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK((a.params.gamma - b.params.gamma).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(a.n_iterations == b.n_iterations);
}

TEST_CASE("solver residual equals Y minus the prediction on the loss cells") {
  const Panel p = fixtures::random_panel({10, 8, 3, 2, 3, 0.2}, 41);
  const Design design = Design::build(p, true);
  const MaskGeometry g = MaskGeometry::build(design, p.control_mask());
  SolverSettings s;
  s.lambda_L = 0.05;
  s.lambda_H = 0.01;
  s.lambda_beta = 0.01;
  const SolveResult r = solve(design, g, p.Y(), s);
  const ModelParams m = design.to_original(r.params, true);
  const Eigen::MatrixXd direct = (p.Y() - predict_y0(p, m)).array() * g.mask;
  CHECK((direct - r.residual).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("standardization round trip") {
  const Panel p = fixtures::random_panel({10, 8, 3, 2, 3, 0.2}, 42);
  const Design design = Design::build(p, true);
  std::mt19937_64 rng(1);
  ModelParams m = ModelParams::zeros(10, 8, 3, 2, 3);
  m.L = oracle::gaussian(10, 8, rng);
  m.H = oracle::gaussian(3, 2, rng);
  m.beta = oracle::gaussian(3, 1, rng).col(0);
  m.gamma = oracle::gaussian(10, 1, rng).col(0);
  m.delta = oracle::gaussian(8, 1, rng).col(0);
  const StdParams sp = design.to_standardized(m);
  CHECK((design.predict(sp) - predict_y0(p, m)).cwiseAbs().maxCoeff() < 1e-10);
  const ModelParams back = design.to_original(sp, false);
  CHECK((back.H - m.H).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((back.beta - m.beta).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("constant covariates are dropped with a warning") {
  PanelData d = fixtures::random_data({8, 6, 2, 1, 2, 0.2}, 43);
  d.X.col(1).setConstant(4.0);
  d.V[0].setConstant(-1.0);
  const Panel p = validate(d);
  const FitResult f = fit(p, tight(0.1, 0.001, 0.001), Mode::control_only);
  CHECK(f.warnings.size() == 2);
  CHECK(f.params.H.row(1).isZero(0.0));
  CHECK(f.params.beta(0) == 0.0);
  CHECK(kkt_violation(p, f) < 1e-6);
}

TEST_CASE("post fit with empty supports and rank zero is the fixed-effects regression") {
  const Panel p = fixtures::random_panel({9, 7, 3, 2, 3, 0.2}, 50);
  for (Mode mode : {Mode::imposed_null, Mode::control_only}) {
    const LambdaMax lm = lambda_max(p, mode);
    const FitResult first = fit(p, tight(lm.lambda_L, lm.lambda_H, lm.lambda_beta), mode);
    REQUIRE(first.rank_L == 0);
    const FitResult post = fit_post(p, first, mode);
    CHECK(post.post);
    CHECK(post.params.L.isZero(0.0));
    CHECK(post.params.H.isZero(0.0));
    CHECK(post.params.beta.isZero(0.0));
    const oracle::TwoWay o = oracle::two_way_least_squares(p.Y(), loss_mask(p, mode));
    CHECK((post.params.gamma - o.gamma).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((post.params.delta - o.delta).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("post fit keeps supports and rank and does not raise the loss") {
  const Panel p = fixtures::random_panel({14, 12, 3, 3, 4, 0.15}, 51);
  for (Mode mode : {Mode::imposed_null, Mode::control_only}) {
    const LambdaMax lm = lambda_max(p, mode);
    const FitResult first = fit(p, tight(0.4 * lm.lambda_L, 0.3 * lm.lambda_H, 0.3 * lm.lambda_beta), mode);
    const FitResult post = fit_post(p, first, mode);
    CHECK(post.rank_L <= first.rank_L);
    for (const auto& h : post.support_H) {
      CHECK(std::find(first.support_H.begin(), first.support_H.end(), h) != first.support_H.end());
    }
    for (Index j : post.support_beta) {
      CHECK(std::find(first.support_beta.begin(), first.support_beta.end(), j) != first.support_beta.end());
    }
    CHECK(post.loss <= first.loss + 1e-10);
    CHECK(post.penalties.lambda_L == 0.0);
    if (post.converged) CHECK(kkt_violation(p, post) < 1e-4);
  }
  const FitResult first = fit(p, tight(0.1, 0.1, 0.1), Mode::imposed_null);
  CHECK_THROWS_AS(fit_post(p, first, Mode::control_only), std::invalid_argument);
}

TEST_CASE("post fit undoes the shrinkage for orthogonal covariates") {
  // Orthonormal, doubly centered unit-time covariates: the lasso solution is a
  // soft-thresholded least-squares fit and the post fit is least squares.
  const int N = 6, T = 5, J = 4;
  std::mt19937_64 rng(52);
  Eigen::MatrixXd raw = oracle::gaussian(N * T, J, rng);
  for (int j = 0; j < J; ++j) {
    Eigen::Map<Eigen::MatrixXd> m(raw.col(j).data(), N, T);
    m.colwise() -= m.rowwise().mean();
    m.rowwise() -= m.colwise().mean();
  }
  const Eigen::MatrixXd Q = raw.householderQr().householderQ() * Eigen::MatrixXd::Identity(N * T, J);
  PanelData d;
  d.W = Eigen::MatrixXd::Zero(N, T);
  d.Y = Eigen::MatrixXd::Zero(N, T);
  const Eigen::Vector4d coef(3.0, -2.0, 0.5, 0.0);
  for (int j = 0; j < J; ++j) {
    d.V.push_back(Eigen::Map<const Eigen::MatrixXd>(Q.col(j).data(), N, T));
    d.Y += coef(j) * d.V.back();
  }
  d.Y += 0.01 * oracle::gaussian(N, T, rng);
  const Panel p = validate(d);
  const FitOptions o{false, false, false};
  PenaltyConfig pen = tight(100.0, 0.0, 0.06);
  const FitResult first = fit(p, pen, Mode::imposed_null, o);
  const FitResult post = fit_post(p, first, Mode::imposed_null);
  REQUIRE(!first.support_beta.empty());
  for (Index j : first.support_beta) {
    CHECK(std::abs(post.params.beta(j)) >= std::abs(first.params.beta(j)));
  }
}

TEST_CASE("estimator errors") {
  const Panel all_treated = validate([] {
    PanelData d = fixtures::random_data({3, 3}, 1);
    d.W.setOnes();
    return d;
  }());
  CHECK_THROWS_AS(fit(all_treated, PenaltyConfig{}, Mode::control_only), std::invalid_argument);
  const Panel p = fixtures::random_panel({4, 4}, 2);
  PenaltyConfig bad;
  bad.lambda_L = -1.0;
  CHECK_THROWS_AS(fit(p, bad, Mode::imposed_null), std::invalid_argument);
}

TEST_CASE("non-convergence returns the last iterate") {
  const Panel p = fixtures::random_panel({10, 8, 3, 3, 6, 0.2}, 60);
  PenaltyConfig pen;
  pen.lambda_L = 0.01;
  pen.lambda_H = 0.001;
  pen.lambda_beta = 0.001;
  pen.max_iterations = 2;
  pen.rel_tolerance = 1e-14;
  const FitResult f = fit(p, pen, Mode::imposed_null);
  CHECK(!f.converged);
  CHECK(f.n_iterations == 2);
  CHECK(f.objective_trace.size() == 3);
  CHECK(f.params.all_finite());
}

}  // TEST_SUITE
