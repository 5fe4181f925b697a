#include "mcpanel/dgp.hpp"

#include "mcpanel/prox.hpp"

#include <doctest.h>

#include <Eigen/Eigenvalues>

using namespace mcpanel;

namespace {

DgpConfig small_config(std::uint64_t seed) {
  DgpConfig c;
  c.N = 20;
  c.T = 15;
  c.p = 6;
  c.q = 4;
  c.B = 8;
  c.h_prob = 0.3;
  c.b_prob = 0.4;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_SUITE("dgp") {

TEST_CASE("shapes and exact rank of L") {
  for (Index r : {0, 1, 3, 5}) {
    DgpConfig c = small_config(3);
    c.rank_L = r;
    const SimulatedPanel s = generate(c);
    CHECK(s.panel.N() == 20);
    CHECK(s.panel.T() == 15);
    CHECK(s.panel.P() == 6);
    CHECK(s.panel.Q() == 4);
    CHECK(s.panel.J() == 8);
    CHECK(s.truth.H.rows() == 6);
    CHECK(s.truth.beta.size() == 8);
    CHECK(numerical_rank(s.truth.L) == r);
  }
}

TEST_CASE("outcome decomposes into its parts") {
  const SimulatedPanel s = generate(small_config(4));
  const Eigen::MatrixXd y0 = predict_y0(s.panel, s.truth) + s.shocks;
  CHECK((s.panel.Y() - y0 - s.tau * s.panel.W()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("tau = 0 leaves Y free of the treatment") {
  DgpConfig c = small_config(5);
  c.tau = 0.0;
  const SimulatedPanel a = generate(c);
  c.tau = 3.0;
  const SimulatedPanel b = generate(c);
  CHECK(a.panel.W() == b.panel.W());
  CHECK(((b.panel.Y() - a.panel.Y()) - 3.0 * a.panel.W()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.panel.Y() - predict_y0(a.panel, a.truth) - a.shocks).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("treatment share over many seeds") {
  DgpConfig c;
  c.N = 50;
  c.T = 50;
  c.p = 0;
  c.q = 0;
  c.B = 0;
  c.rank_L = 2;
  c.w = 0.1;
  double total = 0.0;
  for (std::uint64_t s = 1; s <= 100; ++s) {
    c.seed = s;
    total += generate(c).panel.W().mean();
  }
  CHECK(std::abs(total / 100.0 - 0.1) <= 0.01);
}

TEST_CASE("same seed gives an identical panel") {
  const SimulatedPanel a = generate(small_config(6)), b = generate(small_config(6));
  CHECK(a.panel.Y() == b.panel.Y());
  CHECK(a.panel.W() == b.panel.W());
  CHECK(a.panel.X() == b.panel.X());
  CHECK(a.panel.Z() == b.panel.Z());
  CHECK(a.truth.H == b.truth.H);
  CHECK(a.truth.beta == b.truth.beta);
  CHECK(a.panel.Y() != generate(small_config(7)).panel.Y());
}

TEST_CASE("random correlation is a PSD correlation matrix") {
  std::mt19937_64 rng(8);
  for (double smax : {0.0, 0.3, 0.8, 0.99}) {
    for (Index dim : {1, 5, 30}) {
      const Eigen::MatrixXd s = random_correlation(dim, smax, rng);
      CHECK((s - s.transpose()).cwiseAbs().maxCoeff() == 0.0);
      CHECK((s.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
      CHECK(es.eigenvalues().minCoeff() >= -1e-10);
    }
  }
}

TEST_CASE("exact-count activity") {
  DgpConfig c = small_config(9);
  c.exact_count_bernoulli = true;
  c.w = 0.1;
  c.h_prob = 0.25;
  c.b_prob = 0.5;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    c.seed = s;
    const SimulatedPanel p = generate(c);
    CHECK(p.panel.n_treated() == 30);
    CHECK((p.truth.H.array() != 0.0).count() == 6);
    CHECK((p.truth.beta.array() != 0.0).count() == 4);
  }
}

TEST_CASE("config checks") {
  DgpConfig c = small_config(1);
  c.rank_L = 16;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = small_config(1);
  c.w = 1.5;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = small_config(1);
  c.sigma_max = 1.0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = small_config(1);
  c.sigma_eps = 0.0;
  CHECK_THROWS_AS(c.check(), std::invalid_argument);
  c = small_config(1);
  c.N = 0;
  CHECK_THROWS_AS(generate(c), std::invalid_argument);
}

}  // TEST_SUITE
