#include "mcpanel/selection.hpp"

#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <string>

using namespace mcpanel;

namespace {

GridSpec small_grid(int points) {
  GridSpec g;
  g.points_L = g.points_H = g.points_beta = points;
  g.min_ratio = 1e-2;
  return g;
}

void check_optima(const CvResult& r) {
  const CvCell& m = r.cells[r.best_mse];
  const CvCell& o = r.cells[r.best_1se];
  for (const CvCell& c : r.cells) CHECK(m.cv_error <= c.cv_error);
  CHECK(o.cv_error <= m.cv_error + m.cv_se);
  CHECK(o.lambdas.lambda_L >= m.lambdas.lambda_L);
  CHECK(o.lambdas.lambda_H >= m.lambdas.lambda_H);
  CHECK(o.lambdas.lambda_beta >= m.lambdas.lambda_beta);
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("fold sizes follow the share of control cells") {
  PanelData d = fixtures::random_data({10, 10}, 1);
  for (int k = 0; k < 10; ++k) d.W(k, 9) = 1.0;
  const Panel p = validate(d);
  const CvFolds f = make_folds(p, 5, 3);
  REQUIRE(f.train_sets.size() == 5);
  for (int k = 0; k < 5; ++k) {
    CHECK(f.train_sets[k].size() == 81);
    CHECK(f.eval_sets[k].size() == 9);
    std::set<std::pair<Index, Index>> seen;
    for (const Cell& c : f.train_sets[k]) seen.insert({c.i, c.t});
    for (const Cell& c : f.eval_sets[k]) {
      CHECK(p.W()(c.i, c.t) == 0.0);
      CHECK(seen.insert({c.i, c.t}).second);
    }
    CHECK(seen.size() == 90);
  }
}

TEST_CASE("folds are reproducible from the seed") {
  const Panel p = fixtures::random_panel({8, 7, 0, 0, 0, 0.2}, 2);
  const CvFolds a = make_folds(p, 4, 11), b = make_folds(p, 4, 11), c = make_folds(p, 4, 12);
  CHECK(a.train_sets == b.train_sets);
  CHECK(a.train_sets != c.train_sets);
}

TEST_CASE("fold errors") {
  const Panel untreated = fixtures::random_panel({5, 5}, 3);
  try {
    make_folds(untreated, 5, 1);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()) == "degenerate folds");
  }
  const Panel p = fixtures::random_panel({5, 5, 0, 0, 0, 0.3}, 4);
  CHECK_THROWS_AS(make_folds(p, 1, 1), std::invalid_argument);
}

TEST_CASE("axes") {
  const auto a = make_axis(2.0, 3, 1e-2, true);
  REQUIRE(a.size() == 4);
  CHECK(a[0] == 2.0);
  CHECK(a[1] == doctest::Approx(0.2));
  CHECK(a[2] == doctest::Approx(0.02));
  CHECK(a[3] == 0.0);
  CHECK(make_axis(0.0, 5, 1e-4, true) == std::vector<double>{0.0});
  CHECK(make_axis(1.0, 1, 1e-4, false) == std::vector<double>{1.0});
  CHECK_THROWS_AS(make_axis(1.0, 0, 1e-4, true), std::invalid_argument);
  CHECK_THROWS_AS(make_axis(1.0, 3, 0.0, true), std::invalid_argument);
}

TEST_CASE("criterion names") {
  CHECK(parse_criterion("1se") == Criterion::one_se);
  CHECK(to_string(Criterion::one_se) == "1se");
  CHECK_THROWS_AS(parse_criterion("aic"), std::invalid_argument);
}

TEST_CASE("cross-validation surface and optima") {
  const Panel p = fixtures::random_panel({10, 9, 3, 2, 3, 0.2}, 5);
  const CvResult r = cross_validate(p, small_grid(2), 3, 7, Criterion::one_se);
  CHECK(r.cells.size() == 27);
  CHECK(r.axis_L.size() == 3);
  for (const CvCell& c : r.cells) {
    CHECK(c.fold_errors.size() == 3);
    CHECK(std::isfinite(c.cv_error));
  }
  check_optima(r);
  CHECK(&r.selected() == &r.cells[r.best_1se]);

  // The top cell sits at the grid maxima, where every block is zero.
  const CvCell& top = r.cells.front();
  CHECK(top.lambdas.lambda_L == r.axis_L.front());
  CHECK(top.lambdas.lambda_H == r.axis_H.front());
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(top.fold_rank_L[k] == 0);
    CHECK(top.fold_size_H[k] == 0);
    CHECK(top.fold_size_beta[k] == 0);
  }
}

TEST_CASE("se is the fold standard deviation over root k") {
  const Panel p = fixtures::random_panel({9, 8, 2, 2, 0, 0.2}, 6);
  const CvResult r = cross_validate(p, small_grid(2), 4, 2);
  for (const CvCell& c : r.cells) {
    const double k = static_cast<double>(c.fold_errors.size());
    double mean = 0.0;
    for (double e : c.fold_errors) mean += e / k;
    double ss = 0.0;
    for (double e : c.fold_errors) ss += (e - mean) * (e - mean);
    CHECK(c.cv_error == doctest::Approx(mean).epsilon(1e-12));
    CHECK(c.cv_se == doctest::Approx(std::sqrt(ss / (k - 1.0)) / std::sqrt(k)).epsilon(1e-10));
  }
}

TEST_CASE("one-point grid makes that cell both optima") {
  const Panel p = fixtures::random_panel({8, 8, 2, 2, 2, 0.2}, 7);
  GridSpec g;
  g.values_L = {0.1};
  g.values_H = {0.05};
  g.values_beta = {0.02};
  const CvResult r = cross_validate(p, g, 3, 1);
  REQUIRE(r.cells.size() == 1);
  CHECK(r.best_mse == 0);
  CHECK(r.best_1se == 0);
}

TEST_CASE("result does not depend on the order of explicit grid values") {
  const Panel p = fixtures::random_panel({9, 8, 2, 2, 2, 0.2}, 8);
  GridSpec a;
  a.values_L = {0.3, 0.03, 0.0};
  a.values_H = {0.2, 0.0};
  a.values_beta = {0.1, 0.01};
  GridSpec b = a;
  std::reverse(b.values_L.begin(), b.values_L.end());
  std::reverse(b.values_H.begin(), b.values_H.end());
  b.values_beta = {0.01, 0.1, 0.01};
  const CvResult ra = cross_validate(p, a, 3, 5), rb = cross_validate(p, b, 3, 5);
  CHECK(ra.best(Criterion::mse).lambdas == rb.best(Criterion::mse).lambdas);
  CHECK(ra.best(Criterion::one_se).lambdas == rb.best(Criterion::one_se).lambdas);
  CHECK(ra.best(Criterion::mse).cv_error == rb.best(Criterion::mse).cv_error);
}

TEST_CASE("fold workers do not change the result") {
  const Panel p = fixtures::random_panel({9, 8, 2, 2, 2, 0.2}, 9);
  CvOptions one, many;
  many.workers = 3;
  const CvResult a = cross_validate(p, small_grid(2), 3, 4, Criterion::mse, one);
  const CvResult b = cross_validate(p, small_grid(2), 3, 4, Criterion::mse, many);
  std::ostringstream sa, sb;
  write_cv_csv(sa, a);
  write_cv_csv(sb, b);
  CHECK(sa.str() == sb.str());
}

TEST_CASE("csv export has fold, summary and optimum rows") {
  const Panel p = fixtures::random_panel({8, 7, 1, 1, 1, 0.2}, 10);
  const CvResult r = cross_validate(p, small_grid(1), 2, 4);
  std::ostringstream os;
  write_cv_csv(os, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "kind,cell,fold,lambda_L,lambda_H,lambda_beta,error,se,size_H,size_beta,rank_L,converged");
  int folds = 0, summary = 0, best = 0;
  while (std::getline(is, line)) {
    folds += line.rfind("fold,", 0) == 0;
    summary += line.rfind("summary,", 0) == 0;
    best += line.rfind("best_", 0) == 0;
  }
  CHECK(folds == static_cast<int>(r.cells.size()) * 2);
  CHECK(summary == static_cast<int>(r.cells.size()));
  CHECK(best == 2);
}

TEST_CASE("cube search only adds cells and keeps the optima consistent") {
  const Panel p = fixtures::random_panel({9, 8, 2, 2, 2, 0.2}, 11);
  GridSpec g = small_grid(2);
  const CvResult base = cross_validate(p, g, 3, 4);
  g.cube_search = true;
  const CvResult refined = cross_validate(p, g, 3, 4);
  CHECK(refined.cells.size() >= base.cells.size());
  CHECK(refined.best(Criterion::mse).cv_error <= base.best(Criterion::mse).cv_error);
  check_optima(refined);
}

TEST_CASE("noise covariates: a large lambda_H beats lambda_H = 0 in most runs") {
  int wins = 0;
  const int runs = 50;
  for (int s = 0; s < runs; ++s) {
    const Panel p = fixtures::random_panel({8, 8, 3, 3, 0, 0.2}, 1000 + s);
    const double top = lambda_max(p, Mode::control_only).lambda_H;
    GridSpec g;
    g.values_L = {lambda_max(p, Mode::control_only).lambda_L};
    g.values_H = {top, 0.0};
    g.values_beta = {0.0};
    const CvResult r = cross_validate(p, g, 3, s);
    const CvCell& large = r.cells[0].lambdas.lambda_H > 0.0 ? r.cells[0] : r.cells[1];
    const CvCell& zero = r.cells[0].lambdas.lambda_H > 0.0 ? r.cells[1] : r.cells[0];
    wins += large.cv_error <= zero.cv_error ? 1 : 0;
  }
  CHECK(wins > runs / 2);
}

TEST_CASE("invalid grids are rejected") {
  const Panel p = fixtures::random_panel({6, 6, 1, 1, 0, 0.2}, 12);
  GridSpec g;
  g.values_L = {-1.0};
  CHECK_THROWS_AS(cross_validate(p, g, 2, 1), std::invalid_argument);
}

}  // TEST_SUITE
