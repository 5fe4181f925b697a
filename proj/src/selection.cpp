#include "mcpanel/selection.hpp"

#include "mcpanel/csv_io.hpp"
#include "mcpanel/prox.hpp"
#include "mcpanel/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace mcpanel {

CvFolds make_folds(const Panel& panel, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("number of folds must be at least 2");
  const auto& O = panel.control();
  const Index nO = panel.n_control();
  if (nO < k) throw std::invalid_argument("fewer control cells than folds");
  const double NT = static_cast<double>(panel.N() * panel.T());
  const auto m = static_cast<Index>(std::llround(static_cast<double>(nO) * static_cast<double>(nO) / NT));
  if (m >= nO || m < 1) throw std::invalid_argument("degenerate folds");

  CvFolds folds;
  folds.k = k;
  std::mt19937_64 rng(seed);
  std::vector<Index> idx(nO);
  for (int f = 0; f < k; ++f) {
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index j = 0; j < m; ++j) {
      std::uniform_int_distribution<Index> pick(j, nO - 1);
      std::swap(idx[j], idx[pick(rng)]);
    }
    std::vector<char> in(nO, 0);
    for (Index j = 0; j < m; ++j) in[idx[j]] = 1;
    std::vector<Cell> train, eval;
    train.reserve(m);
    eval.reserve(nO - m);
    for (Index j = 0; j < nO; ++j) (in[j] ? train : eval).push_back(O[j]);
    folds.train_sets.push_back(std::move(train));
    folds.eval_sets.push_back(std::move(eval));
  }
  return folds;
}

std::string to_string(Criterion c) { return c == Criterion::mse ? "mse" : "1se"; }

Criterion parse_criterion(const std::string& text) {
  if (text == "mse") return Criterion::mse;
  if (text == "1se" || text == "one_se") return Criterion::one_se;
  throw std::invalid_argument("unknown criterion '" + text + "'");
}

std::vector<double> make_axis(double top, int points, double min_ratio, bool include_zero) {
  if (points < 1) throw std::invalid_argument("grid axis needs at least one point");
  if (!(min_ratio > 0.0 && min_ratio <= 1.0)) throw std::invalid_argument("min_ratio must lie in (0, 1]");
  std::vector<double> axis;
  if (!(top > 0.0)) return {0.0};
  for (int g = 0; g < points; ++g) {
    const double frac = points == 1 ? 0.0 : static_cast<double>(g) / (points - 1);
    axis.push_back(top * std::pow(min_ratio, frac));
  }
  if (include_zero) axis.push_back(0.0);
  return axis;
}

namespace {

struct FoldFit {
  double error = 0.0;
  Index size_H = 0;
  Index size_beta = 0;
  Index rank_L = 0;
  bool converged = false;
};

struct FoldContext {
  const Design* design;
  const Eigen::MatrixXd* Y;
  MaskGeometry geometry;
  std::vector<Cell> eval;
};

std::vector<double> canonical_axis(std::vector<double> v, const char* name) {
  if (v.empty()) throw std::invalid_argument(std::string("empty grid axis for ") + name);
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw std::invalid_argument(std::string("grid values must be finite and nonnegative for ") + name);
    }
  }
  std::sort(v.begin(), v.end(), std::greater<>());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

FoldFit evaluate(const FoldContext& ctx, const SolveResult& res) {
  FoldFit f;
  const Eigen::MatrixXd pred = ctx.design->predict(res.params);
  double sse = 0.0;
  for (const Cell& c : ctx.eval) {
    const double e = (*ctx.Y)(c.i, c.t) - pred(c.i, c.t);
    sse += e * e;
  }
  f.error = sse / static_cast<double>(ctx.eval.size());
  const ModelParams o = ctx.design->to_original(res.params, false);
  f.size_H = (o.H.array().abs() > kZeroCutoff).count();
  f.size_beta = (o.beta.array().abs() > kZeroCutoff).count();
  f.rank_L = res.rank_L;
  f.converged = res.converged;
  return f;
}

SolverSettings base_settings(const CvOptions& o) {
  SolverSettings s;
  s.max_iterations = o.max_iterations;
  s.rel_tolerance = o.rel_tolerance;
  s.unit_effects = o.fit.unit_effects;
  s.time_effects = o.fit.time_effects;
  return s;
}

// Fits the full grid on one fold, walking lambda_L (outer), lambda_beta and
// lambda_H (inner) from large to small with warm starts.
std::vector<FoldFit> run_grid(const FoldContext& ctx, const CvResult& r, const CvOptions& o) {
  const std::size_t nL = r.axis_L.size(), nB = r.axis_beta.size(), nH = r.axis_H.size();
  std::vector<FoldFit> out(nL * nB * nH);
  SolverSettings s = base_settings(o);
  StdParams block_start, row_start, prev;
  for (std::size_t iL = 0; iL < nL; ++iL) {
    for (std::size_t iB = 0; iB < nB; ++iB) {
      for (std::size_t iH = 0; iH < nH; ++iH) {
        s.lambda_L = r.axis_L[iL];
        s.lambda_beta = r.axis_beta[iB];
        s.lambda_H = r.axis_H[iH];
        const StdParams* warm = iH > 0 ? &prev : iB > 0 ? &row_start : iL > 0 ? &block_start : nullptr;
        SolveResult res = solve(*ctx.design, ctx.geometry, *ctx.Y, s, warm);
        out[(iL * nB + iB) * nH + iH] = evaluate(ctx, res);
        if (iH == 0) {
          row_start = res.params;
          if (iB == 0) block_start = res.params;
        }
        prev = std::move(res.params);
      }
    }
  }
  return out;
}

FoldFit run_single(const FoldContext& ctx, const Lambdas& l, const CvOptions& o) {
  SolverSettings s = base_settings(o);
  s.lambda_L = l.lambda_L;
  s.lambda_H = l.lambda_H;
  s.lambda_beta = l.lambda_beta;
  return evaluate(ctx, solve(*ctx.design, ctx.geometry, *ctx.Y, s));
}

template <typename Fn>
void for_each_fold(int k, int workers, Fn&& fn) {
  const int w = std::max(1, std::min(workers, k));
  if (w == 1) {
    for (int f = 0; f < k; ++f) fn(f);
    return;
  }
  std::vector<std::thread> pool;
  for (int id = 0; id < w; ++id) {
    pool.emplace_back([&, id] {
      for (int f = id; f < k; f += w) fn(f);
    });
  }
  for (auto& t : pool) t.join();
}

void summarize(CvCell& cell) {
  const auto K = static_cast<double>(cell.fold_errors.size());
  double mean = 0.0;
  for (double e : cell.fold_errors) mean += e;
  mean /= K;
  double ss = 0.0;
  for (double e : cell.fold_errors) ss += (e - mean) * (e - mean);
  cell.cv_error = mean;
  cell.cv_se = K > 1 ? std::sqrt(ss / (K - 1.0)) / std::sqrt(K) : 0.0;
}

CvCell collect(const Lambdas& l, const std::vector<std::vector<FoldFit>>& per_fold, std::size_t idx) {
  CvCell c;
  c.lambdas = l;
  for (const auto& fold : per_fold) {
    const FoldFit& f = fold[idx];
    c.fold_errors.push_back(f.error);
    c.fold_size_H.push_back(f.size_H);
    c.fold_size_beta.push_back(f.size_beta);
    c.fold_rank_L.push_back(f.rank_L);
    c.fold_converged.push_back(f.converged);
  }
  summarize(c);
  return c;
}

// Candidates between the incumbent value and its neighbours on an axis.
std::vector<double> refine_values(double v, const std::vector<double>& seen) {
  double lo = -1.0, hi = -1.0;
  for (double x : seen) {
    if (x < v && x > lo) lo = x;
    if (x > v && (hi < 0.0 || x < hi)) hi = x;
  }
  std::vector<double> out;
  if (lo >= 0.0) out.push_back(lo > 0.0 ? std::sqrt(v * lo) : v / 2.0);
  if (hi > 0.0) out.push_back(v > 0.0 ? std::sqrt(v * hi) : hi / 2.0);
  return out;
}

void cube_refine(CvResult& r, const std::vector<FoldContext>& ctx, const GridSpec& grid,
                 const CvOptions& o) {
  for (int round = 0; round < grid.cube_rounds; ++round) {
    for (int axis = 0; axis < 3; ++axis) {
      select_optima(r);
      const Lambdas inc = r.cells[r.best_mse].lambdas;
      std::vector<double> seen;
      for (const auto& c : r.cells) {
        const Lambdas& l = c.lambdas;
        const bool same = axis == 0   ? (l.lambda_L == inc.lambda_L && l.lambda_beta == inc.lambda_beta)
                          : axis == 1 ? (l.lambda_L == inc.lambda_L && l.lambda_H == inc.lambda_H)
                                      : (l.lambda_H == inc.lambda_H && l.lambda_beta == inc.lambda_beta);
        if (same) seen.push_back(axis == 0 ? l.lambda_H : axis == 1 ? l.lambda_beta : l.lambda_L);
      }
      const double v = axis == 0 ? inc.lambda_H : axis == 1 ? inc.lambda_beta : inc.lambda_L;
      for (double cand : refine_values(v, seen)) {
        Lambdas l = inc;
        (axis == 0 ? l.lambda_H : axis == 1 ? l.lambda_beta : l.lambda_L) = cand;
        const bool known = std::any_of(r.cells.begin(), r.cells.end(),
                                       [&](const CvCell& c) { return c.lambdas == l; });
        if (known) continue;
        std::vector<std::vector<FoldFit>> per_fold(ctx.size(), std::vector<FoldFit>(1));
        for_each_fold(static_cast<int>(ctx.size()), o.workers,
                      [&](int f) { per_fold[f][0] = run_single(ctx[f], l, o); });
        CvCell cell = collect(l, per_fold, 0);
        cell.refined = true;
        r.cells.push_back(std::move(cell));
      }
    }
  }
}

std::tuple<double, double, double> preference(const Lambdas& l) {
  return {l.lambda_H, l.lambda_beta, l.lambda_L};
}

}  // namespace

void select_optima(CvResult& r) {
  bool found = false;
  std::size_t best = 0;
  for (std::size_t c = 0; c < r.cells.size(); ++c) {
    const double e = r.cells[c].cv_error;
    if (!std::isfinite(e)) continue;
    if (!found || e < r.cells[best].cv_error ||
        (e == r.cells[best].cv_error && preference(r.cells[c].lambdas) > preference(r.cells[best].lambdas))) {
      best = c;
      found = true;
    }
  }
  if (!found) throw std::runtime_error("every cross-validation fit produced a non-finite error");
  r.best_mse = best;
  const Lambdas& b = r.cells[best].lambdas;
  const double band = r.cells[best].cv_error + r.cells[best].cv_se;
  std::size_t one = best;
  for (std::size_t c = 0; c < r.cells.size(); ++c) {
    const CvCell& cell = r.cells[c];
    if (!std::isfinite(cell.cv_error) || cell.cv_error > band) continue;
    const Lambdas& l = cell.lambdas;
    if (l.lambda_L < b.lambda_L || l.lambda_H < b.lambda_H || l.lambda_beta < b.lambda_beta) continue;
    if (preference(l) > preference(r.cells[one].lambdas)) one = c;
  }
  r.best_1se = one;
}

CvResult cross_validate(const Panel& panel, const GridSpec& grid, int k, std::uint64_t seed,
                        Criterion criterion, const CvOptions& options) {
  if (options.max_iterations <= 0 || !(options.rel_tolerance > 0.0)) {
    throw std::invalid_argument("invalid solver settings for cross-validation");
  }
  CvResult r;
  r.criterion = criterion;
  r.folds = make_folds(panel, k, seed);
  const Design design = Design::build(panel, options.fit.standardize);

  std::vector<FoldContext> ctx;
  ctx.reserve(k);
  for (int f = 0; f < k; ++f) {
    Eigen::ArrayXXd mask = Eigen::ArrayXXd::Zero(panel.N(), panel.T());
    for (const Cell& c : r.folds.train_sets[f]) mask(c.i, c.t) = 1.0;
    ctx.push_back({&design, &panel.Y(), MaskGeometry::build(design, std::move(mask)), r.folds.eval_sets[f]});
  }

  const bool need_bounds = grid.values_L.empty() || grid.values_H.empty() || grid.values_beta.empty();
  if (need_bounds) {
    const MaskGeometry full = MaskGeometry::build(design, panel.control_mask());
    auto take = [&](const MaskGeometry& g) {
      const LambdaBounds b = lambda_bounds(design, g, panel.Y(), options.fit.unit_effects,
                                           options.fit.time_effects);
      r.bounds.lambda_L = std::max(r.bounds.lambda_L, b.lambda_L);
      r.bounds.lambda_H = std::max(r.bounds.lambda_H, b.lambda_H);
      r.bounds.lambda_beta = std::max(r.bounds.lambda_beta, b.lambda_beta);
    };
    take(full);
    for (const auto& c : ctx) take(c.geometry);
  }
  r.axis_L = canonical_axis(grid.values_L.empty()
                                ? make_axis(r.bounds.lambda_L, grid.points_L, grid.min_ratio, grid.include_zero)
                                : grid.values_L,
                            "lambda_L");
  r.axis_H = canonical_axis(grid.values_H.empty()
                                ? make_axis(r.bounds.lambda_H, grid.points_H, grid.min_ratio, grid.include_zero)
                                : grid.values_H,
                            "lambda_H");
  r.axis_beta = canonical_axis(
      grid.values_beta.empty()
          ? make_axis(r.bounds.lambda_beta, grid.points_beta, grid.min_ratio, grid.include_zero)
          : grid.values_beta,
      "lambda_beta");

  std::vector<std::vector<FoldFit>> per_fold(k);
  for_each_fold(k, options.workers, [&](int f) { per_fold[f] = run_grid(ctx[f], r, options); });

  const std::size_t nB = r.axis_beta.size(), nH = r.axis_H.size();
  for (std::size_t iL = 0; iL < r.axis_L.size(); ++iL) {
    for (std::size_t iB = 0; iB < nB; ++iB) {
      for (std::size_t iH = 0; iH < nH; ++iH) {
        const Lambdas l{r.axis_L[iL], r.axis_H[iH], r.axis_beta[iB]};
        r.cells.push_back(collect(l, per_fold, (iL * nB + iB) * nH + iH));
      }
    }
  }
  if (grid.cube_search) cube_refine(r, ctx, grid, options);
  select_optima(r);
  return r;
}

void write_cv_csv(std::ostream& os, const CvResult& r) {
  os << "kind,cell,fold,lambda_L,lambda_H,lambda_beta,error,se,size_H,size_beta,rank_L,converged\n";
  auto lam = [&](const Lambdas& l) {
    return format_double(l.lambda_L) + "," + format_double(l.lambda_H) + "," + format_double(l.lambda_beta);
  };
  for (std::size_t c = 0; c < r.cells.size(); ++c) {
    const CvCell& cell = r.cells[c];
    for (std::size_t f = 0; f < cell.fold_errors.size(); ++f) {
      os << "fold," << c << "," << f + 1 << "," << lam(cell.lambdas) << ","
         << format_double(cell.fold_errors[f]) << ",," << cell.fold_size_H[f] << ","
         << cell.fold_size_beta[f] << "," << cell.fold_rank_L[f] << ","
         << (cell.fold_converged[f] ? 1 : 0) << "\n";
    }
  }
  for (std::size_t c = 0; c < r.cells.size(); ++c) {
    const CvCell& cell = r.cells[c];
    const auto K = static_cast<double>(cell.fold_errors.size());
    auto mean = [&](const std::vector<Index>& v) {
      return format_double(std::accumulate(v.begin(), v.end(), 0.0) / K);
    };
    const bool all_conv = std::all_of(cell.fold_converged.begin(), cell.fold_converged.end(),
                                      [](bool b) { return b; });
    os << "summary," << c << ",," << lam(cell.lambdas) << "," << format_double(cell.cv_error) << ","
       << format_double(cell.cv_se) << "," << mean(cell.fold_size_H) << ","
       << mean(cell.fold_size_beta) << "," << mean(cell.fold_rank_L) << "," << (all_conv ? 1 : 0)
       << "\n";
  }
  for (const auto& [name, idx] : {std::pair<const char*, std::size_t>{"best_mse", r.best_mse},
                                  std::pair<const char*, std::size_t>{"best_1se", r.best_1se}}) {
    const CvCell& cell = r.cells[idx];
    os << name << "," << idx << ",," << lam(cell.lambdas) << "," << format_double(cell.cv_error)
       << "," << format_double(cell.cv_se) << ",,,,\n";
  }
}

}  // namespace mcpanel
