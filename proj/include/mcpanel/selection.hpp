#pragma once

#include "mcpanel/estimator.hpp"

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace mcpanel {

struct CvFolds {
  int k = 0;
  std::vector<std::vector<Cell>> train_sets;
  std::vector<std::vector<Cell>> eval_sets;
};

/// Each training set holds round(|O|^2 / NT) control cells drawn without
/// replacement; its evaluation set is the rest of O.
CvFolds make_folds(const Panel& panel, int k, std::uint64_t seed);

enum class Criterion { mse, one_se };

std::string to_string(Criterion c);
Criterion parse_criterion(const std::string& text);

struct GridSpec {
  int points_L = 10;
  int points_H = 10;
  int points_beta = 10;
  double min_ratio = 1e-4;  // smallest positive value relative to the axis maximum
  bool include_zero = true;
  // Explicit axis values replace the generated ones when nonempty.
  std::vector<double> values_L;
  std::vector<double> values_H;
  std::vector<double> values_beta;
  // Experimental: after the grid, refine the incumbent one axis at a time.
  bool cube_search = false;
  int cube_rounds = 2;
};

struct CvOptions {
  FitOptions fit;
  int max_iterations = 500;
  double rel_tolerance = 1e-6;
  int workers = 1;  // folds evaluated concurrently
};

struct Lambdas {
  double lambda_L = 0.0;
  double lambda_H = 0.0;
  double lambda_beta = 0.0;
  friend bool operator==(const Lambdas&, const Lambdas&) = default;
};

struct CvCell {
  Lambdas lambdas;
  double cv_error = 0.0;  // mean of the per-fold evaluation MSEs
  double cv_se = 0.0;     // sample SD of the per-fold MSEs over sqrt(K)
  std::vector<double> fold_errors;
  std::vector<Index> fold_size_H;
  std::vector<Index> fold_size_beta;
  std::vector<Index> fold_rank_L;
  std::vector<bool> fold_converged;
  bool refined = false;  // added by the cube search
};

struct CvResult {
  CvFolds folds;
  LambdaMax bounds;  // axis maxima used for the grid
  std::vector<double> axis_L, axis_H, axis_beta;
  std::vector<CvCell> cells;
  std::size_t best_mse = 0;
  std::size_t best_1se = 0;
  Criterion criterion = Criterion::mse;

  const CvCell& best(Criterion c) const { return cells[c == Criterion::mse ? best_mse : best_1se]; }
  const CvCell& selected() const { return best(criterion); }
};

/// Log-spaced from top down to top * min_ratio, optionally followed by 0;
/// a zero top yields {0}.
std::vector<double> make_axis(double top, int points, double min_ratio, bool include_zero);

CvResult cross_validate(const Panel& panel, const GridSpec& grid, int k, std::uint64_t seed,
                        Criterion criterion = Criterion::mse, const CvOptions& options = {});

/// Recomputes best_mse and best_1se from the cells.
void select_optima(CvResult& result);

/// One row per cell and fold, a summary row per cell, then the two optima.
void write_cv_csv(std::ostream& os, const CvResult& result);

}  // namespace mcpanel
