#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rrmix/solver.hpp"

namespace rrmix {

enum class PenaltyKind { Lasso, Ridge, GroupLasso };

const char* penalty_kind_name(PenaltyKind k);
PenaltyKind penalty_kind_from_name(const std::string& name);

// base carries the fixed companion penalties; the grid value fills the slot
// selected by kind.
PenaltySpec with_grid_value(const PenaltySpec& base, PenaltyKind kind, double lambda);

// lo, lo+step, ..., hi (inclusive, increasing)
std::vector<double> make_grid(double lo, double hi, double step);

struct CVConfig {
  std::vector<int> ranks;
  std::vector<double> lambdas;  // increasing
  PenaltyKind kind = PenaltyKind::GroupLasso;
  PenaltySpec base;  // companion penalties, grid slot ignored
  int folds = 10;
  std::uint64_t seed = 1;
  int workers = 0;  // 0: all cores
  FitConfig fit;    // rank / penalty / seed overwritten per cell
};

struct CVGrid {
  std::vector<int> ranks;
  std::vector<double> lambdas;
  int folds = 0;
  std::uint64_t seed = 0;
  int n_responses = 0;
  Matrix cv_mean;                   // ranks x lambdas, NaN when failed
  Matrix cv_se;                     // SD over folds / sqrt(folds)
  std::vector<Matrix> fold_losses;  // per fold: ranks x lambdas, NaN = FitFailure
  int failed_cells = 0;
  int unseen_category_hits = 0;  // held-out categories mapped to 0

  bool cell_failed(int s_idx, int l_idx) const;
};

// Fold of each row; depends only on (n_rows, folds, seed), never on the data.
// Sizes differ by at most one row.
std::vector<int> fold_assignment(int n_rows, int folds, std::uint64_t seed);

// For every (rank, lambda, fold): fit on the other folds (warm-started along
// the lambda grid from strong to weak within each (rank, fold) chain) and
// score the held-out mean per-observation NLL summed over responses. Held-out
// rows see only training-fold transforms. Results are identical for any
// worker count.
CVGrid cross_validate(const MixedDataset& data, const CVConfig& config);

struct KseSelection {
  double k = 0.0;
  double threshold = 0.0;  // cv_min + k * se_min
  int rank = 0;
  double lambda = 0.0;
  double cv_mean = 0.0;
};

struct RankMinimum {
  int rank = 0;
  double lambda = 0.0;
  double cv_mean = 0.0;
  double cv_se = 0.0;
};

struct SelectionResult {
  int s_star = 0;
  double lambda_min = 0.0;
  double cv_min = 0.0;
  double se_min = 0.0;
  std::vector<KseSelection> kse;      // aligned with the ks argument
  std::vector<RankMinimum> per_rank;  // lambda_min and its error per rank
};

// Global argmin (ties: larger lambda, then smaller rank), then for each k the
// largest lambda over ranks <= s_star with cv_mean <= cv_min + k * se_min
// (ties toward smaller rank). k = 0 recovers the argmin cell's lambda.
SelectionResult select_models(const CVGrid& grid, const std::vector<double>& ks);

// K = (P + R - S) S + sum over discrete predictors (C_p - 2)
//   + #(numeric or binary responses) + sum over ordinal responses (C_r - 1)
int count_parameters(const std::vector<VariableSchema>& schema, int rank);

// mean squared entrywise difference of the implied coefficient matrices B V'
double implied_coefficient_mse(const ModelFit& a, const ModelFit& b);

// cv_folds.csv (rank, lambda, fold, loss), cv_curve.csv (APE and SE per cell,
// plus the per-observation-response rescaling), selection.json. Returns the
// file names written.
std::vector<std::string> write_cv_artifacts(const CVGrid& grid, const SelectionResult& sel,
                                            const std::string& out_dir);

}  // namespace rrmix
