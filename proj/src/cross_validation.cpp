#include "rrmix/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "rrmix/csv.hpp"
#include "rrmix/parallel.hpp"
#include "rrmix/rng.hpp"

namespace rrmix {

namespace {
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
}

const char* penalty_kind_name(PenaltyKind k) {
  switch (k) {
    case PenaltyKind::Lasso: return "lasso";
    case PenaltyKind::Ridge: return "ridge";
    case PenaltyKind::GroupLasso: return "group-lasso";
  }
  return "?";
}

PenaltyKind penalty_kind_from_name(const std::string& name) {
  if (name == "lasso") return PenaltyKind::Lasso;
  if (name == "ridge") return PenaltyKind::Ridge;
  if (name == "group-lasso" || name == "group_lasso" || name == "group")
    return PenaltyKind::GroupLasso;
  fail(errc::invalid_argument, "unknown penalty kind: " + name);
}

PenaltySpec with_grid_value(const PenaltySpec& base, PenaltyKind kind, double lambda) {
  PenaltySpec p = base;
  switch (kind) {
    case PenaltyKind::Lasso: p.lambda1 = lambda; break;
    case PenaltyKind::Ridge: p.lambda2 = lambda; break;
    case PenaltyKind::GroupLasso: p.lambda3 = lambda; break;
  }
  return p;
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || hi < lo) fail(errc::invalid_argument, "grid: need lo <= hi and step > 0");
  std::vector<double> grid;
  const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  grid.reserve(n + 1);
  for (int i = 0; i <= n; ++i) grid.push_back(lo + i * step);
  if (std::abs(grid.back() - hi) > 1e-9 * (1.0 + std::abs(hi))) grid.push_back(hi);
  else grid.back() = hi;
  return grid;
}

bool CVGrid::cell_failed(int s_idx, int l_idx) const { return std::isnan(cv_mean(s_idx, l_idx)); }

std::vector<int> fold_assignment(int n_rows, int folds, std::uint64_t seed) {
  if (folds < 2) fail(errc::invalid_argument, "cross-validation needs >= 2 folds");
  if (n_rows < folds) fail(errc::invalid_argument, "fewer rows than folds");
  std::vector<int> order(n_rows);
  for (int i = 0; i < n_rows; ++i) order[i] = i;
  Rng rng(Rng::mix(seed, 0xf01d5u));
  rng.shuffle(order);
  std::vector<int> fold(n_rows);
  for (int pos = 0; pos < n_rows; ++pos) fold[order[pos]] = pos % folds;
  return fold;
}

CVGrid cross_validate(const MixedDataset& data, const CVConfig& config) {
  if (config.ranks.empty() || config.lambdas.empty())
    fail(errc::invalid_argument, "cross-validation grid is empty");
  for (std::size_t i = 1; i < config.lambdas.size(); ++i)
    if (config.lambdas[i] < config.lambdas[i - 1])
      fail(errc::invalid_argument, "lambda grid must be non-decreasing");

  const int n_s = static_cast<int>(config.ranks.size());
  const int n_l = static_cast<int>(config.lambdas.size());
  const int v_count = config.folds;
  std::vector<int> fold = fold_assignment(data.n_rows, v_count, config.seed);

  std::vector<std::vector<int>> train_rows(v_count), test_rows(v_count);
  for (int i = 0; i < data.n_rows; ++i)
    for (int v = 0; v < v_count; ++v)
      (fold[i] == v ? test_rows[v] : train_rows[v]).push_back(i);

  CVGrid grid;
  grid.ranks = config.ranks;
  grid.lambdas = config.lambdas;
  grid.folds = v_count;
  grid.seed = config.seed;
  grid.n_responses = data.n_responses();
  grid.fold_losses.assign(v_count, Matrix::Constant(n_s, n_l, kNan));

  // one job per (rank, fold): the lambda chain shares warm starts
  const int n_jobs = n_s * v_count;
  std::vector<int> unseen_per_job(n_jobs, 0);
  parallel_for(n_jobs, config.workers, [&](int job) {
    const int s_idx = job / v_count;
    const int v = job % v_count;
    MixedDataset train = subset_rows(data, train_rows[v]);
    MixedDataset test = subset_rows(data, test_rows[v]);
    ModelFit warm;
    bool have_warm = false;
    for (int l_idx = n_l - 1; l_idx >= 0; --l_idx) {
      FitConfig fc = config.fit;
      fc.rank = config.ranks[s_idx];
      fc.penalty = with_grid_value(config.base, config.kind, config.lambdas[l_idx]);
      fc.seed = Rng::mix(config.seed, s_idx, v, l_idx);
      try {
        ModelFit cell = fit(train, fc, have_warm ? &warm : nullptr);
        grid.fold_losses[v](s_idx, l_idx) =
            mean_heldout_nll(cell, test, &unseen_per_job[job]);
        warm = std::move(cell);
        have_warm = true;
      } catch (const Error&) {
        // FitFailure for this cell; the chain continues from the last
        // successful warm start
      }
    }
  });

  for (int u : unseen_per_job) grid.unseen_category_hits += u;
  grid.cv_mean = Matrix::Constant(n_s, n_l, kNan);
  grid.cv_se = Matrix::Constant(n_s, n_l, kNan);
  for (int s_idx = 0; s_idx < n_s; ++s_idx) {
    for (int l_idx = 0; l_idx < n_l; ++l_idx) {
      bool ok = true;
      double sum = 0.0;
      for (int v = 0; v < v_count; ++v) {
        double x = grid.fold_losses[v](s_idx, l_idx);
        if (std::isnan(x)) ok = false;
        else sum += x;
      }
      if (!ok) {
        ++grid.failed_cells;
        continue;
      }
      double mean = sum / v_count;
      double ss = 0.0;
      for (int v = 0; v < v_count; ++v) {
        double d = grid.fold_losses[v](s_idx, l_idx) - mean;
        ss += d * d;
      }
      grid.cv_mean(s_idx, l_idx) = mean;
      grid.cv_se(s_idx, l_idx) = std::sqrt(ss / (v_count - 1)) / std::sqrt(double(v_count));
    }
  }
  return grid;
}

SelectionResult select_models(const CVGrid& grid, const std::vector<double>& ks) {
  const int n_s = static_cast<int>(grid.ranks.size());
  const int n_l = static_cast<int>(grid.lambdas.size());
  int best_s = -1, best_l = -1;
  for (int s_idx = 0; s_idx < n_s; ++s_idx) {
    for (int l_idx = 0; l_idx < n_l; ++l_idx) {
      if (grid.cell_failed(s_idx, l_idx)) continue;
      if (best_s < 0) {
        best_s = s_idx;
        best_l = l_idx;
        continue;
      }
      double cur = grid.cv_mean(s_idx, l_idx), best = grid.cv_mean(best_s, best_l);
      bool better = cur < best;
      if (cur == best) {
        // ties: larger lambda, then smaller rank
        if (grid.lambdas[l_idx] > grid.lambdas[best_l]) better = true;
        else if (grid.lambdas[l_idx] == grid.lambdas[best_l] &&
                 grid.ranks[s_idx] < grid.ranks[best_s])
          better = true;
      }
      if (better) {
        best_s = s_idx;
        best_l = l_idx;
      }
    }
  }
  if (best_s < 0) fail(errc::empty_feasible_set, "every grid cell failed");

  SelectionResult out;
  out.s_star = grid.ranks[best_s];
  out.lambda_min = grid.lambdas[best_l];
  out.cv_min = grid.cv_mean(best_s, best_l);
  out.se_min = grid.cv_se(best_s, best_l);

  for (double k : ks) {
    if (!(k >= 0.0)) fail(errc::invalid_argument, "k levels must be >= 0");
    double threshold = out.cv_min + k * out.se_min;
    KseSelection pick;
    pick.k = k;
    pick.threshold = threshold;
    bool found = false;
    for (int l_idx = n_l - 1; l_idx >= 0 && !found; --l_idx) {
      for (int s_idx = 0; s_idx < n_s && !found; ++s_idx) {
        if (grid.ranks[s_idx] > out.s_star) continue;
        if (grid.cell_failed(s_idx, l_idx)) continue;
        if (grid.cv_mean(s_idx, l_idx) <= threshold) {
          pick.rank = grid.ranks[s_idx];
          pick.lambda = grid.lambdas[l_idx];
          pick.cv_mean = grid.cv_mean(s_idx, l_idx);
          found = true;
        }
      }
    }
    if (!found) fail(errc::empty_feasible_set, "no cell within the kSE threshold");
    out.kse.push_back(pick);
  }

  for (int s_idx = 0; s_idx < n_s; ++s_idx) {
    int arg = -1;
    for (int l_idx = 0; l_idx < n_l; ++l_idx) {
      if (grid.cell_failed(s_idx, l_idx)) continue;
      if (arg < 0 || grid.cv_mean(s_idx, l_idx) < grid.cv_mean(s_idx, arg) ||
          (grid.cv_mean(s_idx, l_idx) == grid.cv_mean(s_idx, arg) &&
           grid.lambdas[l_idx] > grid.lambdas[arg]))
        arg = l_idx;
    }
    if (arg < 0) continue;
    out.per_rank.push_back({grid.ranks[s_idx], grid.lambdas[arg], grid.cv_mean(s_idx, arg),
                            grid.cv_se(s_idx, arg)});
  }
  return out;
}

int count_parameters(const std::vector<VariableSchema>& schema, int rank) {
  int p = 0, r = 0;
  int discrete_pred = 0, plain_resp = 0, ordinal_resp = 0;
  for (const auto& v : schema) {
    if (v.role == Role::Predictor) {
      ++p;
      if (is_discrete(v.kind)) discrete_pred += v.n_categories() - 2;
    } else {
      ++r;
      if (v.kind == VariableKind::Ordinal) ordinal_resp += v.n_categories() - 1;
      else plain_resp += 1;
    }
  }
  if (rank < 1 || rank > std::min(p, r))
    fail(errc::invalid_argument, "count_parameters: rank must be in 1..min(P,R)");
  return (p + r - rank) * rank + discrete_pred + plain_resp + ordinal_resp;
}

double implied_coefficient_mse(const ModelFit& a, const ModelFit& b) {
  Matrix da = a.implied_coefficients();
  Matrix db = b.implied_coefficients();
  if (da.rows() != db.rows() || da.cols() != db.cols())
    fail(errc::dimension_mismatch, "implied_coefficient_mse: shapes differ");
  return (da - db).squaredNorm() / (da.rows() * da.cols());
}

std::vector<std::string> write_cv_artifacts(const CVGrid& grid, const SelectionResult& sel,
                                            const std::string& out_dir) {
  std::vector<std::string> outputs;
  {
    std::vector<std::vector<std::string>> rows{{"rank", "lambda", "fold", "loss"}};
    for (std::size_t s = 0; s < grid.ranks.size(); ++s)
      for (std::size_t l = 0; l < grid.lambdas.size(); ++l)
        for (int v = 0; v < grid.folds; ++v) {
          double x = grid.fold_losses[v](s, l);
          rows.push_back({std::to_string(grid.ranks[s]), format_double(grid.lambdas[l]),
                          std::to_string(v), std::isnan(x) ? "" : format_double(x)});
        }
    write_csv(out_dir + "/cv_folds.csv", rows);
    outputs.push_back("cv_folds.csv");
  }
  {
    std::vector<std::vector<std::string>> rows{
        {"rank", "lambda", "ape", "ape_se", "ape_per_response", "failed"}};
    for (std::size_t s = 0; s < grid.ranks.size(); ++s)
      for (std::size_t l = 0; l < grid.lambdas.size(); ++l) {
        bool bad = grid.cell_failed(s, l);
        rows.push_back({std::to_string(grid.ranks[s]), format_double(grid.lambdas[l]),
                        bad ? "" : format_double(grid.cv_mean(s, l)),
                        bad ? "" : format_double(grid.cv_se(s, l)),
                        bad ? "" : format_double(grid.cv_mean(s, l) / grid.n_responses),
                        bad ? "1" : "0"});
      }
    write_csv(out_dir + "/cv_curve.csv", rows);
    outputs.push_back("cv_curve.csv");
  }
  {
    nlohmann::ordered_json j;
    j["folds"] = grid.folds;
    j["seed"] = grid.seed;
    j["failed_cells"] = grid.failed_cells;
    j["unseen_category_hits"] = grid.unseen_category_hits;
    j["rank_min"] = sel.s_star;
    j["lambda_min"] = sel.lambda_min;
    j["cv_min"] = sel.cv_min;
    j["cv_min_se"] = sel.se_min;
    nlohmann::ordered_json kse = nlohmann::ordered_json::array();
    for (const auto& pick : sel.kse) {
      nlohmann::ordered_json e;
      e["k"] = pick.k;
      e["threshold"] = pick.threshold;
      e["rank"] = pick.rank;
      e["lambda"] = pick.lambda;
      e["cv_mean"] = pick.cv_mean;
      kse.push_back(std::move(e));
    }
    j["kse"] = std::move(kse);
    nlohmann::ordered_json per_rank = nlohmann::ordered_json::array();
    for (const auto& rm : sel.per_rank) {
      nlohmann::ordered_json e;
      e["rank"] = rm.rank;
      e["lambda_min"] = rm.lambda;
      e["ape"] = rm.cv_mean;
      e["ape_se"] = rm.cv_se;
      per_rank.push_back(std::move(e));
    }
    j["per_rank"] = std::move(per_rank);
    write_text_file(out_dir + "/selection.json", j.dump(2) + "\n");
    outputs.push_back("selection.json");
  }
  return outputs;
}

}  // namespace rrmix
