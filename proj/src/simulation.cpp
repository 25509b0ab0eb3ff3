#include "rrmix/simulation.hpp"

#include <Eigen/QR>
#include <cmath>
#include <nlohmann/json.hpp>

#include "rrmix/csv.hpp"
#include "rrmix/likelihood.hpp"
#include "rrmix/parallel.hpp"
#include "rrmix/rng.hpp"

namespace rrmix {

namespace {

// standard-normal quartile boundary and the conditional means of the four
// quartile bins, used both to cut latent Gaussians into ordinal categories
// and as their (population-standardized) scores
constexpr double kQuartile = 0.6744897501960817;
constexpr double kTwoPi = 6.283185307179586476925286766559;

void quartile_scores(double out[4]) {
  double phi_q = std::exp(-0.5 * kQuartile * kQuartile) / std::sqrt(kTwoPi);
  double phi_0 = 1.0 / std::sqrt(kTwoPi);
  double outer = phi_q / 0.25;          // |E[Z | Z in outer bin]|
  double inner = (phi_0 - phi_q) / 0.25;  // |E[Z | Z in inner bin]|
  double sd = std::sqrt(0.5 * (outer * outer + inner * inner));
  out[0] = -outer / sd;
  out[1] = -inner / sd;
  out[2] = inner / sd;
  out[3] = outer / sd;
}

int quartile_category(double z) {
  if (z < -kQuartile) return 1;
  if (z < 0.0) return 2;
  if (z < kQuartile) return 3;
  return 4;
}

VariableSchema make_schema(const std::string& name, Role role, VariableKind kind) {
  VariableSchema v;
  v.name = name;
  v.role = role;
  v.kind = kind;
  if (kind == VariableKind::Binary) v.categories = {"0", "1"};
  else if (kind == VariableKind::Ordinal) v.categories = {"1", "2", "3", "4"};
  return v;
}

}  // namespace

SyntheticData generate_dataset(const Scenario& scenario, std::uint64_t replicate_seed) {
  if (scenario.n < 20) fail(errc::invalid_argument, "scenario: n too small");
  if (scenario.noise < 0) fail(errc::invalid_argument, "scenario: negative noise count");
  if (scenario.responses < 3 || scenario.responses % 3 != 0)
    fail(errc::invalid_argument, "scenario: response count must be a positive multiple of 3");

  Rng rng(Rng::mix(scenario.seed, replicate_seed, 0xda7a5e7ull));
  const int n = scenario.n;
  const int noise_cont = scenario.noise / 2 + scenario.noise % 2;
  const int noise_ord = scenario.noise / 2;
  const int p = kInformativePredictors + scenario.noise;
  const int r_count = scenario.responses;
  const int per_kind = r_count / 3;

  double scores[4];
  quartile_scores(scores);

  SyntheticData out;
  out.data.n_rows = n;
  out.true_support.assign(p, 0);
  for (int j = 0; j < kInformativePredictors; ++j) out.true_support[j] = 1;

  Matrix phi(n, p);  // population-standardized values driving the truth
  auto add_continuous = [&](const std::string& name) {
    Column col;
    col.schema = make_schema(name, Role::Predictor, VariableKind::Numeric);
    col.numeric.resize(n);
    int j = static_cast<int>(out.data.predictors.size());
    for (int i = 0; i < n; ++i) {
      double z = rng.normal();
      col.numeric[i] = z;
      phi(i, j) = z;
    }
    out.data.predictors.push_back(std::move(col));
  };
  auto add_binary = [&](const std::string& name) {
    Column col;
    col.schema = make_schema(name, Role::Predictor, VariableKind::Binary);
    col.category.resize(n);
    int j = static_cast<int>(out.data.predictors.size());
    for (int i = 0; i < n; ++i) {
      bool one = rng.uniform() < 0.5;
      col.category[i] = one ? 2 : 1;
      phi(i, j) = one ? 1.0 : -1.0;
    }
    out.data.predictors.push_back(std::move(col));
  };
  auto add_ordinal = [&](const std::string& name) {
    Column col;
    col.schema = make_schema(name, Role::Predictor, VariableKind::Ordinal);
    col.category.resize(n);
    int j = static_cast<int>(out.data.predictors.size());
    for (int i = 0; i < n; ++i) {
      int c = quartile_category(rng.normal());
      col.category[i] = c;
      phi(i, j) = scores[c - 1];
    }
    out.data.predictors.push_back(std::move(col));
  };

  for (int j = 1; j <= 5; ++j) add_continuous("inf_num_" + std::to_string(j));
  for (int j = 1; j <= 3; ++j) add_binary("inf_bin_" + std::to_string(j));
  for (int j = 1; j <= 2; ++j) add_ordinal("inf_ord_" + std::to_string(j));
  for (int j = 1; j <= noise_cont; ++j) add_continuous("noise_num_" + std::to_string(j));
  for (int j = 1; j <= noise_ord; ++j) add_ordinal("noise_ord_" + std::to_string(j));

  Matrix b_true = Matrix::Zero(p, kTrueRank);
  for (int j = 0; j < kInformativePredictors; ++j)
    for (int k = 0; k < kTrueRank; ++k) {
      double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      b_true(j, k) = sign * (0.5 + 0.5 * rng.uniform());
    }
  Matrix v_raw(r_count, kTrueRank);
  for (int i = 0; i < r_count; ++i)
    for (int k = 0; k < kTrueRank; ++k) v_raw(i, k) = rng.normal();
  Matrix v_true = Eigen::HouseholderQR<Matrix>(v_raw).householderQ() *
                  Matrix::Identity(r_count, kTrueRank);
  out.A_true = b_true * v_true.transpose();

  Matrix theta = phi * out.A_true;
  const double t_ord[3] = {-2.0, 0.0, 2.0};
  for (int kind_block = 0; kind_block < 3; ++kind_block) {
    for (int idx = 1; idx <= per_kind; ++idx) {
      int r = kind_block * per_kind + idx - 1;
      Column col;
      if (kind_block == 0) {
        col.schema = make_schema("y_num_" + std::to_string(idx), Role::Response,
                                 VariableKind::Numeric);
        col.numeric.resize(n);
        for (int i = 0; i < n; ++i) col.numeric[i] = theta(i, r) + rng.normal();
      } else if (kind_block == 1) {
        col.schema = make_schema("y_bin_" + std::to_string(idx), Role::Response,
                                 VariableKind::Binary);
        col.category.resize(n);
        for (int i = 0; i < n; ++i)
          col.category[i] = rng.uniform() < sigmoid(theta(i, r)) ? 2 : 1;
      } else {
        col.schema = make_schema("y_ord_" + std::to_string(idx), Role::Response,
                                 VariableKind::Ordinal);
        col.category.resize(n);
        for (int i = 0; i < n; ++i) {
          double u = rng.uniform();
          int c = 1;
          for (double t : t_ord)
            if (u > sigmoid(t - theta(i, r))) ++c;
          col.category[i] = c;
        }
      }
      out.data.responses.push_back(std::move(col));
    }
  }
  return out;
}

SelectionMetrics selection_metrics(const Matrix& B_hat, const std::vector<char>& true_support,
                                   double threshold) {
  if (B_hat.rows() != static_cast<int>(true_support.size()))
    fail(errc::dimension_mismatch, "selection_metrics: support length mismatch");
  if (!(threshold > 0.0)) fail(errc::invalid_argument, "selection_metrics: threshold must be > 0");
  SelectionMetrics m;
  for (int j = 0; j < B_hat.rows(); ++j) {
    bool selected = B_hat.row(j).cwiseAbs().maxCoeff() > threshold;
    if (true_support[j]) {
      if (selected) ++m.tp;
      else ++m.fn;
    } else if (selected) {
      ++m.fp;
    }
  }
  m.tdr = (m.tp + m.fn) ? double(m.tp) / (m.tp + m.fn) : 0.0;
  m.fdr = (m.tp + m.fp) ? double(m.fp) / (m.tp + m.fp) : 0.0;
  return m;
}

SelectionMetrics selection_metrics_for_kind(const Matrix& B_hat,
                                            const std::vector<char>& true_support,
                                            const std::vector<VariableSchema>& predictors,
                                            VariableKind kind, double threshold) {
  if (B_hat.rows() != static_cast<int>(predictors.size()))
    fail(errc::dimension_mismatch, "selection_metrics_for_kind: schema length mismatch");
  std::vector<int> keep;
  for (int j = 0; j < B_hat.rows(); ++j)
    if (predictors[j].kind == kind) keep.push_back(j);
  Matrix sub(keep.size(), B_hat.cols());
  std::vector<char> sup(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    sub.row(i) = B_hat.row(keep[i]);
    sup[i] = true_support[keep[i]];
  }
  return selection_metrics(sub, sup, threshold);
}

namespace {

std::string level_label(double k) {
  if (k == std::floor(k)) return std::to_string(static_cast<int>(k)) + "se";
  std::string s = format_double(k);
  return s + "se";
}

struct ReplicateRow {
  bool ok = false;
  std::vector<double> lambda;                // per level
  std::vector<SelectionMetrics> overall;     // per level
  std::vector<SelectionMetrics> numeric;     // per level
  std::vector<SelectionMetrics> binary;
  std::vector<SelectionMetrics> ordinal;
};

}  // namespace

StudySummary run_study(const StudyConfig& config, const std::string& out_dir) {
  if (config.scenarios.empty()) fail(errc::invalid_argument, "study has no scenarios");
  if (config.lambdas.empty()) fail(errc::invalid_argument, "study has no lambda grid");
  std::vector<std::string> levels{"min"};
  for (double k : config.ks) levels.push_back(level_label(k));
  const int n_levels = static_cast<int>(levels.size());

  StudySummary summary;
  std::vector<std::vector<std::string>> csv_rows{
      {"n", "noise", "responses", "replicate", "level", "lambda", "tdr", "fdr", "tp", "fp", "fn",
       "tdr_numeric", "fdr_numeric", "tdr_binary", "fdr_binary", "tdr_ordinal", "fdr_ordinal"}};

  for (const Scenario& sc : config.scenarios) {
    std::vector<ReplicateRow> rows(sc.replications);
    parallel_for(sc.replications, config.workers, [&](int rep) {
      ReplicateRow& row = rows[rep];
      try {
        SyntheticData synth = generate_dataset(sc, static_cast<std::uint64_t>(rep));
        CVConfig cv;
        cv.ranks = {config.rank};
        cv.lambdas = config.lambdas;
        cv.kind = PenaltyKind::GroupLasso;
        cv.base.lambda2 = config.ridge;
        cv.folds = config.folds;
        cv.seed = Rng::mix(sc.seed, rep, 0xcfull);
        cv.workers = 1;  // replicates already run in parallel
        cv.fit = config.fit;
        CVGrid grid = cross_validate(synth.data, cv);
        SelectionResult sel = select_models(grid, config.ks);

        std::vector<double> chosen{sel.lambda_min};
        for (const auto& pick : sel.kse) chosen.push_back(pick.lambda);
        for (std::size_t lev = 0; lev < chosen.size(); ++lev) {
          FitConfig fc = config.fit;
          fc.rank = config.rank;
          fc.penalty = with_grid_value(cv.base, PenaltyKind::GroupLasso, chosen[lev]);
          fc.seed = Rng::mix(sc.seed, rep, 0xf17ull, lev);
          ModelFit full = fit(synth.data, fc);
          row.lambda.push_back(chosen[lev]);
          row.overall.push_back(
              selection_metrics(full.B, synth.true_support, sc.selection_threshold));
          row.numeric.push_back(selection_metrics_for_kind(full.B, synth.true_support,
                                                           full.predictors, VariableKind::Numeric,
                                                           sc.selection_threshold));
          row.binary.push_back(selection_metrics_for_kind(full.B, synth.true_support,
                                                          full.predictors, VariableKind::Binary,
                                                          sc.selection_threshold));
          row.ordinal.push_back(selection_metrics_for_kind(full.B, synth.true_support,
                                                           full.predictors, VariableKind::Ordinal,
                                                           sc.selection_threshold));
        }
        row.ok = true;
      } catch (const Error&) {
        row.ok = false;  // counted below, excluded from aggregates
      }
    });

    ScenarioSummary ss;
    ss.scenario = sc;
    for (int lev = 0; lev < n_levels; ++lev) {
      LevelSummary ls;
      ls.level = levels[lev];
      std::vector<double> tdrs, fdrs;
      for (const auto& row : rows) {
        if (!row.ok) continue;
        tdrs.push_back(row.overall[lev].tdr);
        fdrs.push_back(row.overall[lev].fdr);
      }
      auto mean_sd = [](const std::vector<double>& xs, double* mean, double* sd) {
        *mean = 0.0;
        *sd = 0.0;
        if (xs.empty()) return;
        for (double x : xs) *mean += x;
        *mean /= xs.size();
        if (xs.size() < 2) return;
        double ss2 = 0.0;
        for (double x : xs) ss2 += (x - *mean) * (x - *mean);
        *sd = std::sqrt(ss2 / (xs.size() - 1));
      };
      mean_sd(tdrs, &ls.mean_tdr, &ls.sd_tdr);
      mean_sd(fdrs, &ls.mean_fdr, &ls.sd_fdr);
      ss.levels.push_back(ls);
    }
    for (const auto& row : rows)
      if (!row.ok) ++ss.failed_replicates;
    summary.scenarios.push_back(ss);

    for (int rep = 0; rep < sc.replications; ++rep) {
      const ReplicateRow& row = rows[rep];
      if (!row.ok) continue;
      for (int lev = 0; lev < n_levels; ++lev) {
        const SelectionMetrics& o = row.overall[lev];
        csv_rows.push_back({std::to_string(sc.n), std::to_string(sc.noise),
                            std::to_string(sc.responses), std::to_string(rep), levels[lev],
                            format_double(row.lambda[lev]), format_double(o.tdr),
                            format_double(o.fdr), std::to_string(o.tp), std::to_string(o.fp),
                            std::to_string(o.fn), format_double(row.numeric[lev].tdr),
                            format_double(row.numeric[lev].fdr),
                            format_double(row.binary[lev].tdr),
                            format_double(row.binary[lev].fdr),
                            format_double(row.ordinal[lev].tdr),
                            format_double(row.ordinal[lev].fdr)});
      }
    }
  }

  if (!out_dir.empty()) {
    write_csv(out_dir + "/study_replicates.csv", csv_rows);
    nlohmann::ordered_json j;
    nlohmann::ordered_json scenarios = nlohmann::ordered_json::array();
    for (const auto& ss : summary.scenarios) {
      nlohmann::ordered_json e;
      e["n"] = ss.scenario.n;
      e["noise"] = ss.scenario.noise;
      e["responses"] = ss.scenario.responses;
      e["replications"] = ss.scenario.replications;
      e["seed"] = ss.scenario.seed;
      e["failed_replicates"] = ss.failed_replicates;
      nlohmann::ordered_json lv = nlohmann::ordered_json::array();
      for (const auto& ls : ss.levels) {
        nlohmann::ordered_json l;
        l["level"] = ls.level;
        l["mean_tdr"] = ls.mean_tdr;
        l["sd_tdr"] = ls.sd_tdr;
        l["mean_fdr"] = ls.mean_fdr;
        l["sd_fdr"] = ls.sd_fdr;
        lv.push_back(std::move(l));
      }
      e["levels"] = std::move(lv);
      scenarios.push_back(std::move(e));
    }
    j["scenarios"] = std::move(scenarios);
    write_text_file(out_dir + "/study_summary.json", j.dump(2) + "\n");
  }
  return summary;
}

}  // namespace rrmix
