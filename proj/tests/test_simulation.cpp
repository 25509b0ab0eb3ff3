#include <cmath>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "rrmix/model_io.hpp"
#include "rrmix/simulation.hpp"

using namespace rrmix;

TEST_CASE("generate_dataset lays out the informative block plus noise") {
  Scenario sc;
  sc.n = 200;
  sc.noise = 7;  // 4 continuous, 3 ordinal
  sc.responses = 6;
  SyntheticData d = generate_dataset(sc, 3);

  const int p = kInformativePredictors + sc.noise;
  REQUIRE(d.data.n_predictors() == p);
  REQUIRE(d.data.n_responses() == 6);
  REQUIRE(static_cast<int>(d.true_support.size()) == p);
  REQUIRE(d.A_true.rows() == p);
  REQUIRE(d.A_true.cols() == 6);
  CHECK(d.data.n_rows == 200);

  int informative = 0;
  for (int j = 0; j < p; ++j)
    if (d.true_support[j]) ++informative;
  CHECK(informative == kInformativePredictors);
  // support is exactly the leading block
  for (int j = 0; j < kInformativePredictors; ++j) CHECK(d.true_support[j] == 1);
  for (int j = kInformativePredictors; j < p; ++j) CHECK(d.true_support[j] == 0);

  // noise split: ceil(7/2) = 4 numeric, 3 ordinal
  int noise_numeric = 0, noise_ordinal = 0;
  for (int j = kInformativePredictors; j < p; ++j) {
    if (d.data.predictors[j].schema.kind == VariableKind::Numeric) ++noise_numeric;
    if (d.data.predictors[j].schema.kind == VariableKind::Ordinal) ++noise_ordinal;
  }
  CHECK(noise_numeric == 4);
  CHECK(noise_ordinal == 3);

  // informative block: 5 numeric, 3 binary, 2 ordinal with 4 levels
  int inf_numeric = 0, inf_binary = 0, inf_ordinal = 0;
  for (int j = 0; j < kInformativePredictors; ++j) {
    auto k = d.data.predictors[j].schema.kind;
    if (k == VariableKind::Numeric) ++inf_numeric;
    if (k == VariableKind::Binary) ++inf_binary;
    if (k == VariableKind::Ordinal) {
      ++inf_ordinal;
      CHECK(d.data.predictors[j].schema.n_categories() == 4);
    }
  }
  CHECK(inf_numeric == 5);
  CHECK(inf_binary == 3);
  CHECK(inf_ordinal == 2);

  // responses in balanced thirds
  int rn = 0, rb = 0, ro = 0;
  for (const auto& col : d.data.responses) {
    if (col.schema.kind == VariableKind::Numeric) ++rn;
    if (col.schema.kind == VariableKind::Binary) ++rb;
    if (col.schema.kind == VariableKind::Ordinal) ++ro;
  }
  CHECK(rn == 2);
  CHECK(rb == 2);
  CHECK(ro == 2);

  // noise rows of the true coefficient matrix are zero, informative are not
  for (int j = 0; j < p; ++j) {
    double row_max = d.A_true.row(j).cwiseAbs().maxCoeff();
    if (d.true_support[j]) CHECK(row_max > 0.0);
    else CHECK(row_max == 0.0);
  }
}

TEST_CASE("true coefficients have rank 2 structure") {
  Scenario sc;
  sc.n = 50;
  SyntheticData d = generate_dataset(sc, 8);
  Eigen::JacobiSVD<Matrix> svd(d.A_true);
  const auto& s = svd.singularValues();
  REQUIRE(s.size() >= 3);
  CHECK(s(0) > 0.0);
  CHECK(s(1) > 1e-8);
  CHECK(s(2) < 1e-10 * s(0));
}

TEST_CASE("generate_dataset is reproducible and varies by replicate seed") {
  Scenario sc;
  sc.n = 40;
  SyntheticData a = generate_dataset(sc, 5);
  SyntheticData b = generate_dataset(sc, 5);
  SyntheticData c = generate_dataset(sc, 6);
  CHECK(a.data.predictors[0].numeric == b.data.predictors[0].numeric);
  CHECK(a.data.responses[0].numeric == b.data.responses[0].numeric);
  CHECK(a.data.predictors[0].numeric != c.data.predictors[0].numeric);
}

TEST_CASE("informative ordinal predictors hit quartile frequencies") {
  Scenario sc;
  sc.n = 4000;
  SyntheticData d = generate_dataset(sc, 12);
  for (int j = 0; j < kInformativePredictors; ++j) {
    const Column& col = d.data.predictors[j];
    if (col.schema.kind != VariableKind::Ordinal) continue;
    Vector counts = Vector::Zero(4);
    for (int v : col.category) counts[v - 1] += 1.0;
    for (int c = 0; c < 4; ++c) CHECK(counts[c] / sc.n == doctest::Approx(0.25).epsilon(0.08));
  }
}

TEST_CASE("noise predictors are uncorrelated with the signal") {
  Scenario sc;
  sc.n = 1500;
  sc.noise = 4;
  SyntheticData d = generate_dataset(sc, 21);
  // signal proxy: theta of the first numeric response equals A_true scores
  Vector theta = Vector::Zero(sc.n);
  {
    Matrix phi(sc.n, d.data.n_predictors());
    for (int j = 0; j < d.data.n_predictors(); ++j) {
      const Column& col = d.data.predictors[j];
      for (int i = 0; i < sc.n; ++i)
        phi(i, j) = col.schema.kind == VariableKind::Numeric ? col.numeric[i] : 0.0;
    }
    // continuous informative part is enough signal for the check
    theta = phi.leftCols(5) * d.A_true.topRows(5).col(0);
  }
  double st = std::sqrt(theta.squaredNorm() / sc.n);
  for (int j = kInformativePredictors; j < d.data.n_predictors(); ++j) {
    const Column& col = d.data.predictors[j];
    Vector x(sc.n);
    for (int i = 0; i < sc.n; ++i)
      x(i) = col.schema.kind == VariableKind::Numeric ? col.numeric[i] : col.category[i];
    double mx = x.mean();
    x.array() -= mx;
    double corr = x.dot(theta) / (sc.n * std::sqrt(x.squaredNorm() / sc.n) * st);
    CHECK(std::abs(corr) < 0.1);
  }
}

TEST_CASE("selection_metrics computes TDR and FDR from the support") {
  std::vector<char> support = {1, 1, 1, 0, 0};

  Matrix perfect = Matrix::Zero(5, 2);
  perfect(0, 0) = 0.5;
  perfect(1, 1) = -0.3;
  perfect(2, 0) = 0.02;
  SelectionMetrics m = selection_metrics(perfect, support, 0.01);
  CHECK(m.tp == 3);
  CHECK(m.fp == 0);
  CHECK(m.fn == 0);
  CHECK(m.tdr == doctest::Approx(1.0));
  CHECK(m.fdr == doctest::Approx(0.0));

  Matrix nothing = Matrix::Zero(5, 2);
  m = selection_metrics(nothing, support, 0.01);
  CHECK(m.tp == 0);
  CHECK(m.fn == 3);
  CHECK(m.tdr == doctest::Approx(0.0));
  CHECK(m.fdr == doctest::Approx(0.0));  // empty selection: FDR defined as 0

  Matrix mixed = Matrix::Zero(5, 2);
  for (int j = 0; j < 5; ++j) mixed(j, 0) = 1.0;  // select everything
  m = selection_metrics(mixed, support, 0.01);
  CHECK(m.tp == 3);
  CHECK(m.fp == 2);
  CHECK(m.tdr == doctest::Approx(1.0));
  CHECK(m.fdr == doctest::Approx(2.0 / 5.0));

  // threshold is strict: |b| must exceed it
  Matrix edge = Matrix::Zero(5, 2);
  edge(0, 0) = 0.01;
  m = selection_metrics(edge, support, 0.01);
  CHECK(m.tp == 0);
}

TEST_CASE("selection_metrics_for_kind restricts the universe to one predictor kind") {
  auto var = [](const std::string& name, VariableKind kind, int cats) {
    VariableSchema v;
    v.name = name;
    v.role = Role::Predictor;
    v.kind = kind;
    for (int c = 1; c <= cats; ++c) v.categories.push_back(std::to_string(c));
    return v;
  };
  std::vector<VariableSchema> preds = {var("a", VariableKind::Numeric, 0),
                                       var("b", VariableKind::Ordinal, 4),
                                       var("c", VariableKind::Numeric, 0),
                                       var("d", VariableKind::Ordinal, 4)};
  std::vector<char> support = {1, 1, 0, 0};
  Matrix b_hat = Matrix::Zero(4, 1);
  b_hat(0, 0) = 0.5;  // numeric TP
  b_hat(3, 0) = 0.5;  // ordinal FP

  SelectionMetrics mn = selection_metrics_for_kind(b_hat, support, preds,
                                                   VariableKind::Numeric, 0.01);
  CHECK(mn.tp == 1);
  CHECK(mn.fp == 0);
  CHECK(mn.fn == 0);
  CHECK(mn.tdr == doctest::Approx(1.0));

  SelectionMetrics mo = selection_metrics_for_kind(b_hat, support, preds,
                                                   VariableKind::Ordinal, 0.01);
  CHECK(mo.tp == 0);
  CHECK(mo.fp == 1);
  CHECK(mo.fn == 1);
  CHECK(mo.tdr == doctest::Approx(0.0));
  CHECK(mo.fdr == doctest::Approx(1.0));
}

TEST_CASE("run_study on a desk-size scenario is deterministic and sane") {
  StudyConfig cfg;
  Scenario sc;
  sc.n = 150;
  sc.noise = 4;
  sc.responses = 3;
  sc.replications = 2;
  sc.seed = 31;
  cfg.scenarios = {sc};
  cfg.lambdas = {0.0, 5.0, 20.0};
  cfg.ks = {1.0};
  cfg.folds = 3;
  cfg.rank = 2;
  cfg.workers = 2;
  cfg.fit.max_iters = 300;

  auto dir = std::filesystem::temp_directory_path() / "rrmix_study_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  StudySummary s1 = run_study(cfg, dir.string());
  REQUIRE(s1.scenarios.size() == 1);
  REQUIRE(s1.scenarios[0].levels.size() == 2);  // min + 1se
  CHECK(s1.scenarios[0].levels[0].level == "min");
  CHECK(s1.scenarios[0].levels[1].level == "1se");
  for (const auto& lev : s1.scenarios[0].levels) {
    CHECK(lev.mean_tdr >= 0.0);
    CHECK(lev.mean_tdr <= 1.0);
    CHECK(lev.mean_fdr >= 0.0);
    CHECK(lev.mean_fdr <= 1.0);
  }
  CHECK(std::filesystem::exists(dir / "study_replicates.csv"));
  CHECK(std::filesystem::exists(dir / "study_summary.json"));

  // byte-identical artifacts on a rerun with a different worker count
  std::string rep1 = read_text_file((dir / "study_replicates.csv").string());
  std::string sum1 = read_text_file((dir / "study_summary.json").string());
  cfg.workers = 1;
  run_study(cfg, dir.string());
  CHECK(read_text_file((dir / "study_replicates.csv").string()) == rep1);
  CHECK(read_text_file((dir / "study_summary.json").string()) == sum1);
  std::filesystem::remove_all(dir);
}

TEST_CASE("scenario response counts must be positive multiples of three") {
  Scenario sc;
  sc.responses = 4;
  CHECK_THROWS_AS(generate_dataset(sc, 1), Error);
  sc.responses = 0;
  CHECK_THROWS_AS(generate_dataset(sc, 1), Error);
}
