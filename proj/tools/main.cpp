#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "rrmix/cross_validation.hpp"
#include "rrmix/csv.hpp"
#include "rrmix/model_io.hpp"
#include "rrmix/simulation.hpp"
#include "rrmix/solver.hpp"

namespace {

using rrmix::fail;
using json = nlohmann::ordered_json;

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    std::string item = text.substr(pos, comma == std::string::npos ? comma : comma - pos);
    if (item.empty()) fail(rrmix::errc::invalid_argument, std::string(what) + ": empty entry");
    char* end = nullptr;
    double v = std::strtod(item.c_str(), &end);
    if (end != item.c_str() + item.size())
      fail(rrmix::errc::invalid_argument, std::string(what) + ": bad number '" + item + "'");
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::vector<double> parse_grid(const std::string& text) {
  // "lo:hi:step" or a comma-separated list
  if (text.find(':') == std::string::npos) return parse_double_list(text, "--grid");
  double lo, hi, step;
  if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &lo, &hi, &step) != 3)
    fail(rrmix::errc::invalid_argument, "--grid: expected lo:hi:step");
  return rrmix::make_grid(lo, hi, step);
}

json penalty_json(const rrmix::PenaltySpec& p) {
  json j;
  j["lambda1"] = p.lambda1;
  j["lambda2"] = p.lambda2;
  j["lambda3"] = p.lambda3;
  j["epsilon"] = p.epsilon;
  return j;
}

struct FitFlags {
  std::string data, schema, out;
  int rank = 1;
  double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0;
  int max_iters = 2000;
  double tol = 1e-8;
  int threshold_period = 1;
  std::uint64_t seed = 1;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--data", f.data, "input CSV")->required();
  cmd->add_option("--schema", f.schema, "schema JSON")->required();
  cmd->add_option("--out", f.out, "output directory")->required();
  cmd->add_option("--rank", f.rank, "number of latent dimensions");
  cmd->add_option("--lambda1", f.lambda1, "lasso strength");
  cmd->add_option("--lambda2", f.lambda2, "ridge strength");
  cmd->add_option("--lambda3", f.lambda3, "group-lasso strength");
  cmd->add_option("--max-iters", f.max_iters, "iteration cap");
  cmd->add_option("--tol", f.tol, "relative objective tolerance");
  cmd->add_option("--threshold-period", f.threshold_period,
                  "update ordinal thresholds every this many iterations");
  cmd->add_option("--seed", f.seed, "random seed");
}

int cmd_fit(const FitFlags& f) {
  rrmix::MixedDataset data = rrmix::load_dataset(f.data, f.schema);
  rrmix::FitConfig fc;
  fc.rank = f.rank;
  fc.penalty.lambda1 = f.lambda1;
  fc.penalty.lambda2 = f.lambda2;
  fc.penalty.lambda3 = f.lambda3;
  fc.max_iters = f.max_iters;
  fc.rel_tolerance = f.tol;
  fc.threshold_update_period = f.threshold_period;
  fc.seed = f.seed;
  rrmix::ModelFit fit = rrmix::fit(data, fc);
  rrmix::ensure_dir(f.out);
  std::vector<std::string> outputs = rrmix::write_fit_artifacts(fit, f.out);
  json cfg;
  cfg["data"] = f.data;
  cfg["schema"] = f.schema;
  cfg["rank"] = f.rank;
  cfg["penalty"] = penalty_json(fc.penalty);
  cfg["max_iters"] = f.max_iters;
  cfg["tol"] = f.tol;
  cfg["threshold_period"] = f.threshold_period;
  cfg["seed"] = f.seed;
  rrmix::write_manifest(f.out, "fit", cfg.dump(), outputs);
  std::printf("fit: %s after %d iterations, objective %.10g\n",
              fit.converged ? "converged" : "iteration cap reached", fit.iterations,
              fit.trace.back());
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& data_path,
                const std::string& out_dir) {
  rrmix::ModelFit fit = rrmix::load_model(model_path);
  rrmix::CsvTable table = rrmix::read_csv_file(data_path);
  rrmix::MixedDataset data = rrmix::bind_dataset(table, fit.predictors, false);
  rrmix::Predictions pred = rrmix::predict(fit, data);

  rrmix::ensure_dir(out_dir);
  std::vector<std::string> header{"row"};
  for (std::size_t r = 0; r < fit.responses.size(); ++r) {
    const auto& v = fit.responses[r];
    header.push_back("theta_" + v.name);
    switch (v.kind) {
      case rrmix::VariableKind::Numeric: header.push_back("value_" + v.name); break;
      case rrmix::VariableKind::Binary: header.push_back("prob_" + v.name); break;
      case rrmix::VariableKind::Ordinal:
        header.push_back("category_" + v.name);
        for (const std::string& c : v.categories) header.push_back("prob_" + v.name + "_" + c);
        break;
      default: break;
    }
  }
  std::vector<std::vector<std::string>> rows{header};
  for (int i = 0; i < data.n_rows; ++i) {
    std::vector<std::string> row{std::to_string(i)};
    for (std::size_t r = 0; r < fit.responses.size(); ++r) {
      row.push_back(rrmix::format_double(pred.theta(i, r)));
      if (fit.responses[r].kind == rrmix::VariableKind::Ordinal) {
        row.push_back(std::to_string(static_cast<int>(pred.value(i, r))));
        for (int c = 0; c < pred.ordinal_probs[r].cols(); ++c)
          row.push_back(rrmix::format_double(pred.ordinal_probs[r](i, c)));
      } else {
        row.push_back(rrmix::format_double(pred.value(i, r)));
      }
    }
    rows.push_back(std::move(row));
  }
  rrmix::write_csv(out_dir + "/predictions.csv", rows);
  json cfg;
  cfg["model"] = model_path;
  cfg["data"] = data_path;
  rrmix::write_manifest(out_dir, "predict", cfg.dump(), {"predictions.csv"});
  std::printf("predict: %d rows, %d unseen category hits\n", data.n_rows, pred.unseen_categories);
  return 0;
}

struct CvFlags {
  std::string data, schema, out;
  std::string ranks = "1";
  std::string grid = "0:100:0.5";
  std::string penalty = "group-lasso";
  std::string k_levels = "1,2,3";
  double ridge = 0.01;
  int folds = 10;
  int workers = 0;
  int max_iters = 2000;
  double tol = 1e-8;
  std::uint64_t seed = 1;
};

int cmd_cv(const CvFlags& f) {
  rrmix::MixedDataset data = rrmix::load_dataset(f.data, f.schema);
  rrmix::CVConfig cv;
  for (double r : parse_double_list(f.ranks, "--ranks")) {
    if (r != std::floor(r) || r < 1)
      fail(rrmix::errc::invalid_argument, "--ranks: entries must be positive integers");
    cv.ranks.push_back(static_cast<int>(r));
  }
  cv.lambdas = parse_grid(f.grid);
  cv.kind = rrmix::penalty_kind_from_name(f.penalty);
  if (cv.kind != rrmix::PenaltyKind::Ridge) cv.base.lambda2 = f.ridge;
  cv.folds = f.folds;
  cv.seed = f.seed;
  cv.workers = f.workers;
  cv.fit.max_iters = f.max_iters;
  cv.fit.rel_tolerance = f.tol;
  std::vector<double> ks = parse_double_list(f.k_levels, "--k-levels");

  rrmix::CVGrid grid = rrmix::cross_validate(data, cv);
  rrmix::SelectionResult sel = rrmix::select_models(grid, ks);
  rrmix::ensure_dir(f.out);
  std::vector<std::string> outputs = rrmix::write_cv_artifacts(grid, sel, f.out);
  json cfg;
  cfg["data"] = f.data;
  cfg["schema"] = f.schema;
  cfg["ranks"] = cv.ranks;
  cfg["grid"] = f.grid;
  cfg["penalty"] = f.penalty;
  cfg["ridge"] = f.ridge;
  cfg["folds"] = f.folds;
  cfg["k_levels"] = f.k_levels;
  cfg["seed"] = f.seed;
  cfg["workers"] = f.workers;
  rrmix::write_manifest(f.out, "cv", cfg.dump(), outputs);
  std::printf("cv: rank %d, lambda_min %.6g, APE %.6g (SE %.3g)\n", sel.s_star, sel.lambda_min,
              sel.cv_min, sel.se_min);
  return 0;
}

struct SimFlags {
  std::string config, out;
  int n = 500, noise = 10, responses = 6, replicates = 20;
  std::string grid = "0:100:2.5";
  std::string k_levels = "1,2,3";
  double threshold = 0.01;
  double ridge = 0.01;
  int rank = 2;
  int folds = 5;
  int workers = 0;
  std::uint64_t seed = 1;
};

int cmd_simulate(const SimFlags& f) {
  rrmix::StudyConfig study;
  json cfg;
  if (!f.config.empty()) {
    json j = json::parse(rrmix::read_text_file(f.config));
    for (const auto& s : j.at("scenarios")) {
      rrmix::Scenario sc;
      sc.n = s.at("n").get<int>();
      sc.noise = s.at("noise").get<int>();
      sc.responses = s.at("responses").get<int>();
      sc.replications = s.value("replications", f.replicates);
      sc.seed = s.value("seed", f.seed);
      sc.selection_threshold = s.value("threshold", f.threshold);
      study.scenarios.push_back(sc);
    }
    study.lambdas = parse_grid(j.value("grid", f.grid));
    study.ridge = j.value("ridge", f.ridge);
    if (j.contains("ks")) study.ks = j["ks"].get<std::vector<double>>();
    study.folds = j.value("folds", f.folds);
    study.rank = j.value("rank", f.rank);
    cfg["config_file"] = f.config;
    cfg["config"] = j;
  } else {
    rrmix::Scenario sc;
    sc.n = f.n;
    sc.noise = f.noise;
    sc.responses = f.responses;
    sc.replications = f.replicates;
    sc.seed = f.seed;
    sc.selection_threshold = f.threshold;
    study.scenarios.push_back(sc);
    study.lambdas = parse_grid(f.grid);
    study.ridge = f.ridge;
    study.ks = parse_double_list(f.k_levels, "--k-levels");
    study.folds = f.folds;
    study.rank = f.rank;
    cfg["n"] = f.n;
    cfg["noise"] = f.noise;
    cfg["responses"] = f.responses;
    cfg["replicates"] = f.replicates;
    cfg["grid"] = f.grid;
    cfg["k_levels"] = f.k_levels;
    cfg["threshold"] = f.threshold;
    cfg["ridge"] = f.ridge;
    cfg["rank"] = f.rank;
    cfg["folds"] = f.folds;
    cfg["seed"] = f.seed;
  }
  study.workers = f.workers;

  rrmix::ensure_dir(f.out);
  rrmix::StudySummary summary = rrmix::run_study(study, f.out);
  rrmix::write_manifest(f.out, "simulate", cfg.dump(),
                        {"study_replicates.csv", "study_summary.json"});
  for (const auto& ss : summary.scenarios) {
    std::printf("simulate: n=%d noise=%d R=%d (%d replicates, %d failed)\n", ss.scenario.n,
                ss.scenario.noise, ss.scenario.responses, ss.scenario.replications,
                ss.failed_replicates);
    for (const auto& ls : ss.levels)
      std::printf("  %-4s TDR %.3f (%.3f)  FDR %.3f (%.3f)\n", ls.level.c_str(), ls.mean_tdr,
                  ls.sd_tdr, ls.mean_fdr, ls.sd_fdr);
  }
  return 0;
}

int cmd_report(const std::string& model_path, const std::string& out_dir) {
  rrmix::ModelFit fit = rrmix::load_model(model_path);
  const int p = static_cast<int>(fit.predictors.size());
  int active = 0;
  for (int j = 0; j < p; ++j)
    if (fit.B.row(j).cwiseAbs().maxCoeff() > 0.0) ++active;
  std::printf("model: rank %d, %d predictors (%d active), %zu responses\n",
              static_cast<int>(fit.B.cols()), p, active, fit.responses.size());
  std::printf("penalty: lambda1=%g lambda2=%g lambda3=%g\n", fit.config.penalty.lambda1,
              fit.config.penalty.lambda2, fit.config.penalty.lambda3);
  std::printf("%s after %d iterations, final objective %.10g\n",
              fit.converged ? "converged" : "iteration cap reached", fit.iterations,
              fit.trace.empty() ? 0.0 : fit.trace.back());
  if (fit.has_numeric_response) std::printf("sigma2: %.10g\n", fit.sigma2);
  for (int j = 0; j < p; ++j) {
    double mag = fit.B.row(j).cwiseAbs().maxCoeff();
    if (mag > 0.0) std::printf("  %-24s max |b| = %.6g\n", fit.predictors[j].name.c_str(), mag);
  }
  if (!out_dir.empty()) {
    rrmix::ensure_dir(out_dir);
    std::vector<std::string> outputs = rrmix::write_fit_artifacts(fit, out_dir);
    json cfg;
    cfg["model"] = model_path;
    rrmix::write_manifest(out_dir, "report", cfg.dump(), outputs);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"penalized reduced-rank regression for mixed responses"};
  app.require_subcommand(1);

  FitFlags fit_flags;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one model");
  add_fit_flags(fit_cmd, fit_flags);

  std::string predict_model, predict_data, predict_out;
  CLI::App* predict_cmd = app.add_subcommand("predict", "apply a fitted model to new rows");
  predict_cmd->add_option("--model", predict_model, "model JSON")->required();
  predict_cmd->add_option("--data", predict_data, "input CSV (predictor columns)")->required();
  predict_cmd->add_option("--out", predict_out, "output directory")->required();

  CvFlags cv_flags;
  CLI::App* cv_cmd = app.add_subcommand("cv", "cross-validate rank and penalty");
  cv_cmd->add_option("--data", cv_flags.data, "input CSV")->required();
  cv_cmd->add_option("--schema", cv_flags.schema, "schema JSON")->required();
  cv_cmd->add_option("--out", cv_flags.out, "output directory")->required();
  cv_cmd->add_option("--ranks", cv_flags.ranks, "candidate ranks, e.g. 1,2,3");
  cv_cmd->add_option("--grid", cv_flags.grid, "lambda grid lo:hi:step or list");
  cv_cmd->add_option("--penalty", cv_flags.penalty, "lasso | ridge | group-lasso");
  cv_cmd->add_option("--ridge", cv_flags.ridge, "fixed companion ridge strength");
  cv_cmd->add_option("--folds", cv_flags.folds, "fold count");
  cv_cmd->add_option("--k-levels", cv_flags.k_levels, "kSE levels, e.g. 1,2,3");
  cv_cmd->add_option("--workers", cv_flags.workers, "worker threads (0 = all cores)");
  cv_cmd->add_option("--max-iters", cv_flags.max_iters, "iteration cap per fit");
  cv_cmd->add_option("--tol", cv_flags.tol, "relative objective tolerance");
  cv_cmd->add_option("--seed", cv_flags.seed, "random seed");

  SimFlags sim_flags;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "synthetic selection study");
  sim_cmd->add_option("--config", sim_flags.config, "study config JSON (scenario list)");
  sim_cmd->add_option("--out", sim_flags.out, "output directory")->required();
  sim_cmd->add_option("--n", sim_flags.n, "sample size");
  sim_cmd->add_option("--noise", sim_flags.noise, "uninformative predictor count");
  sim_cmd->add_option("--responses", sim_flags.responses, "response count (multiple of 3)");
  sim_cmd->add_option("--replicates", sim_flags.replicates, "replication count");
  sim_cmd->add_option("--grid", sim_flags.grid, "group-lasso grid lo:hi:step");
  sim_cmd->add_option("--k-levels", sim_flags.k_levels, "kSE levels");
  sim_cmd->add_option("--threshold", sim_flags.threshold, "selection threshold on |b|");
  sim_cmd->add_option("--ridge", sim_flags.ridge, "fixed companion ridge strength");
  sim_cmd->add_option("--rank", sim_flags.rank, "fitted rank");
  sim_cmd->add_option("--folds", sim_flags.folds, "fold count");
  sim_cmd->add_option("--workers", sim_flags.workers, "worker threads (0 = all cores)");
  sim_cmd->add_option("--seed", sim_flags.seed, "random seed");

  std::string report_model, report_out;
  CLI::App* report_cmd = app.add_subcommand("report", "summarize a fitted model");
  report_cmd->add_option("--model", report_model, "model JSON")->required();
  report_cmd->add_option("--out", report_out, "re-emit CSV artifacts here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);  // --help and friends
  } catch (const CLI::ParseError& e) {
    json err;
    err["error"]["code"] = rrmix::errc::invalid_argument;
    err["error"]["message"] = e.what();
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 2;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_flags);
    if (predict_cmd->parsed()) return cmd_predict(predict_model, predict_data, predict_out);
    if (cv_cmd->parsed()) return cmd_cv(cv_flags);
    if (sim_cmd->parsed()) return cmd_simulate(sim_flags);
    if (report_cmd->parsed()) return cmd_report(report_model, report_out);
  } catch (const rrmix::Error& e) {
    json err;
    err["error"]["code"] = e.code();
    err["error"]["message"] = e.what();
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return rrmix::is_input_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    json err;
    err["error"]["code"] = "InternalError";
    err["error"]["message"] = e.what();
    std::fprintf(stderr, "%s\n", err.dump().c_str());
    return 1;
  }
  return 0;
}
