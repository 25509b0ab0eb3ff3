#include "rrmix/model_io.hpp"

#include <filesystem>
#include <nlohmann/json.hpp>

#include "rrmix/csv.hpp"

namespace rrmix {

using json = nlohmann::ordered_json;

namespace {

json vector_to_json(const Vector& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Vector vector_from_json(const json& a) {
  if (!a.is_array()) fail(errc::parse_error, "model: expected a numeric array");
  Vector v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
  return v;
}

Matrix matrix_from_json(const json& a) {
  if (!a.is_array()) fail(errc::parse_error, "model: expected a matrix");
  const int rows = static_cast<int>(a.size());
  const int cols = rows ? static_cast<int>(a[0].size()) : 0;
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (static_cast<int>(a[i].size()) != cols) fail(errc::parse_error, "model: ragged matrix");
    for (int j = 0; j < cols; ++j) m(i, j) = a[i][j].get<double>();
  }
  return m;
}

json schema_entry_json(const VariableSchema& v) {
  json j;
  j["name"] = v.name;
  j["role"] = role_name(v.role);
  j["kind"] = kind_name(v.kind);
  if (!v.categories.empty()) j["categories"] = v.categories;
  return j;
}

VariableSchema schema_entry_from(const json& j) {
  VariableSchema v;
  v.name = j.at("name").get<std::string>();
  v.role = role_from_name(j.at("role").get<std::string>());
  v.kind = kind_from_name(j.at("kind").get<std::string>());
  if (j.contains("categories")) v.categories = j["categories"].get<std::vector<std::string>>();
  return v;
}

json transform_json(const PredictorTransform& t) {
  json j;
  j["kind"] = kind_name(t.kind);
  if (t.kind == VariableKind::Numeric) {
    j["mean"] = t.mean;
    j["sd"] = t.sd;
  } else {
    j["quantifications"] = vector_to_json(t.w);
    json obs = json::array();
    for (char o : t.observed) obs.push_back(o != 0);
    j["observed"] = std::move(obs);
    j["frozen"] = t.frozen;
  }
  return j;
}

PredictorTransform transform_from(const json& j) {
  PredictorTransform t;
  t.kind = kind_from_name(j.at("kind").get<std::string>());
  if (t.kind == VariableKind::Numeric) {
    t.mean = j.at("mean").get<double>();
    t.sd = j.at("sd").get<double>();
  } else {
    t.w = vector_from_json(j.at("quantifications"));
    for (const auto& o : j.at("observed")) t.observed.push_back(o.get<bool>() ? 1 : 0);
    t.frozen = j.at("frozen").get<bool>();
    if (static_cast<int>(t.observed.size()) != t.w.size())
      fail(errc::parse_error, "model: observed mask and quantification length differ");
  }
  return t;
}

}  // namespace

std::string model_to_json(const ModelFit& fit) {
  json j;
  j["format_version"] = kModelFormatVersion;
  j["tool"] = kToolName;
  j["tool_version"] = kToolVersion;
  j["rank"] = fit.config.rank;
  json pen;
  pen["lambda1"] = fit.config.penalty.lambda1;
  pen["lambda2"] = fit.config.penalty.lambda2;
  pen["lambda3"] = fit.config.penalty.lambda3;
  pen["epsilon"] = fit.config.penalty.epsilon;
  j["penalty"] = std::move(pen);
  json cfg;
  cfg["max_iters"] = fit.config.max_iters;
  cfg["rel_tolerance"] = fit.config.rel_tolerance;
  cfg["threshold_update_period"] = fit.config.threshold_update_period;
  cfg["sigma2_floor"] = fit.config.sigma2_floor;
  cfg["hard_zero_threshold"] = fit.config.hard_zero_threshold;
  cfg["seed"] = fit.config.seed;
  j["config"] = std::move(cfg);

  json preds = json::array();
  for (std::size_t p = 0; p < fit.predictors.size(); ++p) {
    json e = schema_entry_json(fit.predictors[p]);
    e["transform"] = transform_json(fit.transforms.items[p]);
    preds.push_back(std::move(e));
  }
  j["predictors"] = std::move(preds);

  json resps = json::array();
  for (std::size_t r = 0; r < fit.responses.size(); ++r) {
    json e = schema_entry_json(fit.responses[r]);
    e["intercept"] = fit.m[r];
    if (fit.responses[r].kind == VariableKind::Ordinal)
      e["thresholds"] = vector_to_json(fit.thresholds[r]);
    resps.push_back(std::move(e));
  }
  j["responses"] = std::move(resps);

  j["B"] = matrix_to_json(fit.B);
  j["V"] = matrix_to_json(fit.V);
  j["sigma2"] = fit.sigma2;
  j["has_numeric_response"] = fit.has_numeric_response;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  json trace = json::array();
  for (double v : fit.trace) trace.push_back(v);
  j["trace"] = std::move(trace);
  json warn;
  warn["frozen_predictors"] = fit.warnings.frozen_predictors;
  warn["merged_response_categories"] = fit.warnings.merged_response_categories;
  warn["inert_responses"] = fit.warnings.inert_responses;
  warn["rejected_quantification_steps"] = fit.warnings.rejected_quantification_steps;
  warn["rejected_sigma2_steps"] = fit.warnings.rejected_sigma2_steps;
  warn["rejected_threshold_steps"] = fit.warnings.rejected_threshold_steps;
  warn["degenerate_loadings_updates"] = fit.warnings.degenerate_loadings_updates;
  j["warnings"] = std::move(warn);
  return j.dump(2) + "\n";
}

ModelFit model_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const std::exception& e) {
    fail(errc::parse_error, std::string("model JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("format_version"))
    fail(errc::parse_error, "model JSON: missing format_version");
  if (j["format_version"].get<int>() != kModelFormatVersion)
    fail(errc::parse_error, "model JSON: unsupported format_version");

  ModelFit fit;
  try {
    fit.config.rank = j.at("rank").get<int>();
    const json& pen = j.at("penalty");
    fit.config.penalty.lambda1 = pen.at("lambda1").get<double>();
    fit.config.penalty.lambda2 = pen.at("lambda2").get<double>();
    fit.config.penalty.lambda3 = pen.at("lambda3").get<double>();
    fit.config.penalty.epsilon = pen.at("epsilon").get<double>();
    const json& cfg = j.at("config");
    fit.config.max_iters = cfg.at("max_iters").get<int>();
    fit.config.rel_tolerance = cfg.at("rel_tolerance").get<double>();
    fit.config.threshold_update_period = cfg.at("threshold_update_period").get<int>();
    fit.config.sigma2_floor = cfg.at("sigma2_floor").get<double>();
    fit.config.hard_zero_threshold = cfg.at("hard_zero_threshold").get<double>();
    fit.config.seed = cfg.at("seed").get<std::uint64_t>();

    for (const auto& e : j.at("predictors")) {
      fit.predictors.push_back(schema_entry_from(e));
      fit.transforms.items.push_back(transform_from(e.at("transform")));
    }
    fit.thresholds.resize(j.at("responses").size());
    std::size_t r = 0;
    for (const auto& e : j.at("responses")) {
      fit.responses.push_back(schema_entry_from(e));
      fit.m.conservativeResize(static_cast<int>(r) + 1);
      fit.m[r] = e.at("intercept").get<double>();
      if (fit.responses.back().kind == VariableKind::Ordinal)
        fit.thresholds[r] = vector_from_json(e.at("thresholds"));
      ++r;
    }
    fit.B = matrix_from_json(j.at("B"));
    fit.V = matrix_from_json(j.at("V"));
    fit.sigma2 = j.at("sigma2").get<double>();
    fit.has_numeric_response = j.at("has_numeric_response").get<bool>();
    fit.iterations = j.at("iterations").get<int>();
    fit.converged = j.at("converged").get<bool>();
    for (const auto& v : j.at("trace")) fit.trace.push_back(v.get<double>());
    const json& warn = j.at("warnings");
    fit.warnings.frozen_predictors = warn.at("frozen_predictors").get<int>();
    fit.warnings.merged_response_categories = warn.at("merged_response_categories").get<int>();
    fit.warnings.inert_responses = warn.at("inert_responses").get<int>();
    fit.warnings.rejected_quantification_steps =
        warn.at("rejected_quantification_steps").get<int>();
    fit.warnings.rejected_sigma2_steps = warn.at("rejected_sigma2_steps").get<int>();
    fit.warnings.rejected_threshold_steps = warn.at("rejected_threshold_steps").get<int>();
    fit.warnings.degenerate_loadings_updates = warn.at("degenerate_loadings_updates").get<int>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    fail(errc::parse_error, std::string("model JSON: ") + e.what());
  }

  if (fit.B.rows() != static_cast<int>(fit.predictors.size()) ||
      fit.V.rows() != static_cast<int>(fit.responses.size()) || fit.B.cols() != fit.V.cols())
    fail(errc::dimension_mismatch, "model JSON: B/V shapes disagree with the schema");
  for (std::size_t r = 0; r < fit.responses.size(); ++r) {
    if (fit.responses[r].kind != VariableKind::Ordinal) continue;
    if (fit.thresholds[r].size() != fit.responses[r].n_categories() - 1)
      fail(errc::dimension_mismatch, fit.responses[r].name + ": threshold count mismatch");
  }
  return fit;
}

void save_model(const ModelFit& fit, const std::string& path) {
  write_text_file(path, model_to_json(fit));
}

ModelFit load_model(const std::string& path) { return model_from_json(read_text_file(path)); }

std::string ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) fail(errc::io_error, path + ": " + ec.message());
  return path;
}

std::vector<std::string> write_fit_artifacts(const ModelFit& fit, const std::string& out_dir) {
  ensure_dir(out_dir);
  const int p = static_cast<int>(fit.predictors.size());
  const int r_count = static_cast<int>(fit.responses.size());
  const int s = static_cast<int>(fit.B.cols());
  std::vector<std::string> outputs;
  auto path = [&](const std::string& name) {
    outputs.push_back(name);
    return out_dir + "/" + name;
  };

  {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"predictor"};
    for (int k = 1; k <= s; ++k) header.push_back("dim_" + std::to_string(k));
    rows.push_back(header);
    for (int i = 0; i < p; ++i) {
      std::vector<std::string> row{fit.predictors[i].name};
      for (int k = 0; k < s; ++k) row.push_back(format_double(fit.B(i, k)));
      rows.push_back(std::move(row));
    }
    write_csv(path("coefficients.csv"), rows);
  }
  {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"response"};
    for (int k = 1; k <= s; ++k) header.push_back("dim_" + std::to_string(k));
    rows.push_back(header);
    for (int i = 0; i < r_count; ++i) {
      std::vector<std::string> row{fit.responses[i].name};
      for (int k = 0; k < s; ++k) row.push_back(format_double(fit.V(i, k)));
      rows.push_back(std::move(row));
    }
    write_csv(path("loadings.csv"), rows);
  }
  {
    std::vector<std::vector<std::string>> rows{{"response", "kind", "intercept"}};
    for (int i = 0; i < r_count; ++i)
      rows.push_back(
          {fit.responses[i].name, kind_name(fit.responses[i].kind), format_double(fit.m[i])});
    rows.push_back({"(shared)", "sigma2", format_double(fit.sigma2)});
    write_csv(path("intercepts.csv"), rows);
  }
  {
    std::vector<std::vector<std::string>> rows{{"response", "boundary", "threshold"}};
    for (int i = 0; i < r_count; ++i) {
      if (fit.responses[i].kind != VariableKind::Ordinal) continue;
      for (int t = 0; t < fit.thresholds[i].size(); ++t)
        rows.push_back({fit.responses[i].name, std::to_string(t + 1),
                        format_double(fit.thresholds[i][t])});
    }
    write_csv(path("thresholds.csv"), rows);
  }
  {
    Matrix A = fit.implied_coefficients();
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"predictor"};
    for (int j = 0; j < r_count; ++j) header.push_back(fit.responses[j].name);
    rows.push_back(header);
    for (int i = 0; i < p; ++i) {
      std::vector<std::string> row{fit.predictors[i].name};
      for (int j = 0; j < r_count; ++j) row.push_back(format_double(A(i, j)));
      rows.push_back(std::move(row));
    }
    write_csv(path("implied_coefficients.csv"), rows);
  }
  {
    std::vector<std::vector<std::string>> rows{
        {"predictor", "category", "quantification", "observed", "frozen"}};
    for (int i = 0; i < p; ++i) {
      const PredictorTransform& t = fit.transforms.items[i];
      if (t.kind == VariableKind::Numeric) continue;
      for (int c = 0; c < t.w.size(); ++c)
        rows.push_back({fit.predictors[i].name, fit.predictors[i].categories[c],
                        format_double(t.w[c]), t.observed[c] ? "1" : "0", t.frozen ? "1" : "0"});
    }
    write_csv(path("quantifications.csv"), rows);
  }
  {
    std::vector<std::vector<std::string>> rows{{"iteration", "objective"}};
    for (std::size_t i = 0; i < fit.trace.size(); ++i)
      rows.push_back({std::to_string(i), format_double(fit.trace[i])});
    write_csv(path("trace.csv"), rows);
  }
  save_model(fit, path("model.json"));
  return outputs;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_json, const std::vector<std::string>& outputs) {
  json j;
  j["tool"] = kToolName;
  j["tool_version"] = kToolVersion;
  j["command"] = command;
  j["config"] = json::parse(config_json);
  j["outputs"] = outputs;
  write_text_file(out_dir + "/manifest.json", j.dump(2) + "\n");
}

}  // namespace rrmix
