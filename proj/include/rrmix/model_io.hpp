#pragma once

#include <string>
#include <vector>

#include "rrmix/solver.hpp"

namespace rrmix {

inline constexpr const char* kToolName = "rrmix";
inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kModelFormatVersion = 1;

// Doubles survive the JSON round trip bit for bit (shortest-round-trip
// formatting), so a reloaded model predicts identically.
std::string model_to_json(const ModelFit& fit);
ModelFit model_from_json(const std::string& json_text);
void save_model(const ModelFit& fit, const std::string& path);
ModelFit load_model(const std::string& path);

// CSV artifacts of a fit, written under out_dir:
//   coefficients.csv          predictor x dimension entries of B
//   loadings.csv              response x dimension entries of V
//   intercepts.csv            per-response intercept (and sigma2 for numeric)
//   thresholds.csv            ordinal response cutpoints
//   implied_coefficients.csv  B V', predictor x response
//   quantifications.csv       category scores per discrete predictor
//   trace.csv                 penalized NLL per iteration
std::vector<std::string> write_fit_artifacts(const ModelFit& fit, const std::string& out_dir);

// manifest.json: tool name/version, the command, its configuration echo and
// the produced files. Deliberately carries no timestamps so reruns are
// byte-identical.
void write_manifest(const std::string& out_dir, const std::string& command,
                    const std::string& config_json, const std::vector<std::string>& outputs);

std::string ensure_dir(const std::string& path);  // creates, returns path

}  // namespace rrmix
