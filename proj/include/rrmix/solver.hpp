#pragma once

#include <cstdint>
#include <vector>

#include "rrmix/dataset.hpp"
#include "rrmix/likelihood.hpp"
#include "rrmix/penalty.hpp"
#include "rrmix/transform.hpp"

namespace rrmix {

struct FitConfig {
  int rank = 1;
  PenaltySpec penalty;
  int max_iters = 2000;
  double rel_tolerance = 1e-8;  // stop when (L_prev - L) / (|L_prev| + 1) < tol
  int threshold_update_period = 1;
  double sigma2_floor = 1e-8;
  double hard_zero_threshold = 1e-8;  // |b| below this stored as exact zero
  std::uint64_t seed = 1;
};

struct FitWarnings {
  int frozen_predictors = 0;           // discrete predictor with < 2 observed categories
  int merged_response_categories = 0;  // empty ordinal response categories folded away
  int inert_responses = 0;             // ordinal response with a single observed category
  int rejected_quantification_steps = 0;
  int rejected_sigma2_steps = 0;
  int rejected_threshold_steps = 0;
  int degenerate_loadings_updates = 0;  // V kept because the cross-product collapsed
};

struct ModelFit {
  std::vector<VariableSchema> predictors;
  std::vector<VariableSchema> responses;
  TransformSet transforms;
  Matrix B;  // P x S
  Matrix V;  // R x S, orthonormal columns
  Vector m;  // R intercepts; 0 for ordinal responses
  double sigma2 = 1.0;
  bool has_numeric_response = false;
  std::vector<Vector> thresholds;  // per response, original category scale; empty unless ordinal
  std::vector<double> trace;       // penalized NLL per outer iteration, trace[0] = initial
  int iterations = 0;
  bool converged = false;
  FitConfig config;
  FitWarnings warnings;

  Matrix implied_coefficients() const { return B * V.transpose(); }  // P x R
};

// Block updates of the majorized objective
// (kappa/2) ||Z - 1m' - Phi B V'||_F^2 + vec(B)' D vec(B) + const.
// All are exact minimizers over their block; fit() composes them.

// Solves (kappa I_S (x) Phi'Phi + 2 diag(vec D)) vec(B) = kappa vec(Phi' Ztilde V).
// The system is block-diagonal, so it reduces to S independent P x P solves;
// past kDenseSolveLimit columns a matrix-free conjugate-gradient path is used.
Matrix update_B(const Matrix& phi, const Matrix& ztilde, const Matrix& V, const Matrix& D,
                double kappa);
inline constexpr int kDenseSolveLimit = 2048;

// Orthonormal Procrustes: with Ztilde' Phi B = U Sigma W', returns U W'.
// Throws DegenerateSVD when Sigma has (numerically) zero entries.
Matrix update_V(const Matrix& phi, const Matrix& ztilde, const Matrix& B);

// Column means of Z - Phi B V' for numeric/binary responses, 0 for ordinal.
Vector update_intercepts(const Matrix& Z, const Matrix& phi_bvt,
                         const std::vector<VariableKind>& kinds);

// sum(E^2) / (E.size() - 1), floored; E holds numeric-response residuals.
double update_sigma2(const Matrix& E, double floor_value);

// Candidate quantification for one discrete predictor: per-category weighted
// LS solve against M = Ztilde - Phi_(-p) A_(-p), isotonic projection with
// weights counts * ||a_p||^2 when monotone, rescale to mean 0 / variance 1.
// Every category of G must be observed (counts > 0).
Vector update_quantification(const IndicatorMatrix& G, const Vector& a_p, const Matrix& M,
                             bool monotone);

// Minimizes the cumulative-logit NLL over strictly increasing thresholds at
// fixed theta (safeguarded-Newton coordinate descent to gradient norm 1e-8,
// warm-started at t0). Every category 1..n_categories must be observed.
Vector update_thresholds(const Vector& theta, const std::vector<int>& category, int n_categories,
                         const Vector& t0);

ModelFit fit(const MixedDataset& data, const FitConfig& config);
ModelFit fit(const MixedDataset& data, const FitConfig& config, const ModelFit* warm_start);

struct Predictions {
  Matrix theta;
  // numeric: theta; binary: P(y=1); ordinal: predicted category (1-based)
  Matrix value;
  std::vector<Matrix> ordinal_probs;  // per response (N x C), empty unless ordinal
  int unseen_categories = 0;
};

Predictions predict(const ModelFit& fit, const MixedDataset& data);

// Mean per-observation NLL summed over responses (the CV loss).
double mean_heldout_nll(const ModelFit& fit, const MixedDataset& data, int* unseen = nullptr);

namespace detail {

// Empty ordinal response categories merge into the category below (the first
// category merges upward). Returns the 1-based compressed index per original
// category; compressed indices run 1..#observed-groups.
std::vector<int> merged_category_map(const std::vector<int>& counts);

// Expands thresholds estimated on the merged scale back to the original
// scale: boundaries internal to a merged group hug the group's upper
// boundary from below (leading group: 10 units below the scale), keeping the
// full vector strictly increasing while giving empty categories ~zero mass.
Vector expand_merged_thresholds(const std::vector<int>& counts, const Vector& t_compressed);

}  // namespace detail

}  // namespace rrmix
