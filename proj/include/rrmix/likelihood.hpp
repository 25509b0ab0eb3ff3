#pragma once

#include <Eigen/Core>
#include <vector>

#include "rrmix/types.hpp"

namespace rrmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kProbFloor = 1e-12;

double sigmoid(double x);
double softplus(double x);  // log(1 + e^x), overflow-safe
double logit(double p);

// Theta = 1 m' + Phi B V'
Matrix canonical_params(const Matrix& phi, const Matrix& B, const Matrix& V, const Vector& m);

// Response columns carry numeric values, 0/1 for binary, or 1..C category
// indices for ordinal. Losses are negative log-likelihoods.
//
// The ordinal model is cumulative-logit: pi_c = sigmoid(t_c - theta) -
// sigmoid(t_{c-1} - theta) with t_0 = -inf, t_C = +inf. Per observation the
// exact NLL has the numerically stable form
//   softplus(theta - t_c) + softplus(t_{c-1} - theta) - log(1 - e^{-(t_c - t_{c-1})})
// (one-sided terms for the extreme categories), finite for all finite theta.
double numeric_nll(double y, double theta, double sigma2);
double binary_nll(double y, double theta);
double ordinal_nll(double theta, int category, const Vector& t);

double numeric_gradient(double y, double theta, double sigma2);
double binary_gradient(double y, double theta);
double ordinal_gradient(double theta, int category, const Vector& t);

// column loss: sum over observations (numeric includes n * log sqrt(2 pi sigma2))
double response_loss(VariableKind kind, const Vector& y, const Vector& theta, double sigma2,
                     const Vector& thresholds);

double total_loss(const Matrix& Y, const std::vector<VariableKind>& kinds, const Matrix& theta,
                  double sigma2, const std::vector<Vector>& thresholds);

Vector loss_gradient(VariableKind kind, const Vector& y, const Vector& theta, double sigma2,
                     const Vector& thresholds);

Matrix loss_gradients(const Matrix& Y, const std::vector<VariableKind>& kinds,
                      const Matrix& theta, double sigma2, const std::vector<Vector>& thresholds);

// Tightest uniform curvature bound of the per-entry NLL in theta:
// numeric 1/sigma2, binary 1/4, ordinal 1/2 (a cumulative-logit middle
// category has curvature sigmoid'(theta - t_c) + sigmoid'(theta - t_{c-1}),
// which approaches 1/2 as adjacent thresholds close up; 1/4 only bounds the
// extreme categories).
double curvature_bound(VariableKind kind, double sigma2);

// shared majorization constant kappa* across all responses present
double working_curvature(const std::vector<VariableKind>& kinds, double sigma2);

// Z = Theta - Xi / kappa
Matrix working_response(const Matrix& theta, const Matrix& xi, double kappa);

// floored at kProbFloor and renormalized; sums to 1 within 1e-12
Vector ordinal_category_probs(double theta, const Vector& t);

// interval rule: category c when t_{c-1} <= theta < t_c; exact threshold
// hits go to the upper category
int predict_ordinal_category(double theta, const Vector& t);

// held-out per-observation NLL summed over responses (ordinal terms use the
// floored probabilities, capping the contribution of categories the fitted
// model considers impossible)
double observation_nll(const std::vector<VariableKind>& kinds, const Eigen::RowVectorXd& y,
                       const Eigen::RowVectorXd& theta, double sigma2,
                       const std::vector<Vector>& thresholds);

}  // namespace rrmix
