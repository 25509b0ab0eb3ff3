#include "rrmix/likelihood.hpp"

#include <algorithm>
#include <cmath>

namespace rrmix {

namespace {
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

void check_ordinal(int category, const Vector& t) {
  const int c_max = static_cast<int>(t.size()) + 1;
  if (category < 1 || category > c_max)
    fail(errc::unknown_category,
         "ordinal category " + std::to_string(category) + " outside 1.." + std::to_string(c_max));
}
}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double logit(double p) { return std::log(p) - std::log1p(-p); }

Matrix canonical_params(const Matrix& phi, const Matrix& B, const Matrix& V, const Vector& m) {
  if (phi.cols() != B.rows() || B.cols() != V.cols() || V.rows() != m.size())
    fail(errc::dimension_mismatch, "canonical_params: incompatible shapes");
  Matrix theta = phi * B * V.transpose();
  theta.rowwise() += m.transpose();
  return theta;
}

double numeric_nll(double y, double theta, double sigma2) {
  double e = y - theta;
  return 0.5 * e * e / sigma2 + 0.5 * (kLog2Pi + std::log(sigma2));
}

double binary_nll(double y, double theta) {
  double q = 2.0 * y - 1.0;
  return softplus(-q * theta);
}

double ordinal_nll(double theta, int category, const Vector& t) {
  check_ordinal(category, t);
  const int c_max = static_cast<int>(t.size()) + 1;
  if (category == 1) return softplus(theta - t[0]);
  if (category == c_max) return softplus(t[c_max - 2] - theta);
  double gap = t[category - 1] - t[category - 2];
  return softplus(theta - t[category - 1]) + softplus(t[category - 2] - theta) -
         std::log1p(-std::exp(-gap));
}

double numeric_gradient(double y, double theta, double sigma2) { return (theta - y) / sigma2; }

double binary_gradient(double y, double theta) { return sigmoid(theta) - y; }

double ordinal_gradient(double theta, int category, const Vector& t) {
  check_ordinal(category, t);
  const int c_max = static_cast<int>(t.size()) + 1;
  double upper = category == c_max ? 0.0 : sigmoid(theta - t[category - 1]);
  double lower = category == 1 ? 1.0 : sigmoid(theta - t[category - 2]);
  return upper + lower - 1.0;
}

double response_loss(VariableKind kind, const Vector& y, const Vector& theta, double sigma2,
                     const Vector& thresholds) {
  if (y.size() != theta.size()) fail(errc::dimension_mismatch, "response_loss: length mismatch");
  const int n = static_cast<int>(y.size());
  double loss = 0.0;
  switch (kind) {
    case VariableKind::Numeric:
      loss = 0.5 * (y - theta).squaredNorm() / sigma2 + 0.5 * n * (kLog2Pi + std::log(sigma2));
      break;
    case VariableKind::Binary:
      for (int i = 0; i < n; ++i) loss += binary_nll(y[i], theta[i]);
      break;
    case VariableKind::Ordinal:
      for (int i = 0; i < n; ++i)
        loss += ordinal_nll(theta[i], static_cast<int>(y[i]), thresholds);
      break;
    case VariableKind::Nominal:
      fail(errc::invalid_family, "nominal responses are not supported");
  }
  return loss;
}

double total_loss(const Matrix& Y, const std::vector<VariableKind>& kinds, const Matrix& theta,
                  double sigma2, const std::vector<Vector>& thresholds) {
  double loss = 0.0;
  for (int r = 0; r < Y.cols(); ++r)
    loss += response_loss(kinds[r], Y.col(r), theta.col(r), sigma2, thresholds[r]);
  return loss;
}

Vector loss_gradient(VariableKind kind, const Vector& y, const Vector& theta, double sigma2,
                     const Vector& thresholds) {
  if (y.size() != theta.size()) fail(errc::dimension_mismatch, "loss_gradient: length mismatch");
  const int n = static_cast<int>(y.size());
  Vector g(n);
  switch (kind) {
    case VariableKind::Numeric:
      g = (theta - y) / sigma2;
      break;
    case VariableKind::Binary:
      for (int i = 0; i < n; ++i) g[i] = binary_gradient(y[i], theta[i]);
      break;
    case VariableKind::Ordinal:
      for (int i = 0; i < n; ++i)
        g[i] = ordinal_gradient(theta[i], static_cast<int>(y[i]), thresholds);
      break;
    case VariableKind::Nominal:
      fail(errc::invalid_family, "nominal responses are not supported");
  }
  return g;
}

Matrix loss_gradients(const Matrix& Y, const std::vector<VariableKind>& kinds,
                      const Matrix& theta, double sigma2, const std::vector<Vector>& thresholds) {
  Matrix xi(Y.rows(), Y.cols());
  for (int r = 0; r < Y.cols(); ++r)
    xi.col(r) = loss_gradient(kinds[r], Y.col(r), theta.col(r), sigma2, thresholds[r]);
  return xi;
}

double curvature_bound(VariableKind kind, double sigma2) {
  switch (kind) {
    case VariableKind::Numeric: return 1.0 / sigma2;
    case VariableKind::Binary: return 0.25;
    case VariableKind::Ordinal: return 0.5;
    case VariableKind::Nominal: break;
  }
  fail(errc::invalid_family, "nominal responses are not supported");
}

double working_curvature(const std::vector<VariableKind>& kinds, double sigma2) {
  bool any_ordinal = false, any_numeric = false;
  for (auto k : kinds) {
    if (k == VariableKind::Ordinal) any_ordinal = true;
    if (k == VariableKind::Numeric) any_numeric = true;
  }
  double kappa = any_ordinal ? 0.5 : 0.25;
  if (any_numeric) kappa = std::max(kappa, 1.0 / sigma2);
  return kappa;
}

Matrix working_response(const Matrix& theta, const Matrix& xi, double kappa) {
  if (theta.rows() != xi.rows() || theta.cols() != xi.cols())
    fail(errc::dimension_mismatch, "working_response: shape mismatch");
  if (!(kappa > 0.0)) fail(errc::invalid_argument, "working_response: kappa must be positive");
  return theta - xi / kappa;
}

Vector ordinal_category_probs(double theta, const Vector& t) {
  const int c_max = static_cast<int>(t.size()) + 1;
  if (c_max < 2) fail(errc::invalid_argument, "ordinal needs >= 1 threshold");
  Vector p(c_max);
  double prev = 0.0;
  for (int c = 0; c < c_max - 1; ++c) {
    double cur = sigmoid(t[c] - theta);
    p[c] = cur - prev;
    prev = cur;
  }
  p[c_max - 1] = 1.0 - prev;
  // Floor, renormalize, re-floor: entries stay >= kProbFloor and the sum
  // lands within ~c_max^2 * floor^2 of 1, far inside 1e-12.
  p = p.cwiseMax(kProbFloor);
  p /= p.sum();
  return p.cwiseMax(kProbFloor);
}

int predict_ordinal_category(double theta, const Vector& t) {
  int c = 1;
  for (int j = 0; j < t.size(); ++j)
    if (t[j] <= theta) ++c;
  return c;
}

double observation_nll(const std::vector<VariableKind>& kinds, const Eigen::RowVectorXd& y,
                       const Eigen::RowVectorXd& theta, double sigma2,
                       const std::vector<Vector>& thresholds) {
  double nll = 0.0;
  for (int r = 0; r < y.size(); ++r) {
    switch (kinds[r]) {
      case VariableKind::Numeric:
        nll += numeric_nll(y[r], theta[r], sigma2);
        break;
      case VariableKind::Binary:
        nll += binary_nll(y[r], theta[r]);
        break;
      case VariableKind::Ordinal: {
        Vector p = ordinal_category_probs(theta[r], thresholds[r]);
        nll += -std::log(p[static_cast<int>(y[r]) - 1]);
        break;
      }
      case VariableKind::Nominal:
        fail(errc::invalid_family, "nominal responses are not supported");
    }
  }
  return nll;
}

}  // namespace rrmix
