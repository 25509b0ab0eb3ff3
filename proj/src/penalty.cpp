#include "rrmix/penalty.hpp"

#include <algorithm>
#include <cmath>

namespace rrmix {

void PenaltySpec::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
    fail(errc::invalid_penalty, "penalty weights must be non-negative");
  if (lambda1 > 0.0 && lambda3 > 0.0)
    fail(errc::invalid_penalty, "lasso and group lasso cannot be combined");
  if (!(epsilon > 0.0)) fail(errc::invalid_penalty, "penalty epsilon must be positive");
}

double penalty_value(const Matrix& B, const PenaltySpec& spec) {
  spec.validate();
  double value = 0.0;
  if (spec.lambda1 > 0.0) value += spec.lambda1 * B.cwiseAbs().sum();
  if (spec.lambda2 > 0.0) value += spec.lambda2 * B.squaredNorm();
  if (spec.lambda3 > 0.0) value += spec.lambda3 * B.rowwise().norm().sum();
  return value;
}

namespace {
double huber(double u, double eps) {
  return u >= eps ? u : 0.5 * u * u / eps + 0.5 * eps;  // u >= 0
}
}  // namespace

double penalty_value_smoothed(const Matrix& B, const PenaltySpec& spec) {
  spec.validate();
  double value = 0.0;
  if (spec.lambda1 > 0.0)
    for (int j = 0; j < B.cols(); ++j)
      for (int i = 0; i < B.rows(); ++i)
        value += spec.lambda1 * huber(std::abs(B(i, j)), spec.epsilon);
  if (spec.lambda2 > 0.0) value += spec.lambda2 * B.squaredNorm();
  if (spec.lambda3 > 0.0)
    for (int i = 0; i < B.rows(); ++i)
      value += spec.lambda3 * huber(B.row(i).norm(), spec.epsilon);
  return value;
}

Matrix majorization_diagonal(const Matrix& B0, const PenaltySpec& spec) {
  spec.validate();
  Matrix d = Matrix::Constant(B0.rows(), B0.cols(), spec.lambda2);
  if (spec.lambda1 > 0.0)
    d += (0.5 * spec.lambda1) * B0.cwiseAbs().cwiseMax(spec.epsilon).cwiseInverse();
  if (spec.lambda3 > 0.0) {
    for (int i = 0; i < B0.rows(); ++i)
      d.row(i).array() += 0.5 * spec.lambda3 / std::max(B0.row(i).norm(), spec.epsilon);
  }
  return d;
}

}  // namespace rrmix
