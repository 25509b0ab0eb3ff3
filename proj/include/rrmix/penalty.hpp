#pragma once

#include <Eigen/Core>

#include "rrmix/types.hpp"

namespace rrmix {

using Matrix = Eigen::MatrixXd;

// P(B) = lambda1 * sum|b_ps| + lambda2 * sum b_ps^2 + lambda3 * sum_p ||b_p.||_2.
// lambda1 (elementwise lasso) and lambda3 (row-wise group lasso) are
// mutually exclusive; lambda2 may accompany either.
struct PenaltySpec {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  double epsilon = 1e-10;  // guard for 1/|b| and 1/||row|| near zero

  void validate() const;
  bool active() const { return lambda1 > 0.0 || lambda2 > 0.0 || lambda3 > 0.0; }
};

// exact penalty value
double penalty_value(const Matrix& B, const PenaltySpec& spec);

// Value with |.| and ||.|| epsilon-Huberized (h(u) = u^2/(2e) + e/2 below e).
// This is the objective the solver actually decreases: the guarded
// majorization diagonal below is an exact MM majorizer of the Huberized
// penalty but not of the raw one. Differs from penalty_value by at most
// lambda * epsilon / 2 per coefficient/row.
double penalty_value_smoothed(const Matrix& B, const PenaltySpec& spec);

// Diagonal of the quadratic penalty majorizer at B0, arranged like B:
// d_ps = (lambda1/2) / max(|b0_ps|, eps) + lambda2 + (lambda3/2) / max(||b0_p.||, eps),
// so that vec(B)' D vec(B) + const majorizes the (Huberized) penalty with
// equality at B0.
Matrix majorization_diagonal(const Matrix& B0, const PenaltySpec& spec);

}  // namespace rrmix
