#pragma once

#include <Eigen/Core>

#include "rrmix/types.hpp"

namespace rrmix {

using Vector = Eigen::VectorXd;

// Weighted least-squares projection onto the non-decreasing cone:
// argmin sum_i w_i (x_i - v_i)^2 subject to x_1 <= ... <= x_n, all w_i > 0.
// Pool-adjacent-violators; the solution is blockwise weighted means.
Vector isotonic_fit(const Vector& v, const Vector& w);

}  // namespace rrmix
