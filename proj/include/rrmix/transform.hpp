#pragma once

#include <Eigen/Core>
#include <vector>

#include "rrmix/dataset.hpp"
#include "rrmix/rng.hpp"
#include "rrmix/types.hpp"

namespace rrmix {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// z-score with sample variance (denominator N-1); throws ConstantColumn
Vector standardize_numeric(const std::vector<double>& x);

// N x C 0/1 membership matrix; categories are 1-based indices
struct IndicatorMatrix {
  Matrix G;
  Vector counts() const { return G.colwise().sum(); }
  int n_rows() const { return static_cast<int>(G.rows()); }
  int n_categories() const { return static_cast<int>(G.cols()); }
};

IndicatorMatrix build_indicator(const std::vector<int>& category, int n_categories);

// column of quantified values G w
Vector apply_quantification(const IndicatorMatrix& G, const Vector& w);

// affine-rescales w so that G w has mean 0 and sample variance 1 over the
// rows of G; throws DegenerateQuantification when that variance is zero
Vector rescale_quantification(const Vector& w, const IndicatorMatrix& G);

// Fitted preprocessing for one predictor. Discrete kinds carry one
// quantification value per schema category plus an observed-in-training
// mask; categories never seen in training transform to 0 (their stored w is
// a monotonicity-preserving placeholder, not an estimate).
struct PredictorTransform {
  VariableKind kind = VariableKind::Numeric;
  double mean = 0.0;  // numeric
  double sd = 1.0;
  Vector w;  // discrete: per category
  std::vector<char> observed;
  bool frozen = false;  // fewer than 2 observed categories: column pinned to 0

  bool monotone() const { return kind == VariableKind::Ordinal; }
};

struct TransformSet {
  std::vector<PredictorTransform> items;
};

// Training-time construction: numeric mean/sd from the data; ordinal and
// binary start at standardized category ranks, nominal at standardized
// seeded normals.
TransformSet initial_transforms(const MixedDataset& data, Rng& rng);

// Applies fitted transforms to (new) data; counts category hits that were
// unobserved in training when `unseen` is given, else such hits throw
// UnknownCategory.
Matrix apply_transforms(const TransformSet& t, const MixedDataset& data, int* unseen = nullptr);

// Stores a quantification given per observed category (in category order),
// refreshing the placeholders of unobserved categories.
void set_quantification(PredictorTransform& t, const Vector& w_observed);

}  // namespace rrmix
