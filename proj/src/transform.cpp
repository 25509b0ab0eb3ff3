#include "rrmix/transform.hpp"

#include <algorithm>
#include <cmath>

namespace rrmix {

Vector standardize_numeric(const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  if (n < 2) fail(errc::invalid_argument, "standardize_numeric needs >= 2 values");
  Vector v = Eigen::Map<const Vector>(x.data(), n);
  double mean = v.mean();
  double ss = (v.array() - mean).square().sum();
  double var = ss / (n - 1);
  if (var <= 0.0) fail(errc::constant_column, "constant numeric column");
  return (v.array() - mean) / std::sqrt(var);
}

IndicatorMatrix build_indicator(const std::vector<int>& category, int n_categories) {
  const int n = static_cast<int>(category.size());
  if (n_categories < 1) fail(errc::invalid_argument, "indicator needs >= 1 category");
  IndicatorMatrix out;
  out.G = Matrix::Zero(n, n_categories);
  for (int i = 0; i < n; ++i) {
    int c = category[i];
    if (c < 1 || c > n_categories)
      fail(errc::unknown_category,
           "category index " + std::to_string(c) + " outside 1.." + std::to_string(n_categories));
    out.G(i, c - 1) = 1.0;
  }
  return out;
}

Vector apply_quantification(const IndicatorMatrix& G, const Vector& w) {
  if (G.n_categories() != w.size())
    fail(errc::dimension_mismatch, "quantification length " + std::to_string(w.size()) +
                                       " vs " + std::to_string(G.n_categories()) + " categories");
  return G.G * w;
}

Vector rescale_quantification(const Vector& w, const IndicatorMatrix& G) {
  const int n = G.n_rows();
  if (n < 2) fail(errc::invalid_argument, "rescale needs >= 2 rows");
  Vector counts = G.counts();
  if (counts.size() != w.size())
    fail(errc::dimension_mismatch, "quantification/indicator size mismatch");
  double mean = counts.dot(w) / n;
  double ss = (counts.array() * (w.array() - mean).square()).sum();
  double var = ss / (n - 1);
  if (var <= 0.0) fail(errc::degenerate_quantification, "quantified column has zero variance");
  return (w.array() - mean) / std::sqrt(var);
}

namespace {

// counts over observed data; zero-count schema categories stay zero
Vector category_counts(const std::vector<int>& category, int n_categories) {
  Vector counts = Vector::Zero(n_categories);
  for (int c : category) counts[c - 1] += 1.0;
  return counts;
}

// rescale against explicit counts (avoids materializing G for init paths)
Vector rescale_with_counts(const Vector& w, const Vector& counts, int n) {
  double mean = counts.dot(w) / n;
  double ss = (counts.array() * (w.array() - mean).square()).sum();
  double var = ss / (n - 1);
  if (var <= 0.0) fail(errc::degenerate_quantification, "quantified column has zero variance");
  return (w.array() - mean) / std::sqrt(var);
}

// Placeholder values for categories with no training rows: carry the nearest
// observed value from below (from above for a leading gap). Keeps stored
// ordinal quantifications non-decreasing; transforms of such categories use
// 0 regardless.
void fill_unobserved(Vector& w, const std::vector<char>& observed) {
  const int c = static_cast<int>(w.size());
  int first_obs = -1;
  for (int k = 0; k < c; ++k)
    if (observed[k]) {
      first_obs = k;
      break;
    }
  double last = w[first_obs];
  for (int k = 0; k < c; ++k) {
    if (observed[k]) last = w[k];
    else w[k] = (k < first_obs) ? w[first_obs] : last;
  }
}

}  // namespace

TransformSet initial_transforms(const MixedDataset& data, Rng& rng) {
  TransformSet out;
  out.items.reserve(data.predictors.size());
  const int n = data.n_rows;
  for (const auto& col : data.predictors) {
    PredictorTransform t;
    t.kind = col.schema.kind;
    if (t.kind == VariableKind::Numeric) {
      if (n < 2) fail(errc::invalid_argument, "need >= 2 rows");
      Vector v = Eigen::Map<const Vector>(col.numeric.data(), n);
      t.mean = v.mean();
      double var = (v.array() - t.mean).square().sum() / (n - 1);
      if (var <= 0.0) fail(errc::constant_column, "constant numeric column: " + col.schema.name);
      t.sd = std::sqrt(var);
    } else {
      const int c = col.schema.n_categories();
      Vector counts = category_counts(col.category, c);
      t.observed.assign(c, 0);
      int n_observed = 0;
      for (int k = 0; k < c; ++k)
        if (counts[k] > 0) {
          t.observed[k] = 1;
          ++n_observed;
        }
      Vector start(c);
      if (t.kind == VariableKind::Nominal) {
        for (int k = 0; k < c; ++k) start[k] = rng.normal();
      } else {
        for (int k = 0; k < c; ++k) start[k] = k + 1;  // category ranks
      }
      if (n_observed < 2) {
        t.w = Vector::Zero(c);
        t.frozen = true;  // single observed level: no scale, contributes 0
      } else {
        // rescale over observed categories only, then fill placeholders
        t.w = rescale_with_counts(start, counts, n);
        fill_unobserved(t.w, t.observed);
      }
    }
    out.items.push_back(std::move(t));
  }
  return out;
}

void set_quantification(PredictorTransform& t, const Vector& w_observed) {
  const int c = static_cast<int>(t.w.size());
  int pos = 0;
  for (int k = 0; k < c; ++k)
    if (t.observed[k]) t.w[k] = w_observed[pos++];
  if (pos != w_observed.size())
    fail(errc::dimension_mismatch, "set_quantification: observed-count mismatch");
  fill_unobserved(t.w, t.observed);
}

Matrix apply_transforms(const TransformSet& t, const MixedDataset& data, int* unseen) {
  const int n = data.n_rows;
  const int p = data.n_predictors();
  if (static_cast<int>(t.items.size()) != p)
    fail(errc::dimension_mismatch, "transform/predictor count mismatch");
  Matrix phi(n, p);
  for (int j = 0; j < p; ++j) {
    const Column& col = data.predictors[j];
    const PredictorTransform& tr = t.items[j];
    if (tr.kind != col.schema.kind)
      fail(errc::schema_mismatch, col.schema.name + ": kind differs from fitted transform");
    if (tr.kind == VariableKind::Numeric) {
      for (int i = 0; i < n; ++i) phi(i, j) = (col.numeric[i] - tr.mean) / tr.sd;
    } else {
      if (tr.w.size() != col.schema.n_categories())
        fail(errc::dimension_mismatch, col.schema.name + ": category count mismatch");
      for (int i = 0; i < n; ++i) {
        int c = col.category[i] - 1;
        if (!tr.frozen && !tr.observed[c]) {
          if (!unseen)
            fail(errc::unknown_category,
                 col.schema.name + ": category '" + col.schema.categories[c] +
                     "' was not observed in training");
          ++*unseen;
          phi(i, j) = 0.0;
        } else {
          phi(i, j) = tr.frozen ? 0.0 : tr.w[c];
        }
      }
    }
  }
  return phi;
}

}  // namespace rrmix
