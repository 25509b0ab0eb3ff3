#pragma once

#include <string>
#include <vector>

#include "rrmix/dataset.hpp"
#include "rrmix/likelihood.hpp"
#include "rrmix/rng.hpp"

namespace test_helpers {

inline rrmix::VariableSchema make_var(const std::string& name, rrmix::Role role,
                                      rrmix::VariableKind kind, int n_categories = 0) {
  rrmix::VariableSchema v;
  v.name = name;
  v.role = role;
  v.kind = kind;
  for (int c = 1; c <= n_categories; ++c) v.categories.push_back(std::to_string(c));
  return v;
}

struct DatasetShape {
  int n = 100;
  int numeric_predictors = 3;
  int binary_predictors = 1;
  int nominal_predictors = 1;
  int ordinal_predictors = 2;
  int numeric_responses = 2;
  int binary_responses = 1;
  int ordinal_responses = 1;
  int categories = 4;
};

// Random mixed dataset with a planted low-rank signal so fits have something
// to find. Deterministic in the seed.
inline rrmix::MixedDataset random_mixed_dataset(const DatasetShape& shape, std::uint64_t seed) {
  using namespace rrmix;
  Rng rng(Rng::mix(seed, 0x7e57da7aull));
  const int n = shape.n;
  const int p = shape.numeric_predictors + shape.binary_predictors + shape.nominal_predictors +
                shape.ordinal_predictors;

  MixedDataset data;
  data.n_rows = n;
  Matrix phi(n, p);
  int j = 0;
  for (int k = 0; k < shape.numeric_predictors; ++k, ++j) {
    Column col;
    col.schema = make_var("xn" + std::to_string(k), Role::Predictor, VariableKind::Numeric);
    col.numeric.resize(n);
    for (int i = 0; i < n; ++i) {
      col.numeric[i] = rng.normal();
      phi(i, j) = col.numeric[i];
    }
    data.predictors.push_back(std::move(col));
  }
  for (int k = 0; k < shape.binary_predictors; ++k, ++j) {
    Column col;
    col.schema = make_var("xb" + std::to_string(k), Role::Predictor, VariableKind::Binary, 2);
    col.category.resize(n);
    for (int i = 0; i < n; ++i) {
      col.category[i] = rng.uniform() < 0.5 ? 1 : 2;
      phi(i, j) = col.category[i] == 2 ? 1.0 : -1.0;
    }
    data.predictors.push_back(std::move(col));
  }
  for (int k = 0; k < shape.nominal_predictors; ++k, ++j) {
    Column col;
    col.schema = make_var("xc" + std::to_string(k), Role::Predictor, VariableKind::Nominal,
                          shape.categories);
    col.category.resize(n);
    for (int i = 0; i < n; ++i) {
      col.category[i] = 1 + static_cast<int>(rng.below(shape.categories));
      phi(i, j) = col.category[i] - 0.5 * (shape.categories + 1);
    }
    data.predictors.push_back(std::move(col));
  }
  for (int k = 0; k < shape.ordinal_predictors; ++k, ++j) {
    Column col;
    col.schema = make_var("xo" + std::to_string(k), Role::Predictor, VariableKind::Ordinal,
                          shape.categories);
    col.category.resize(n);
    for (int i = 0; i < n; ++i) {
      col.category[i] = 1 + static_cast<int>(rng.below(shape.categories));
      phi(i, j) = col.category[i] - 0.5 * (shape.categories + 1);
    }
    data.predictors.push_back(std::move(col));
  }

  const int r = shape.numeric_responses + shape.binary_responses + shape.ordinal_responses;
  Matrix a(p, r);
  for (int jj = 0; jj < p; ++jj)
    for (int rr = 0; rr < r; ++rr) a(jj, rr) = 0.4 * rng.normal();
  Matrix theta = phi * a;

  int rr = 0;
  for (int k = 0; k < shape.numeric_responses; ++k, ++rr) {
    Column col;
    col.schema = make_var("yn" + std::to_string(k), Role::Response, VariableKind::Numeric);
    col.numeric.resize(n);
    for (int i = 0; i < n; ++i) col.numeric[i] = theta(i, rr) + 0.7 * rng.normal();
    data.responses.push_back(std::move(col));
  }
  for (int k = 0; k < shape.binary_responses; ++k, ++rr) {
    Column col;
    col.schema = make_var("yb" + std::to_string(k), Role::Response, VariableKind::Binary, 2);
    col.category.resize(n);
    for (int i = 0; i < n; ++i)
      col.category[i] = rng.uniform() < sigmoid(theta(i, rr)) ? 2 : 1;
    data.responses.push_back(std::move(col));
  }
  for (int k = 0; k < shape.ordinal_responses; ++k, ++rr) {
    Column col;
    col.schema = make_var("yo" + std::to_string(k), Role::Response, VariableKind::Ordinal,
                          shape.categories);
    col.category.resize(n);
    for (int i = 0; i < n; ++i) {
      double u = rng.uniform();
      int c = 1;
      for (int t = 1; t < shape.categories; ++t)
        if (u > sigmoid(-1.5 + 1.5 * (t - 1) - theta(i, rr))) ++c;
      col.category[i] = c;
    }
    data.responses.push_back(std::move(col));
  }
  return data;
}

}  // namespace test_helpers
