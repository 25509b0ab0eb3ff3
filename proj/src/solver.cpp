#include "rrmix/solver.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "rrmix/isotonic.hpp"
#include "rrmix/rng.hpp"

namespace rrmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

Vector solve_cg(const Matrix& phi, const Vector& d, double kappa, const Vector& rhs) {
  const int p = static_cast<int>(phi.cols());
  Vector precond = (kappa * phi.colwise().squaredNorm().transpose().array() + 2.0 * d.array())
                       .cwiseMax(1e-300);
  auto apply = [&](const Vector& x) -> Vector {
    return kappa * (phi.transpose() * (phi * x)) + 2.0 * d.cwiseProduct(x);
  };
  Vector x = Vector::Zero(p);
  Vector r = rhs;
  Vector z = r.cwiseQuotient(precond);
  Vector q = z;
  double rz = r.dot(z);
  double target = 1e-12 * rhs.norm();
  for (int it = 0; it < 10 * p + 50; ++it) {
    if (r.norm() <= target) break;
    Vector aq = apply(q);
    double alpha = rz / q.dot(aq);
    x += alpha * q;
    r -= alpha * aq;
    z = r.cwiseQuotient(precond);
    double rz_next = r.dot(z);
    q = z + (rz_next / rz) * q;
    rz = rz_next;
  }
  return x;
}

}  // namespace

Matrix update_B(const Matrix& phi, const Matrix& ztilde, const Matrix& V, const Matrix& D,
                double kappa) {
  const int p = static_cast<int>(phi.cols());
  const int s = static_cast<int>(V.cols());
  if (ztilde.rows() != phi.rows() || ztilde.cols() != V.rows() || D.rows() != p || D.cols() != s)
    fail(errc::dimension_mismatch, "update_B: incompatible shapes");
  if (!(kappa > 0.0)) fail(errc::invalid_argument, "update_B: kappa must be positive");

  Matrix rhs = kappa * (phi.transpose() * (ztilde * V));  // P x S
  Matrix B(p, s);
  if (p <= kDenseSolveLimit) {
    Matrix gram = phi.transpose() * phi;
    for (int k = 0; k < s; ++k) {
      Matrix sys = kappa * gram;
      sys.diagonal() += 2.0 * D.col(k);
      B.col(k) = sys.ldlt().solve(rhs.col(k));
      double err = (sys * B.col(k) - rhs.col(k)).norm();
      double scale = sys.norm() * B.col(k).norm() + rhs.col(k).norm();
      if (!(err <= 1e-8 * (scale + 1e-30)) || !B.col(k).allFinite())
        fail(errc::singular_system, "update_B: normal equations are singular");
    }
  } else {
    for (int k = 0; k < s; ++k) {
      B.col(k) = solve_cg(phi, D.col(k), kappa, rhs.col(k));
      Vector err = kappa * (phi.transpose() * (phi * B.col(k))) +
                   2.0 * D.col(k).cwiseProduct(B.col(k)) - rhs.col(k);
      if (!(err.norm() <= 1e-6 * (rhs.col(k).norm() + 1e-30)) || !B.col(k).allFinite())
        fail(errc::singular_system, "update_B: conjugate gradient did not converge");
    }
  }
  return B;
}

Matrix update_V(const Matrix& phi, const Matrix& ztilde, const Matrix& B) {
  if (phi.cols() != B.rows() || ztilde.rows() != phi.rows())
    fail(errc::dimension_mismatch, "update_V: incompatible shapes");
  Matrix cross = ztilde.transpose() * (phi * B);  // R x S
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sig = svd.singularValues();
  double smax = sig.size() ? sig[0] : 0.0;
  if (!(smax > 0.0) || sig[sig.size() - 1] <= 1e-12 * smax)
    fail(errc::degenerate_svd, "update_V: cross-product has (near-)zero singular values");
  return svd.matrixU() * svd.matrixV().transpose();
}

Vector update_intercepts(const Matrix& Z, const Matrix& phi_bvt,
                         const std::vector<VariableKind>& kinds) {
  if (Z.rows() != phi_bvt.rows() || Z.cols() != phi_bvt.cols() ||
      static_cast<int>(kinds.size()) != Z.cols())
    fail(errc::dimension_mismatch, "update_intercepts: incompatible shapes");
  Vector m = Vector::Zero(Z.cols());
  for (int r = 0; r < Z.cols(); ++r)
    if (kinds[r] != VariableKind::Ordinal) m[r] = (Z.col(r) - phi_bvt.col(r)).mean();
  return m;
}

double update_sigma2(const Matrix& E, double floor_value) {
  if (E.size() < 2) fail(errc::invalid_argument, "update_sigma2: needs >= 2 residuals");
  return std::max(E.squaredNorm() / (E.size() - 1), floor_value);
}

Vector update_quantification(const IndicatorMatrix& G, const Vector& a_p, const Matrix& M,
                             bool monotone) {
  const int c = G.n_categories();
  if (M.rows() != G.n_rows() || M.cols() != a_p.size())
    fail(errc::dimension_mismatch, "update_quantification: incompatible shapes");
  double a2 = a_p.squaredNorm();
  if (!(a2 > 0.0)) fail(errc::invalid_argument, "update_quantification: zero coefficient row");
  Vector counts = G.counts();
  for (int k = 0; k < c; ++k)
    if (!(counts[k] > 0.0))
      fail(errc::invalid_argument, "update_quantification: unobserved category");
  Vector u = M * a_p;                       // N
  Vector sums = G.G.transpose() * u;        // per-category
  Vector w = sums.array() / (counts.array() * a2);
  if (monotone) w = isotonic_fit(w, counts * a2);
  return rescale_quantification(w, G);
}

namespace {

struct ThresholdWork {
  const Vector& theta;
  const std::vector<int>& category;  // 1-based, all of 1..c_max present
  int c_max;
  std::vector<std::vector<int>> members;  // observation indices per category

  ThresholdWork(const Vector& th, const std::vector<int>& cat, int c)
      : theta(th), category(cat), c_max(c), members(c) {
    for (std::size_t i = 0; i < cat.size(); ++i) members[cat[i] - 1].push_back(i);
  }

  // derivative and curvature of the NLL in the single boundary t_j, others fixed
  void derivatives(const Vector& t, int j, double* g, double* h) const {
    double gap_up = 0.0, gap_lo = 0.0;
    *g = 0.0;
    *h = 0.0;
    // observations in category j+1: t_j is their upper boundary
    for (int i : members[j]) {
      double a = t[j] - theta[i];
      double denom;  // pi / sigmoid'(a) computed via stable ratio
      if (j == 0) {
        denom = 1.0 / sigmoid(-a);
      } else {
        gap_up = t[j] - t[j - 1];
        denom = sigmoid(-(t[j - 1] - theta[i])) * (-std::expm1(-gap_up)) / sigmoid(-a);
      }
      double rho = 1.0 / denom;
      double sa = sigmoid(a);
      *g -= rho;
      *h += -rho * (1.0 - 2.0 * sa) + rho * rho;
    }
    // observations in category j+2: t_j is their lower boundary
    for (int i : members[j + 1]) {
      double b = t[j] - theta[i];
      double denom;
      if (j == c_max - 2) {
        denom = 1.0 / sigmoid(b);
      } else {
        gap_lo = t[j + 1] - t[j];
        denom = sigmoid(t[j + 1] - theta[i]) * (-std::expm1(-gap_lo)) / sigmoid(b);
      }
      double rho = 1.0 / denom;
      double sb = sigmoid(b);
      *g += rho;
      *h += rho * (1.0 - 2.0 * sb) + rho * rho;
    }
  }
};

}  // namespace

Vector update_thresholds(const Vector& theta, const std::vector<int>& category, int n_categories,
                         const Vector& t0) {
  const int c_max = n_categories;
  if (c_max < 2) fail(errc::invalid_argument, "update_thresholds: needs >= 2 categories");
  if (t0.size() != c_max - 1)
    fail(errc::dimension_mismatch, "update_thresholds: warm start has wrong length");
  if (static_cast<int>(category.size()) != theta.size())
    fail(errc::dimension_mismatch, "update_thresholds: category/theta length mismatch");
  ThresholdWork work(theta, category, c_max);
  for (int k = 0; k < c_max; ++k)
    if (work.members[k].empty())
      fail(errc::invalid_argument, "update_thresholds: empty category " + std::to_string(k + 1));

  Vector t = t0;
  const int n_bounds = c_max - 1;
  constexpr double kGradTol = 1e-8;
  for (int sweep = 0; sweep < 200; ++sweep) {
    for (int j = 0; j < n_bounds; ++j) {
      // The coordinate problem is smooth and convex with derivative -> -inf
      // near the lower neighbour and +inf near the upper one, so a root
      // exists strictly inside; bracket it, then safeguarded Newton.
      double g, h;
      double x = t[j];
      work.derivatives(t, j, &g, &h);
      if (std::abs(g) <= 0.1 * kGradTol) continue;
      double lo, hi;
      if (g > 0.0) {
        hi = x;
        double step = (j > 0) ? 0.5 * (x - t[j - 1]) : 1.0;
        lo = (j > 0) ? x - step : x - step;
        for (;;) {
          t[j] = lo;
          double gl, hl;
          work.derivatives(t, j, &gl, &hl);
          if (gl <= 0.0) break;
          hi = lo;
          if (j > 0) step *= 0.5, lo = t[j - 1] + (lo - t[j - 1]) * 0.5;
          else step *= 2.0, lo -= step;
        }
      } else {
        lo = x;
        double step = (j < n_bounds - 1) ? 0.5 * (t[j + 1] - x) : 1.0;
        hi = x + step;
        for (;;) {
          t[j] = hi;
          double gh, hh;
          work.derivatives(t, j, &gh, &hh);
          if (gh >= 0.0) break;
          lo = hi;
          if (j < n_bounds - 1) hi = t[j + 1] - (t[j + 1] - hi) * 0.5;
          else step *= 2.0, hi += step;
        }
      }
      x = 0.5 * (lo + hi);
      for (int inner = 0; inner < 100; ++inner) {
        t[j] = x;
        work.derivatives(t, j, &g, &h);
        if (std::abs(g) <= 1e-10 || hi - lo <= 1e-14 * (1.0 + std::abs(x))) break;
        if (g > 0.0) hi = x;
        else lo = x;
        double xn = (h > 0.0) ? x - g / h : 0.5 * (lo + hi);
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        x = xn;
      }
      t[j] = x;
    }
    double norm2 = 0.0;
    for (int j = 0; j < n_bounds; ++j) {
      double g, h;
      work.derivatives(t, j, &g, &h);
      norm2 += g * g;
    }
    if (std::sqrt(norm2) <= kGradTol) break;
  }
  return t;
}

namespace detail {

std::vector<int> merged_category_map(const std::vector<int>& counts) {
  const int c = static_cast<int>(counts.size());
  std::vector<int> map(c, 0);
  int group = 0;
  for (int k = 0; k < c; ++k) {
    if (counts[k] > 0) ++group;
    map[k] = std::max(group, 1);  // leading empties merge upward into group 1
  }
  return map;
}

Vector expand_merged_thresholds(const std::vector<int>& counts, const Vector& t_compressed) {
  const int c = static_cast<int>(counts.size());
  const double delta = 1e-6;
  std::vector<int> map = merged_category_map(counts);
  int n_groups = map.empty() ? 0 : map.back();
  if (t_compressed.size() != std::max(n_groups - 1, 0))
    fail(errc::dimension_mismatch, "expand_merged_thresholds: threshold/group mismatch");
  Vector t(c - 1);
  if (n_groups <= 1) {
    // single observed category: synthetic ladder around the observed one
    int obs = 0;
    for (int k = 0; k < c; ++k)
      if (counts[k] > 0) obs = k;
    for (int j = 0; j < c - 1; ++j)
      t[j] = (j < obs) ? -10.0 - delta * (obs - 1 - j) : 10.0 + delta * (j - obs);
    return t;
  }
  for (int j = 0; j < c - 1; ++j) {
    int g_low = map[j], g_high = map[j + 1];
    if (g_high > g_low) {
      t[j] = t_compressed[g_low - 1];  // true boundary between observed groups
    } else if (g_low == 1 && counts[j] == 0) {
      // leading empties: park below the whole scale
      int first_obs = 0;
      while (counts[first_obs] == 0) ++first_obs;
      t[j] = t_compressed[0] - 10.0 - delta * (first_obs - 1 - j);
    } else {
      // empty category merged downward: hug the group's upper boundary
      int g = g_low;  // groups are 1-based; boundary above group g is t_compressed[g-1]
      if (g < n_groups) {
        int group_end = j + 1;
        while (group_end + 1 < c && map[group_end + 1] == g) ++group_end;
        t[j] = t_compressed[g - 1] - delta * (group_end - j);
      } else {
        t[j] = t_compressed[n_groups - 2] + 10.0 + delta * j;
      }
    }
  }
  return t;
}

}  // namespace detail

namespace {

struct ResponseData {
  std::vector<VariableKind> kinds;
  Matrix Y;  // numeric value / 0-1 / compressed ordinal category
  std::vector<std::vector<int>> ycat;       // compressed categories (ordinal only)
  std::vector<Vector> t;                    // compressed thresholds (ordinal only)
  std::vector<int> c_eff;                   // observed group count (ordinal only)
  std::vector<std::vector<int>> counts;     // original category counts (ordinal only)
  std::vector<bool> inert;                  // ordinal with a single observed category
  std::vector<int> numeric_cols;
  bool any_numeric = false;
  int numeric_entries = 0;
};

ResponseData build_responses(const MixedDataset& data) {
  const int n = data.n_rows;
  const int r_count = data.n_responses();
  ResponseData rd;
  rd.kinds.resize(r_count);
  rd.Y.resize(n, r_count);
  rd.ycat.resize(r_count);
  rd.t.resize(r_count);
  rd.c_eff.assign(r_count, 0);
  rd.counts.resize(r_count);
  rd.inert.assign(r_count, false);
  for (int r = 0; r < r_count; ++r) {
    const Column& col = data.responses[r];
    rd.kinds[r] = col.schema.kind;
    switch (col.schema.kind) {
      case VariableKind::Numeric:
        for (int i = 0; i < n; ++i) rd.Y(i, r) = col.numeric[i];
        rd.numeric_cols.push_back(r);
        break;
      case VariableKind::Binary:
        for (int i = 0; i < n; ++i) rd.Y(i, r) = col.category[i] - 1.0;
        break;
      case VariableKind::Ordinal: {
        const int c = col.schema.n_categories();
        rd.counts[r].assign(c, 0);
        for (int i = 0; i < n; ++i) ++rd.counts[r][col.category[i] - 1];
        std::vector<int> map = detail::merged_category_map(rd.counts[r]);
        rd.c_eff[r] = map.back();
        rd.inert[r] = rd.c_eff[r] < 2;
        rd.ycat[r].resize(n);
        for (int i = 0; i < n; ++i) {
          rd.ycat[r][i] = map[col.category[i] - 1];
          rd.Y(i, r) = rd.ycat[r][i];
        }
        break;
      }
      case VariableKind::Nominal:
        fail(errc::invalid_family, col.schema.name + ": nominal responses are not supported");
    }
  }
  rd.any_numeric = !rd.numeric_cols.empty();
  rd.numeric_entries = static_cast<int>(rd.numeric_cols.size()) * n;
  return rd;
}

double data_nll(const ResponseData& rd, const Matrix& theta, double sigma2) {
  double loss = 0.0;
  for (int r = 0; r < rd.Y.cols(); ++r) {
    if (rd.kinds[r] == VariableKind::Ordinal) {
      if (rd.inert[r]) continue;
      for (int i = 0; i < theta.rows(); ++i)
        loss += ordinal_nll(theta(i, r), rd.ycat[r][i], rd.t[r]);
    } else {
      loss += response_loss(rd.kinds[r], rd.Y.col(r), theta.col(r), sigma2, Vector());
    }
  }
  return loss;
}

Matrix data_gradients(const ResponseData& rd, const Matrix& theta, double sigma2) {
  Matrix xi = Matrix::Zero(theta.rows(), theta.cols());
  for (int r = 0; r < rd.Y.cols(); ++r) {
    if (rd.kinds[r] == VariableKind::Ordinal) {
      if (rd.inert[r]) continue;
      for (int i = 0; i < theta.rows(); ++i)
        xi(i, r) = ordinal_gradient(theta(i, r), rd.ycat[r][i], rd.t[r]);
    } else {
      xi.col(r) = loss_gradient(rd.kinds[r], rd.Y.col(r), theta.col(r), sigma2, Vector());
    }
  }
  return xi;
}

double data_curvature(const ResponseData& rd, double sigma2) {
  bool any_ordinal = false;
  for (int r = 0; r < static_cast<int>(rd.kinds.size()); ++r)
    if (rd.kinds[r] == VariableKind::Ordinal && !rd.inert[r]) any_ordinal = true;
  double kappa = any_ordinal ? 0.5 : 0.25;
  if (rd.any_numeric) kappa = std::max(kappa, 1.0 / sigma2);
  return kappa;
}

struct PredictorSide {
  std::vector<IndicatorMatrix> G;       // observed-category indicators (discrete only)
  std::vector<std::vector<int>> obs;    // observed original category indices
  std::vector<char> discrete;
  std::vector<char> frozen;
};

PredictorSide build_predictor_side(const MixedDataset& data, const TransformSet& transforms) {
  const int p = data.n_predictors();
  PredictorSide ps;
  ps.G.resize(p);
  ps.obs.resize(p);
  ps.discrete.assign(p, 0);
  ps.frozen.assign(p, 0);
  for (int j = 0; j < p; ++j) {
    const Column& col = data.predictors[j];
    if (col.schema.kind == VariableKind::Numeric) continue;
    ps.discrete[j] = 1;
    const PredictorTransform& tr = transforms.items[j];
    ps.frozen[j] = tr.frozen ? 1 : 0;
    if (tr.frozen) continue;
    const int c = col.schema.n_categories();
    std::vector<int> pos(c, 0);
    for (int k = 0; k < c; ++k) {
      if (tr.observed[k]) {
        pos[k] = static_cast<int>(ps.obs[j].size());
        ps.obs[j].push_back(k);
      }
    }
    std::vector<int> compressed(col.category.size());
    for (std::size_t i = 0; i < col.category.size(); ++i)
      compressed[i] = pos[col.category[i] - 1] + 1;
    ps.G[j] = build_indicator(compressed, static_cast<int>(ps.obs[j].size()));
  }
  return ps;
}

double ordinal_col_nll(const ResponseData& rd, int r, const Matrix& theta, const Vector& t) {
  double loss = 0.0;
  for (int i = 0; i < theta.rows(); ++i) loss += ordinal_nll(theta(i, r), rd.ycat[r][i], t);
  return loss;
}

Vector compress_thresholds(const std::vector<int>& counts, const Vector& t_original) {
  std::vector<int> map = detail::merged_category_map(counts);
  int n_groups = map.back();
  Vector t(std::max(n_groups - 1, 0));
  const int c = static_cast<int>(counts.size());
  for (int j = 0; j < c - 1; ++j)
    if (map[j + 1] > map[j]) t[map[j] - 1] = t_original[j];
  return t;
}

}  // namespace

ModelFit fit(const MixedDataset& data, const FitConfig& config) {
  return fit(data, config, nullptr);
}

ModelFit fit(const MixedDataset& data, const FitConfig& config, const ModelFit* warm_start) {
  config.penalty.validate();
  const int n = data.n_rows;
  const int p = data.n_predictors();
  const int r_count = data.n_responses();
  const int s = config.rank;
  if (n < 2) fail(errc::invalid_argument, "fit: needs >= 2 rows");
  if (r_count < 1) fail(errc::schema_mismatch, "fit: needs >= 1 response");
  if (s < 1 || s > std::min(p, r_count))
    fail(errc::invalid_argument, "fit: rank must be in 1..min(P,R)");
  if (config.max_iters < 1 || !(config.rel_tolerance >= 0.0))
    fail(errc::invalid_argument, "fit: bad iteration controls");

  ResponseData rd = build_responses(data);
  FitWarnings warnings;
  for (int r = 0; r < r_count; ++r) {
    if (rd.kinds[r] != VariableKind::Ordinal) continue;
    int c_orig = data.responses[r].schema.n_categories();
    warnings.merged_response_categories += c_orig - rd.c_eff[r];
    if (rd.inert[r]) ++warnings.inert_responses;
  }

  Rng rng(Rng::mix(config.seed, 0xf17u));
  const bool warm_ok = warm_start && warm_start->B.rows() == p && warm_start->B.cols() == s &&
                       warm_start->V.rows() == r_count &&
                       static_cast<int>(warm_start->transforms.items.size()) == p;

  TransformSet transforms = warm_ok ? warm_start->transforms : initial_transforms(data, rng);
  PredictorSide side = build_predictor_side(data, transforms);
  for (int j = 0; j < p; ++j)
    if (side.frozen[j]) ++warnings.frozen_predictors;
  Matrix phi = apply_transforms(transforms, data);

  Matrix B(p, s), V(r_count, s);
  Vector m = Vector::Zero(r_count);
  double sigma2 = 1.0;

  if (warm_ok) {
    B = warm_start->B;
    V = warm_start->V;
    m = warm_start->m;
    sigma2 = warm_start->sigma2;
    for (int r = 0; r < r_count; ++r)
      if (rd.kinds[r] == VariableKind::Ordinal && !rd.inert[r])
        rd.t[r] = compress_thresholds(rd.counts[r], warm_start->thresholds[r]);
  } else {
    for (int r = 0; r < r_count; ++r) {
      switch (rd.kinds[r]) {
        case VariableKind::Numeric:
          m[r] = rd.Y.col(r).mean();
          break;
        case VariableKind::Binary: {
          double pbar = rd.Y.col(r).mean();
          pbar = std::min(std::max(pbar, 1.0 / (n + 1.0)), n / (n + 1.0));
          m[r] = logit(pbar);
          break;
        }
        case VariableKind::Ordinal: {
          if (rd.inert[r]) break;
          const int c_eff = rd.c_eff[r];
          Vector freq = Vector::Zero(c_eff);
          for (int i = 0; i < n; ++i) freq[rd.ycat[r][i] - 1] += 1.0;
          Vector t(c_eff - 1);
          double cum = 0.0;
          for (int k = 0; k < c_eff - 1; ++k) {
            cum += freq[k];
            t[k] = logit(cum / n);
          }
          rd.t[r] = t;
          break;
        }
        case VariableKind::Nominal:
          break;
      }
    }
    if (rd.any_numeric) {
      double acc = 0.0;
      for (int r : rd.numeric_cols) {
        double mean = rd.Y.col(r).mean();
        acc += (rd.Y.col(r).array() - mean).square().sum() / (n - 1);
      }
      sigma2 = std::max(acc / rd.numeric_cols.size(), config.sigma2_floor);
    }
    for (int j = 0; j < p; ++j)
      for (int k = 0; k < s; ++k) B(j, k) = 0.01 * rng.normal();
    // V from the top right singular vectors of Phi' Ztilde at the start
    Matrix theta0 = Matrix::Zero(n, r_count);
    theta0.rowwise() += m.transpose();
    double kappa0 = data_curvature(rd, sigma2);
    Matrix z0 = theta0 - data_gradients(rd, theta0, sigma2) / kappa0;
    z0.rowwise() -= m.transpose();
    Eigen::JacobiSVD<Matrix> svd(phi.transpose() * z0, Eigen::ComputeThinU | Eigen::ComputeThinV);
    V = svd.matrixV().leftCols(s);
  }

  auto canonical = [&]() {
    Matrix theta = phi * (B * V.transpose());
    theta.rowwise() += m.transpose();
    return theta;
  };

  std::vector<double> trace;
  {
    Matrix theta = canonical();
    trace.push_back(data_nll(rd, theta, sigma2) + penalty_value_smoothed(B, config.penalty));
  }

  bool converged = false;
  int iterations = 0;
  for (int it = 1; it <= config.max_iters; ++it) {
    double prev = trace.back();
    double kappa = data_curvature(rd, sigma2);
    Matrix theta = canonical();
    Matrix Z = theta - data_gradients(rd, theta, sigma2) / kappa;
    theta.rowwise() -= m.transpose();  // now Phi B V'
    m = update_intercepts(Z, theta, rd.kinds);
    Matrix ztilde = Z;
    ztilde.rowwise() -= m.transpose();

    Matrix D = majorization_diagonal(B, config.penalty);
    B = update_B(phi, ztilde, V, D, kappa);
    try {
      V = update_V(phi, ztilde, B);
    } catch (const Error& e) {
      if (e.code() != std::string(errc::degenerate_svd)) throw;
      ++warnings.degenerate_loadings_updates;  // keep previous loadings
    }

    Matrix A = B * V.transpose();  // P x R
    Matrix res = ztilde - phi * A;
    for (int j = 0; j < p; ++j) {
      if (!side.discrete[j] || side.frozen[j]) continue;
      Vector a = A.row(j).transpose();
      if (a.squaredNorm() < 1e-20) continue;  // quantification not identified; keep
      Matrix M = res + phi.col(j) * a.transpose();
      Vector u = M * a;
      bool accepted = false;
      try {
        Vector w_obs = update_quantification(side.G[j], a, M, transforms.items[j].monotone());
        Vector phi_new = side.G[j].G * w_obs;
        // Both columns are standardized, so the surrogate comparison
        // reduces to the inner product with u = M a.
        if (phi_new.dot(u) >= phi.col(j).dot(u)) {
          phi.col(j) = phi_new;
          set_quantification(transforms.items[j], w_obs);
          accepted = true;
        }
      } catch (const Error& e) {
        if (e.code() != std::string(errc::degenerate_quantification)) throw;
      }
      if (!accepted) ++warnings.rejected_quantification_steps;
      res = M - phi.col(j) * a.transpose();
    }

    theta = canonical();
    if (rd.any_numeric) {
      double sse = 0.0;
      for (int r : rd.numeric_cols) sse += (rd.Y.col(r) - theta.col(r)).squaredNorm();
      double cand = std::max(sse / (rd.numeric_entries - 1), config.sigma2_floor);
      auto score = [&](double v) {
        return 0.5 * sse / v + 0.5 * rd.numeric_entries * (kLog2Pi + std::log(v));
      };
      if (score(cand) <= score(sigma2)) sigma2 = cand;
      else ++warnings.rejected_sigma2_steps;
    }

    if (config.threshold_update_period >= 1 && it % config.threshold_update_period == 0) {
      for (int r = 0; r < r_count; ++r) {
        if (rd.kinds[r] != VariableKind::Ordinal || rd.inert[r]) continue;
        Vector cand = update_thresholds(theta.col(r), rd.ycat[r], rd.c_eff[r], rd.t[r]);
        if (ordinal_col_nll(rd, r, theta, cand) <= ordinal_col_nll(rd, r, theta, rd.t[r]))
          rd.t[r] = cand;
        else ++warnings.rejected_threshold_steps;
      }
    }

    double obj = data_nll(rd, theta, sigma2) + penalty_value_smoothed(B, config.penalty);
    if (obj > prev + 1e-9 + 1e-12 * std::abs(prev))
      fail(errc::non_decreasing_loss,
           "fit: objective increased from " + std::to_string(prev) + " to " + std::to_string(obj));
    trace.push_back(obj);
    iterations = it;
    if ((prev - obj) / (std::abs(prev) + 1.0) < config.rel_tolerance) {
      converged = true;
      break;
    }
  }

  // Resolve the rotation indeterminacy of (B, V): order factors by the
  // explained-scale of Phi B, then sign each column of V so its largest
  // entry is positive.
  {
    Matrix phiB = phi * B;
    std::vector<int> order(s);
    for (int k = 0; k < s; ++k) order[k] = k;
    Vector norms = phiB.colwise().norm();
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return norms[a] > norms[b]; });
    Matrix B2(p, s), V2(r_count, s);
    for (int k = 0; k < s; ++k) {
      B2.col(k) = B.col(order[k]);
      V2.col(k) = V.col(order[k]);
    }
    for (int k = 0; k < s; ++k) {
      int idx = 0;
      V2.col(k).cwiseAbs().maxCoeff(&idx);
      if (V2(idx, k) < 0.0) {
        V2.col(k) = -V2.col(k);
        B2.col(k) = -B2.col(k);
      }
    }
    B = B2;
    V = V2;
  }
  for (int j = 0; j < p; ++j)
    for (int k = 0; k < s; ++k)
      if (std::abs(B(j, k)) < config.hard_zero_threshold) B(j, k) = 0.0;

  ModelFit out;
  out.predictors = data.predictor_schema();
  out.responses = data.response_schema();
  out.transforms = std::move(transforms);
  out.B = std::move(B);
  out.V = std::move(V);
  out.m = std::move(m);
  out.sigma2 = sigma2;
  out.has_numeric_response = rd.any_numeric;
  out.thresholds.resize(r_count);
  for (int r = 0; r < r_count; ++r)
    if (rd.kinds[r] == VariableKind::Ordinal)
      out.thresholds[r] = detail::expand_merged_thresholds(rd.counts[r], rd.t[r]);
  out.trace = std::move(trace);
  out.iterations = iterations;
  out.converged = converged;
  out.config = config;
  out.warnings = warnings;
  return out;
}

Predictions predict(const ModelFit& fit, const MixedDataset& data) {
  if (data.n_predictors() != static_cast<int>(fit.predictors.size()))
    fail(errc::schema_mismatch, "predict: predictor count mismatch");
  Predictions out;
  out.theta = canonical_params(apply_transforms(fit.transforms, data, &out.unseen_categories),
                               fit.B, fit.V, fit.m);
  const int n = static_cast<int>(out.theta.rows());
  const int r_count = static_cast<int>(fit.responses.size());
  out.value.resize(n, r_count);
  out.ordinal_probs.resize(r_count);
  for (int r = 0; r < r_count; ++r) {
    switch (fit.responses[r].kind) {
      case VariableKind::Numeric:
        out.value.col(r) = out.theta.col(r);
        break;
      case VariableKind::Binary:
        for (int i = 0; i < n; ++i) out.value(i, r) = sigmoid(out.theta(i, r));
        break;
      case VariableKind::Ordinal: {
        const Vector& t = fit.thresholds[r];
        out.ordinal_probs[r].resize(n, t.size() + 1);
        for (int i = 0; i < n; ++i) {
          out.value(i, r) = predict_ordinal_category(out.theta(i, r), t);
          out.ordinal_probs[r].row(i) = ordinal_category_probs(out.theta(i, r), t).transpose();
        }
        break;
      }
      case VariableKind::Nominal:
        fail(errc::invalid_family, "nominal responses are not supported");
    }
  }
  return out;
}

double mean_heldout_nll(const ModelFit& fit, const MixedDataset& data, int* unseen) {
  if (data.n_responses() != static_cast<int>(fit.responses.size()))
    fail(errc::schema_mismatch, "held-out NLL: response count mismatch");
  int local_unseen = 0;
  Matrix phi = apply_transforms(fit.transforms, data, &local_unseen);
  if (unseen) *unseen += local_unseen;
  Matrix theta = canonical_params(phi, fit.B, fit.V, fit.m);
  const int n = data.n_rows;
  std::vector<VariableKind> kinds(fit.responses.size());
  Matrix Y(n, fit.responses.size());
  for (std::size_t r = 0; r < fit.responses.size(); ++r) {
    kinds[r] = fit.responses[r].kind;
    const Column& col = data.responses[r];
    if (kinds[r] == VariableKind::Numeric)
      for (int i = 0; i < n; ++i) Y(i, r) = col.numeric[i];
    else if (kinds[r] == VariableKind::Binary)
      for (int i = 0; i < n; ++i) Y(i, r) = col.category[i] - 1.0;
    else
      for (int i = 0; i < n; ++i) Y(i, r) = col.category[i];
  }
  double total = 0.0;
  for (int i = 0; i < n; ++i)
    total += observation_nll(kinds, Y.row(i), theta.row(i), fit.sigma2, fit.thresholds);
  return total / n;
}

}  // namespace rrmix
