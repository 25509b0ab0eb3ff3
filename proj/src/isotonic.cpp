#include "rrmix/isotonic.hpp"

#include <vector>

namespace rrmix {

Vector isotonic_fit(const Vector& v, const Vector& w) {
  const int n = static_cast<int>(v.size());
  if (w.size() != n) fail(errc::dimension_mismatch, "isotonic_fit: value/weight length mismatch");
  if (n == 0) return Vector();
  for (int i = 0; i < n; ++i)
    if (!(w[i] > 0.0)) fail(errc::invalid_argument, "isotonic_fit: weights must be positive");

  // stack of blocks (mean, weight, count); merge while the tail decreases
  std::vector<double> mean(n), weight(n);
  std::vector<int> count(n);
  int top = 0;
  for (int i = 0; i < n; ++i) {
    mean[top] = v[i];
    weight[top] = w[i];
    count[top] = 1;
    while (top > 0 && mean[top - 1] >= mean[top]) {
      double wsum = weight[top - 1] + weight[top];
      mean[top - 1] = (weight[top - 1] * mean[top - 1] + weight[top] * mean[top]) / wsum;
      weight[top - 1] = wsum;
      count[top - 1] += count[top];
      --top;
    }
    ++top;
  }
  Vector x(n);
  int pos = 0;
  for (int b = 0; b < top; ++b)
    for (int k = 0; k < count[b]; ++k) x[pos++] = mean[b];
  return x;
}

}  // namespace rrmix
