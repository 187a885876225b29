#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "advoice/error.hpp"

namespace advoice::linalg {

struct Eigh {
  std::vector<double> values;   // descending
  std::vector<double> vectors;  // row i = unit eigenvector for values[i]
};

// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major n x n).
inline Eigh jacobi_eigh(int n, std::vector<double> a) {
  if (n <= 0 || a.size() != static_cast<std::size_t>(n) * n) {
    throw ConfigError("jacobi_eigh: matrix size does not match n");
  }
  auto at = [&](std::vector<double>& m, int r, int c) -> double& {
    return m[static_cast<std::size_t>(r) * n + c];
  };
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) at(v, i, i) = 1.0;

  double frob = 0.0;
  for (double x : a) frob += x * x;
  const double stop = 1e-28 * (1.0 + frob);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
    if (off <= stop) break;

    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(a, p, q);
        if (apq == 0.0) continue;
        const double tau = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(a, k, p);
          const double akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(a, p, k);
          const double aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = at(v, k, p);
          const double vkq = at(v, k, q);
          at(v, k, p) = c * vkp - s * vkq;
          at(v, k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return at(a, i, i) > at(a, j, j); });

  Eigh out;
  out.values.resize(n);
  out.vectors.resize(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    const int src = order[i];
    out.values[i] = at(a, src, src);
    for (int k = 0; k < n; ++k) {
      out.vectors[static_cast<std::size_t>(i) * n + k] = at(v, k, src);
    }
  }
  return out;
}

}  // namespace advoice::linalg
