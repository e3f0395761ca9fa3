#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace ifear {

/// Solve the dense system A x = b by Gaussian elimination with partial
/// pivoting. A is n x n row-major and is consumed. Instances here are tiny
/// (states of a tabular model), so no factorization is cached.
inline std::vector<double> solve_linear(std::vector<double> a,
                                        std::vector<double> b,
                                        double pivot_tol = 1e-12) {
  const std::size_t n = b.size();
  if (a.size() != n * n) throw std::invalid_argument("solve_linear shape");
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) < pivot_tol)
      throw std::runtime_error("solve_linear: singular matrix");
    if (piv != col) {
      for (std::size_t j = col; j < n; ++j)
        std::swap(a[piv * n + j], a[col * n + j]);
      std::swap(b[piv], b[col]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] * inv;
      if (f == 0.0) continue;
      for (std::size_t j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n, 0.0);
  for (std::size_t ri = n; ri-- > 0;) {
    double acc = b[ri];
    for (std::size_t j = ri + 1; j < n; ++j) acc -= a[ri * n + j] * x[j];
    x[ri] = acc / a[ri * n + ri];
  }
  return x;
}

}  // namespace ifear
