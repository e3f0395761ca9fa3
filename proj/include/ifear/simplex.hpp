#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace ifear {

struct LpInfeasible : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LpUnbounded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Equality-form linear program: minimize c.x subject to A x = b, x >= 0.
/// A is m x n row-major.
struct LpProblem {
  std::size_t m = 0, n = 0;
  std::vector<double> a;
  std::vector<double> b;
  std::vector<double> c;
};

struct LpResult {
  double value = 0.0;
  std::vector<double> x;
};

/// Dense two-phase primal simplex with Bland's rule throughout, which rules
/// out cycling on the degenerate flow constraints these problems carry.
/// Redundant rows (the occupancy polytope always has one) are detected in
/// phase one and dropped. Sized for tiny instances; everything is a plain
/// tableau.
class SimplexSolver {
 public:
  explicit SimplexSolver(double tol = 1e-9) : tol_(tol) {}

  LpResult solve(const LpProblem& lp) const {
    const std::size_t m = lp.m, n = lp.n;
    if (lp.a.size() != m * n || lp.b.size() != m || lp.c.size() != n)
      throw std::invalid_argument("lp problem shape");

    // Tableau: n structural + m artificial columns + rhs.
    const std::size_t cols = n + m + 1;
    std::vector<double> t(m * cols, 0.0);
    std::vector<int> basis(m);
    std::vector<bool> live_row(m, true);
    for (std::size_t i = 0; i < m; ++i) {
      const double sign = lp.b[i] < 0.0 ? -1.0 : 1.0;
      for (std::size_t j = 0; j < n; ++j) t[i * cols + j] = sign * lp.a[i * n + j];
      t[i * cols + n + i] = 1.0;
      t[i * cols + cols - 1] = sign * lp.b[i];
      basis[i] = static_cast<int>(n + i);
    }

    // Phase 1: minimize the sum of artificials.
    std::vector<double> z(cols, 0.0);
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i) acc -= t[i * cols + j];
      z[j] = acc;  // reduced cost of min sum(artificials) with that basis
      if (j >= n && j < n + m) z[j] += 1.0;
    }
    iterate(t, z, basis, live_row, m, cols, n + m);
    double art_sum = -z[cols - 1];
    if (art_sum > tol_)
      throw LpInfeasible("lp infeasible, artificial residual " +
                         std::to_string(art_sum));

    // Drive remaining artificials out of the basis; a row with no usable
    // structural pivot is redundant and gets dropped.
    for (std::size_t i = 0; i < m; ++i) {
      if (!live_row[i] || basis[i] < static_cast<int>(n)) continue;
      std::size_t piv = n;
      for (std::size_t j = 0; j < n; ++j)
        if (std::abs(t[i * cols + j]) > tol_) {
          piv = j;
          break;
        }
      if (piv == n) {
        live_row[i] = false;
        continue;
      }
      pivot(t, z, basis, m, cols, i, piv);
    }

    // Phase 2: minimize the real objective over structural columns only.
    for (std::size_t j = 0; j < cols; ++j) z[j] = j < n ? lp.c[j] : 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!live_row[i]) continue;
      const int bj = basis[i];
      if (bj >= static_cast<int>(n)) continue;
      const double cb = lp.c[bj];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) z[j] -= cb * t[i * cols + j];
    }
    iterate(t, z, basis, live_row, m, cols, n);

    LpResult res;
    res.x.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      if (live_row[i] && basis[i] < static_cast<int>(n))
        res.x[basis[i]] = t[i * cols + cols - 1];
    res.value = 0.0;
    for (std::size_t j = 0; j < n; ++j) res.value += lp.c[j] * res.x[j];
    return res;
  }

 private:
  double tol_;

  void pivot(std::vector<double>& t, std::vector<double>& z,
             std::vector<int>& basis, std::size_t m, std::size_t cols,
             std::size_t row, std::size_t col) const {
    const double inv = 1.0 / t[row * cols + col];
    for (std::size_t j = 0; j < cols; ++j) t[row * cols + j] *= inv;
    t[row * cols + col] = 1.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == row) continue;
      const double f = t[i * cols + col];
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j)
        t[i * cols + j] -= f * t[row * cols + j];
      t[i * cols + col] = 0.0;
    }
    const double fz = z[col];
    if (fz != 0.0) {
      for (std::size_t j = 0; j < cols; ++j) z[j] -= fz * t[row * cols + j];
      z[col] = 0.0;
    }
    basis[row] = static_cast<int>(col);
  }

  void iterate(std::vector<double>& t, std::vector<double>& z,
               std::vector<int>& basis, const std::vector<bool>& live_row,
               std::size_t m, std::size_t cols,
               std::size_t allowed_cols) const {
    for (;;) {
      // Bland: entering column is the lowest index with negative reduced cost.
      std::size_t enter = allowed_cols;
      for (std::size_t j = 0; j < allowed_cols; ++j)
        if (z[j] < -tol_) {
          enter = j;
          break;
        }
      if (enter == allowed_cols) return;

      // Ratio test; ties leave the lowest basis index (Bland again).
      std::size_t leave = m;
      double best_ratio = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        if (!live_row[i]) continue;
        const double aij = t[i * cols + enter];
        if (aij <= tol_) continue;
        const double ratio = t[i * cols + cols - 1] / aij;
        if (leave == m || ratio < best_ratio ||
            (ratio == best_ratio && basis[i] < basis[leave])) {
          leave = i;
          best_ratio = ratio;
        }
      }
      if (leave == m)
        throw LpUnbounded("lp unbounded in column " + std::to_string(enter));
      pivot(t, z, basis, m, cols, leave, enter);
    }
  }
};

}  // namespace ifear
