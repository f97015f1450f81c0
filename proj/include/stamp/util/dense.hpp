#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "stamp/util/error.hpp"

namespace stamp {

// Small row-major dense matrix. Used for per-clique blocks, oracles and the
// dense reference computations in tests; not a general linear algebra library.
struct DenseMat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  DenseMat() = default;
  DenseMat(int r, int c) : rows(r), cols(c), a(std::size_t(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[std::size_t(i) * cols + j]; }
  double operator()(int i, int j) const { return a[std::size_t(i) * cols + j]; }

  static DenseMat identity(int n) {
    DenseMat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  DenseMat transposed() const {
    DenseMat t(cols, rows);
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
  }
};

inline DenseMat operator*(const DenseMat& x, const DenseMat& y) {
  if (x.cols != y.rows) throw DimensionMismatch("dense product");
  DenseMat z(x.rows, y.cols);
  for (int i = 0; i < x.rows; ++i)
    for (int k = 0; k < x.cols; ++k) {
      double v = x(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < y.cols; ++j) z(i, j) += v * y(k, j);
    }
  return z;
}

inline std::vector<double> matvec(const DenseMat& m, const std::vector<double>& v) {
  if (int(v.size()) != m.cols) throw DimensionMismatch("dense matvec");
  std::vector<double> r(m.rows, 0.0);
  for (int i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
    r[i] = s;
  }
  return r;
}

// In-place lower Cholesky. Returns false when a pivot is not positive.
inline bool cholesky_in_place(DenseMat& m) {
  int n = m.rows;
  for (int j = 0; j < n; ++j) {
    double d = m(j, j);
    for (int k = 0; k < j; ++k) d -= m(j, k) * m(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) return false;
    double lj = std::sqrt(d);
    m(j, j) = lj;
    for (int i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= m(i, k) * m(j, k);
      m(i, j) = s / lj;
    }
    for (int i = 0; i < j; ++i) m(i, j) = 0.0;
  }
  return true;
}

inline DenseMat cholesky_lower(const DenseMat& m, int error_col_offset = 0) {
  DenseMat l = m;
  if (!cholesky_in_place(l)) throw NotPositiveDefinite(error_col_offset);
  return l;
}

inline void chol_solve_in_place(const DenseMat& l, std::vector<double>& x) {
  int n = l.rows;
  for (int i = 0; i < n; ++i) {
    double s = x[i];
    for (int k = 0; k < i; ++k) s -= l(i, k) * x[k];
    x[i] = s / l(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = x[i];
    for (int k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
    x[i] = s / l(i, i);
  }
}

inline std::vector<double> chol_solve(const DenseMat& l, std::vector<double> b) {
  chol_solve_in_place(l, b);
  return b;
}

inline double chol_logdet(const DenseMat& l) {
  double s = 0.0;
  for (int i = 0; i < l.rows; ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

inline DenseMat spd_inverse(const DenseMat& m, int error_col_offset = 0) {
  DenseMat l = cholesky_lower(m, error_col_offset);
  int n = m.rows;
  DenseMat inv(n, n);
  std::vector<double> e(n, 0.0);
  for (int j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    chol_solve_in_place(l, e);
    for (int i = 0; i < n; ++i) inv(i, j) = e[i];
  }
  // symmetrise round-off
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j) {
      double v = 0.5 * (inv(i, j) + inv(j, i));
      inv(i, j) = inv(j, i) = v;
    }
  return inv;
}

}  // namespace stamp
