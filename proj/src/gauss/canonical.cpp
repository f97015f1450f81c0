#include "stamp/gauss/canonical.hpp"

#include <cmath>

namespace stamp::gauss {

void CanonicalGaussian::check() const {
  if (!scope.empty() && int(scope.size()) != dim())
    throw DimensionMismatch("canonical scope/h");
  if (Q.n != dim()) throw DimensionMismatch("canonical h/Q");
}

CanonicalGaussian divide(const CanonicalGaussian& num, const CanonicalGaussian& den) {
  if (num.scope != den.scope || num.dim() != den.dim())
    throw ValidationError("message division requires identical scope");
  if (!sparse::same_pattern(num.Q, den.Q))
    throw ValidationError("message division requires identical precision pattern");
  CanonicalGaussian out = num;
  for (size_t i = 0; i < out.h.size(); ++i) out.h[i] -= den.h[i];
  for (size_t p = 0; p < out.Q.values.size(); ++p) out.Q.values[p] -= den.Q.values[p];
  return out;
}

CanonicalGaussian zero_message(const sparse::SparseSym& pattern) {
  CanonicalGaussian m;
  m.h.assign(pattern.n, 0.0);
  m.Q = pattern;
  m.Q.values.assign(pattern.nnz(), 0.0);
  return m;
}

double canonical_distance(const CanonicalGaussian& a, const CanonicalGaussian& b) {
  if (a.dim() != b.dim() || !sparse::same_pattern(a.Q, b.Q))
    throw ValidationError("canonical_distance requires matching layout");
  double d = 0.0;
  for (size_t i = 0; i < a.h.size(); ++i) d = std::max(d, std::abs(a.h[i] - b.h[i]));
  for (size_t p = 0; p < a.Q.values.size(); ++p)
    d = std::max(d, std::abs(a.Q.values[p] - b.Q.values[p]));
  return d;
}

double gaussian_kl(std::span<const double> mp, const DenseMat& vp,
                   std::span<const double> mq, const DenseMat& vq) {
  int d = int(mp.size());
  if (int(mq.size()) != d || vp.rows != d || vq.rows != d)
    throw DimensionMismatch("gaussian_kl");
  DenseMat lq = cholesky_lower(vq);
  DenseMat lp = cholesky_lower(vp);
  // tr(Vq^{ -1} Vp) column by column
  double tr = 0.0;
  std::vector<double> col(d);
  for (int j = 0; j < d; ++j) {
    for (int i = 0; i < d; ++i) col[i] = vp(i, j);
    chol_solve_in_place(lq, col);
    tr += col[j];
  }
  std::vector<double> dm(d);
  for (int i = 0; i < d; ++i) dm[i] = mq[i] - mp[i];
  std::vector<double> sol = dm;
  chol_solve_in_place(lq, sol);
  double quad = 0.0;
  for (int i = 0; i < d; ++i) quad += dm[i] * sol[i];
  return 0.5 * (tr + quad - d + chol_logdet(lq) - chol_logdet(lp));
}

double gaussian_kl_sym(std::span<const double> mp, const DenseMat& vp,
                       std::span<const double> mq, const DenseMat& vq) {
  return 0.5 * (gaussian_kl(mp, vp, mq, vq) + gaussian_kl(mq, vq, mp, vp));
}

double log_partition(std::span<const double> h, const DenseMat& q) {
  int d = int(h.size());
  DenseMat l = cholesky_lower(q);
  std::vector<double> x(h.begin(), h.end());
  chol_solve_in_place(l, x);
  double quad = 0.0;
  for (int i = 0; i < d; ++i) quad += h[i] * x[i];
  return 0.5 * quad - 0.5 * chol_logdet(l) + 0.5 * d * std::log(2.0 * M_PI);
}

}  // namespace stamp::gauss
