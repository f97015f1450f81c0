#pragma once

#include <span>
#include <vector>

#include "stamp/sparse/sparse_sym.hpp"
#include "stamp/util/dense.hpp"

namespace stamp::gauss {

// Univariate canonical-parameter Gaussian factor exp(h z - q z^2 / 2).
// Messages may be improper (q <= 0); only assembled precisions must be PD.
struct Gauss1 {
  double h = 0.0;
  double q = 0.0;

  Gauss1 operator-(const Gauss1& o) const { return {h - o.h, q - o.q}; }
  Gauss1 operator+(const Gauss1& o) const { return {h + o.h, q + o.q}; }
};

inline Gauss1 from_moments1(double mean, double var) { return {mean / var, 1.0 / var}; }

// Canonical-parameter Gaussian over an indexed variable block; density is
// proportional to exp(h'x - x'Qx/2). Q stores the lower triangle and may be
// indefinite for messages.
struct CanonicalGaussian {
  std::vector<int> scope;  // variable ids; empty means 0..n-1
  std::vector<double> h;
  sparse::SparseSym Q;

  int dim() const { return int(h.size()); }
  void check() const;
};

// Message division: subtraction of canonical parameters. Requires identical
// scope and precision pattern.
CanonicalGaussian divide(const CanonicalGaussian& num, const CanonicalGaussian& den);

// Zero message on a given pattern.
CanonicalGaussian zero_message(const sparse::SparseSym& pattern);

// Largest absolute difference over (h, Q) parameters; the update magnitude
// used by scheduling and convergence checks.
double canonical_distance(const CanonicalGaussian& a, const CanonicalGaussian& b);

// Mean/covariance Gaussian on a sparse covariance pattern (possibly full).
struct MomentGaussian {
  std::vector<double> mean;
  sparse::SparseSym V;  // covariance entries on the provided pattern

  int dim() const { return int(mean.size()); }
};

// Symmetrised Kullback-Leibler score between two full-covariance Gaussians:
// (KL(p||q) + KL(q||p)) / 2.
double gaussian_kl(std::span<const double> mp, const DenseMat& vp,
                   std::span<const double> mq, const DenseMat& vq);
double gaussian_kl_sym(std::span<const double> mp, const DenseMat& vp,
                       std::span<const double> mq, const DenseMat& vq);

// log of the normalisation integral of exp(h'x - x'Qx/2) for PD Q (dense).
double log_partition(std::span<const double> h, const DenseMat& q);

}  // namespace stamp::gauss
