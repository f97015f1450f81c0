#pragma once

#include "stamp/gauss/canonical.hpp"

namespace stamp::sites {

using gauss::Gauss1;

// Univariate observation factor attached to one state coordinate.
//   ExpCox:   psi(z) = exp(h_count * z - eta * exp(z)), the event-count
//             pseudo-likelihood; the linear part is exact Gaussian evidence
//             and is usually carried on the Gaussian side (h_count = 0 here).
//   Gaussian: psi(z) = N(y; z, v_obs), handled exactly without quadrature.
//   Absent:   psi == 1.
struct SiteFunction {
  enum class Kind { Absent, ExpCox, Gaussian } kind = Kind::Absent;
  double h_count = 0.0;
  double eta = 0.0;
  double y = 0.0;
  double v_obs = 1.0;

  static SiteFunction absent() { return {}; }
  static SiteFunction expcox(double h_count, double eta);
  static SiteFunction gaussian(double y, double v_obs);

  double log_psi(double z) const;
  bool is_gaussian_exact() const { return kind != Kind::ExpCox; }
  // Exact canonical contribution for the Gaussian/absent kinds.
  Gauss1 exact_canonical() const;
};

struct TiltedMoments {
  double log_z = 0.0;  // log integral of psi against the normalised cavity
  double mean = 0.0;
  double var = 0.0;
};

// Moments of z under psi(z) * exp(h z - q z^2/2), quadrature centred on the
// cavity Gaussian. Throws ImproperTilted for q <= 0 and NonFiniteMoment when
// the integrand underflows everywhere (the signal to switch to the
// Laplace-centred variant).
TiltedMoments tilted_moments_gh(const SiteFunction& site, Gauss1 cavity, int nodes = 32);

// Newton iteration to the mode of log psi + h z - q z^2/2 (|step| < 1e-12,
// at most 100 iterations), then Gauss-Hermite centred on the Laplace
// Gaussian. Same contract as tilted_moments_gh but robust when the site and
// cavity masses are far apart.
TiltedMoments tilted_moments_laplace_gh(const SiteFunction& site, Gauss1 cavity,
                                        int nodes = 32);

// Plain quadrature with automatic fall-back to the Laplace-centred variant.
TiltedMoments tilted_moments(const SiteFunction& site, Gauss1 cavity, int nodes = 32);

// One site's pair of canonical messages plus its scheduling weight.
struct SiteMessagePair {
  Gauss1 lam0;  // site -> chain
  Gauss1 laml;  // chain -> site (cavity)
  double last_update_magnitude = 0.0;
};

// Moment-matching update of lam0 from the tilted distribution psi * laml,
// blended with step size `damping`; records the parameter-change magnitude.
SiteMessagePair ep_site_update(const SiteMessagePair& pair, const SiteFunction& site,
                               double damping = 1.0, int nodes = 32);

}  // namespace stamp::sites
