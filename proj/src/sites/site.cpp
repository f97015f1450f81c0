#include "stamp/sites/site.hpp"

#include <cmath>
#include <limits>
#include <span>

#include "stamp/sites/quadrature.hpp"

namespace stamp::sites {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

SiteFunction SiteFunction::expcox(double h_count, double eta) {
  if (!(eta > 0.0)) throw ValidationError("expcox site needs eta > 0");
  SiteFunction s;
  s.kind = Kind::ExpCox;
  s.h_count = h_count;
  s.eta = eta;
  return s;
}

SiteFunction SiteFunction::gaussian(double y, double v_obs) {
  if (!(v_obs > 0.0)) throw ValidationError("gaussian site needs v_obs > 0");
  SiteFunction s;
  s.kind = Kind::Gaussian;
  s.y = y;
  s.v_obs = v_obs;
  return s;
}

double SiteFunction::log_psi(double z) const {
  switch (kind) {
    case Kind::Absent: return 0.0;
    case Kind::ExpCox: return h_count * z - eta * std::exp(z);
    case Kind::Gaussian: {
      double d = y - z;
      return -0.5 * d * d / v_obs - 0.5 * std::log(kTwoPi * v_obs);
    }
  }
  return 0.0;
}

Gauss1 SiteFunction::exact_canonical() const {
  switch (kind) {
    case Kind::Absent: return {0.0, 0.0};
    case Kind::Gaussian: return {y / v_obs, 1.0 / v_obs};
    case Kind::ExpCox: throw ValidationError("expcox site has no exact canonical form");
  }
  return {0.0, 0.0};
}

namespace {

// Shared log-sum-exp accumulation of the first three moments over weighted
// evaluation points. A collapsed effective node count means the rule no
// longer resolves the integrand and the caller must recentre.
TiltedMoments reduce_moments(std::span<const double> zs, std::span<const double> log_terms,
                             double min_effective_nodes) {
  double m = -std::numeric_limits<double>::infinity();
  for (double a : log_terms) m = std::max(m, a);
  if (!std::isfinite(m)) throw NonFiniteMoment();
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, sq = 0.0;
  for (size_t i = 0; i < zs.size(); ++i) {
    double w = std::exp(log_terms[i] - m);
    s0 += w;
    sq += w * w;
    s1 += w * zs[i];
    s2 += w * zs[i] * zs[i];
  }
  if (!(s0 > 0.0) || !std::isfinite(s0)) throw NonFiniteMoment();
  if (s0 * s0 < min_effective_nodes * sq) throw NonFiniteMoment();
  TiltedMoments out;
  out.mean = s1 / s0;
  out.var = s2 / s0 - out.mean * out.mean;
  out.log_z = m + std::log(s0);
  if (!std::isfinite(out.mean) || !(out.var > 0.0)) throw NonFiniteMoment();
  return out;
}

TiltedMoments gaussian_site_exact(const SiteFunction& site, Gauss1 cavity) {
  // conjugate product: N(y; z, v) against the cavity
  Gauss1 post = cavity + site.exact_canonical();
  TiltedMoments out;
  out.var = 1.0 / post.q;
  out.mean = post.h * out.var;
  if (site.kind == SiteFunction::Kind::Absent) {
    out.log_z = 0.0;
    return out;
  }
  // log of the normalised-cavity integral of the normal density site
  double mc = cavity.h / cavity.q, vc = 1.0 / cavity.q;
  double vtot = vc + site.v_obs;
  double d = site.y - mc;
  out.log_z = -0.5 * d * d / vtot - 0.5 * std::log(kTwoPi * vtot);
  return out;
}

}  // namespace

TiltedMoments tilted_moments_gh(const SiteFunction& site, Gauss1 cavity, int nodes) {
  if (!(cavity.q > 0.0)) throw ImproperTilted();
  if (nodes < 8) throw ValidationError("tilted quadrature needs at least 8 nodes");
  if (site.is_gaussian_exact()) return gaussian_site_exact(site, cavity);
  const auto& gh = GaussHermite::get(nodes);
  double mc = cavity.h / cavity.q;
  double sc = std::sqrt(1.0 / cavity.q);
  std::vector<double> zs(nodes), lt(nodes);
  const double log_sqrt_pi = 0.5723649429247001;
  for (int i = 0; i < nodes; ++i) {
    zs[i] = mc + std::sqrt(2.0) * sc * gh.nodes[i];
    lt[i] = std::log(gh.weights[i]) - log_sqrt_pi + site.log_psi(zs[i]);
  }
  return reduce_moments(zs, lt, 4.0);
}

TiltedMoments tilted_moments_laplace_gh(const SiteFunction& site, Gauss1 cavity, int nodes) {
  if (!(cavity.q > 0.0)) throw ImproperTilted();
  if (nodes < 8) throw ValidationError("tilted quadrature needs at least 8 nodes");
  if (site.is_gaussian_exact()) return gaussian_site_exact(site, cavity);

  // Newton to the mode of h z - q z^2/2 + h_count z - eta e^z.
  double htot = cavity.h + site.h_count;
  double z = cavity.h / cavity.q;
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    double ez = site.eta * std::exp(z);
    double g = htot - cavity.q * z - ez;
    double hess = -cavity.q - ez;
    double step = g / hess;
    z -= step;
    if (!std::isfinite(z)) throw NewtonDiverged();
    if (std::abs(step) < 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NewtonDiverged();
  double curv = cavity.q + site.eta * std::exp(z);  // -f'' at the mode
  double s_lap = std::sqrt(1.0 / curv);

  const auto& gh = GaussHermite::get(nodes);
  double mc = cavity.h / cavity.q;
  double vc = 1.0 / cavity.q;
  const double log_sqrt_pi = 0.5723649429247001;
  std::vector<double> zs(nodes), lt(nodes);
  for (int i = 0; i < nodes; ++i) {
    double zi = z + std::sqrt(2.0) * s_lap * gh.nodes[i];
    zs[i] = zi;
    double log_cav = -0.5 * (zi - mc) * (zi - mc) / vc - 0.5 * std::log(kTwoPi * vc);
    double log_lap = -0.5 * (zi - z) * (zi - z) / (s_lap * s_lap) -
                     0.5 * std::log(kTwoPi * s_lap * s_lap);
    lt[i] = std::log(gh.weights[i]) - log_sqrt_pi + site.log_psi(zi) + log_cav - log_lap;
  }
  return reduce_moments(zs, lt, 2.0);
}

TiltedMoments tilted_moments(const SiteFunction& site, Gauss1 cavity, int nodes) {
  try {
    return tilted_moments_gh(site, cavity, nodes);
  } catch (const NonFiniteMoment&) {
    return tilted_moments_laplace_gh(site, cavity, nodes);
  }
}

SiteMessagePair ep_site_update(const SiteMessagePair& pair, const SiteFunction& site,
                               double damping, int nodes) {
  SiteMessagePair out = pair;
  Gauss1 candidate;
  if (site.is_gaussian_exact()) {
    candidate = site.exact_canonical();
  } else {
    if (!(pair.laml.q > 0.0)) throw ImproperTilted();
    TiltedMoments tm = tilted_moments(site, pair.laml, nodes);
    Gauss1 target = gauss::from_moments1(tm.mean, tm.var);
    candidate = target - pair.laml;
  }
  out.lam0.h = (1.0 - damping) * pair.lam0.h + damping * candidate.h;
  out.lam0.q = (1.0 - damping) * pair.lam0.q + damping * candidate.q;
  out.last_update_magnitude = std::max(std::abs(out.lam0.h - pair.lam0.h),
                                       std::abs(out.lam0.q - pair.lam0.q));
  return out;
}

}  // namespace stamp::sites
