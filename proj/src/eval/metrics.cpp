#include "stamp/eval/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "stamp/gauss/canonical.hpp"

namespace stamp::eval {

std::vector<JointMoments> collect_pair_moments(engine::Engine& eng) {
  int T = eng.model().T;
  std::vector<JointMoments> out;
  out.reserve(T - 1);
  for (int p = 0; p < T - 1; ++p) {
    gauss::CanonicalGaussian joint = eng.pair_joint(p);
    int d = joint.dim();
    DenseMat q(d, d);
    for (int j = 0; j < d; ++j)
      for (int pos = joint.Q.col_ptr[j]; pos < joint.Q.col_ptr[j + 1]; ++pos) {
        q(joint.Q.row_idx[pos], j) = joint.Q.values[pos];
        q(j, joint.Q.row_idx[pos]) = joint.Q.values[pos];
      }
    JointMoments jm;
    jm.cov = spd_inverse(q);
    jm.mean = matvec(jm.cov, joint.h);
    out.push_back(std::move(jm));
  }
  return out;
}

double kl_accuracy(const std::vector<JointMoments>& exact,
                   const std::vector<JointMoments>& approx) {
  if (exact.size() != approx.size() || exact.empty())
    throw DimensionMismatch("kl_accuracy needs matched non-empty runs");
  double acc = 0.0;
  for (size_t t = 0; t < exact.size(); ++t) {
    acc += gauss::gaussian_kl(approx[t].mean, approx[t].cov, exact[t].mean, exact[t].cov);
    acc += gauss::gaussian_kl(exact[t].mean, exact[t].cov, approx[t].mean, approx[t].cov);
  }
  return acc / (2.0 * double(exact.size()));
}

double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw ValidationError("quantile level must be in (0,1)");
  // Acklam-style initial estimate
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00, 2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  double x;
  if (p < 0.02425) {
    double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p > 1.0 - 0.02425) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  // two Newton refinements against the exact CDF
  for (int it = 0; it < 2; ++it) {
    double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
    double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
    x -= (cdf - p) / pdf;
  }
  return x;
}

double qq_deviation(engine::Engine& eng, const std::vector<std::vector<double>>& truth_path,
                    int bins) {
  int T = eng.model().T;
  int n = eng.model().n;
  if (int(truth_path.size()) != T) throw DimensionMismatch("truth path length");
  std::vector<double> residuals;
  residuals.reserve(size_t(T - 1) * 2 * n);
  for (int p = 0; p < T - 1; ++p) {
    gauss::CanonicalGaussian joint = eng.pair_joint(p);
    int d = 2 * n;
    DenseMat q(d, d);
    for (int j = 0; j < d; ++j)
      for (int pos = joint.Q.col_ptr[j]; pos < joint.Q.col_ptr[j + 1]; ++pos) {
        q(joint.Q.row_idx[pos], j) = joint.Q.values[pos];
        q(j, joint.Q.row_idx[pos]) = joint.Q.values[pos];
      }
    DenseMat l = cholesky_lower(q);
    // mean via the same dense factor
    std::vector<double> m(joint.h.begin(), joint.h.end());
    chol_solve_in_place(l, m);
    std::vector<double> x(d);
    for (int j = 0; j < n; ++j) {
      x[j] = truth_path[p][j] - m[j];
      x[n + j] = truth_path[p + 1][j] - m[n + j];
    }
    // residual = L' (x - m): standard-normal under the approximate law
    for (int i = 0; i < d; ++i) {
      double s = 0.0;
      for (int k = i; k < d; ++k) s += l(k, i) * x[k];
      residuals.push_back(s);
    }
  }
  std::sort(residuals.begin(), residuals.end());
  double dev = 0.0;
  size_t m = residuals.size();
  for (int k = 1; k <= bins; ++k) {
    double level = (k - 0.5) / double(bins);
    double pos = level * double(m - 1);
    size_t lo = size_t(pos);
    double frac = pos - double(lo);
    double emp = residuals[lo];
    if (lo + 1 < m) emp += frac * (residuals[lo + 1] - residuals[lo]);
    dev += std::abs(emp - normal_quantile(level));
  }
  return dev / bins;
}

RocCurve structure_roc(std::span<const double> scores, const std::vector<bool>& truth) {
  if (scores.size() != truth.size() || scores.empty())
    throw DimensionMismatch("roc inputs");
  long pos = 0, neg = 0;
  for (bool t : truth) (t ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw ValidationError("roc needs both positive and negative truth labels");
  std::vector<size_t> order(scores.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  RocCurve roc;
  roc.thresholds.push_back(scores[order[0]] + 1.0);
  roc.fpr.push_back(0.0);
  roc.tpr.push_back(0.0);
  long tp = 0, fp = 0;
  double auc = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    double s = scores[order[i]];
    // advance over the tie group as one threshold step
    while (i < order.size() && scores[order[i]] == s) {
      (truth[order[i]] ? tp : fp)++;
      ++i;
    }
    double new_fpr = double(fp) / neg;
    double new_tpr = double(tp) / pos;
    auc += 0.5 * (new_tpr + roc.tpr.back()) * (new_fpr - roc.fpr.back());
    roc.thresholds.push_back(s);
    roc.fpr.push_back(new_fpr);
    roc.tpr.push_back(new_tpr);
  }
  roc.auc = auc;
  return roc;
}

std::vector<double> one_step_predictive(engine::Engine& eng) { return eng.filter_evidence(); }

}  // namespace stamp::eval
