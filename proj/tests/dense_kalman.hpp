#pragma once

// Dense Kalman filter / RTS smoother reference used as the exactness oracle
// for the message-passing engine on Gaussian models. Written directly in
// moment form with dense algebra, independent of the sparse code paths.

#include <vector>

#include "stamp/util/dense.hpp"

namespace testutil {

using stamp::DenseMat;

struct KalmanResult {
  std::vector<std::vector<double>> mean;  // smoothed means, T x n
  std::vector<DenseMat> cov;              // smoothed covariances
  std::vector<DenseMat> cross;            // Cov(x_t, x_{t+1} | all data), T-1
  std::vector<double> log_predictive;     // log p(y_t | y_{<t}), per t >= 1
  double loglik = 0.0;                    // includes the t = 0 update
};

// obs[t] holds (coordinate, value) pairs observed with noise variance v_obs.
inline KalmanResult dense_rts_smoother(const DenseMat& a, const DenseMat& noise_cov,
                                       const std::vector<double>& m1,
                                       const std::vector<double>& v1_diag,
                                       const std::vector<std::vector<std::pair<int, double>>>& obs,
                                       double v_obs) {
  using namespace stamp;
  int n = a.rows;
  int T = int(obs.size());
  std::vector<std::vector<double>> mf(T), mp(T);
  std::vector<DenseMat> pf(T), pp(T);
  KalmanResult out;

  auto update = [&](int t, const std::vector<double>& m_pred, const DenseMat& p_pred,
                    double* logz) {
    const auto& o = obs[t];
    if (o.empty()) {
      mf[t] = m_pred;
      pf[t] = p_pred;
      if (logz) *logz = 0.0;
      return;
    }
    int k = int(o.size());
    DenseMat s(k, k);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) s(r, c) = p_pred(o[r].first, o[c].first);
    for (int r = 0; r < k; ++r) s(r, r) += v_obs;
    DenseMat ls = cholesky_lower(s);
    std::vector<double> innov(k);
    for (int r = 0; r < k; ++r) innov[r] = o[r].second - m_pred[o[r].first];
    if (logz) {
      auto sol = chol_solve(ls, innov);
      double quad = 0.0;
      for (int r = 0; r < k; ++r) quad += innov[r] * sol[r];
      *logz = -0.5 * quad - 0.5 * chol_logdet(ls) - 0.5 * k * std::log(2.0 * M_PI);
    }
    // K = P H' S^{-1}; columns of K via solves
    DenseMat ph(n, k);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < k; ++c) ph(i, c) = p_pred(i, o[c].first);
    DenseMat kgain(n, k);
    std::vector<double> col(k);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < k; ++c) col[c] = ph(i, c);
      chol_solve_in_place(ls, col);
      for (int c = 0; c < k; ++c) kgain(i, c) = col[c];
    }
    mf[t] = m_pred;
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < k; ++c) mf[t][i] += kgain(i, c) * innov[c];
    pf[t] = p_pred;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int c = 0; c < k; ++c) acc += kgain(i, c) * ph(j, c);
        pf[t](i, j) -= acc;
      }
  };

  mp[0] = m1;
  pp[0] = DenseMat(n, n);
  for (int i = 0; i < n; ++i) pp[0](i, i) = v1_diag[i];
  double logz0 = 0.0;
  update(0, mp[0], pp[0], &logz0);
  out.loglik = logz0;
  for (int t = 1; t < T; ++t) {
    mp[t] = matvec(a, mf[t - 1]);
    DenseMat ap = a * pf[t - 1];
    pp[t] = ap * a.transposed();
    for (size_t q = 0; q < pp[t].a.size(); ++q) pp[t].a[q] += noise_cov.a[q];
    double lz = 0.0;
    update(t, mp[t], pp[t], &lz);
    out.log_predictive.push_back(lz);
    out.loglik += lz;
  }

  out.mean.assign(T, std::vector<double>(n, 0.0));
  out.cov.assign(T, DenseMat(n, n));
  out.cross.assign(std::max(0, T - 1), DenseMat(n, n));
  out.mean[T - 1] = mf[T - 1];
  out.cov[T - 1] = pf[T - 1];
  for (int t = T - 2; t >= 0; --t) {
    // G = Pf A' Pp_{t+1}^{-1}
    DenseMat ppinv = spd_inverse(pp[t + 1]);
    DenseMat g = pf[t] * a.transposed() * ppinv;
    out.mean[t] = mf[t];
    std::vector<double> diff(n);
    for (int i = 0; i < n; ++i) diff[i] = out.mean[t + 1][i] - mp[t + 1][i];
    auto corr = matvec(g, diff);
    for (int i = 0; i < n; ++i) out.mean[t][i] += corr[i];
    DenseMat dp = out.cov[t + 1];
    for (size_t q = 0; q < dp.a.size(); ++q) dp.a[q] -= pp[t + 1].a[q];
    out.cov[t] = pf[t];
    DenseMat gd = g * dp * g.transposed();
    for (size_t q = 0; q < out.cov[t].a.size(); ++q) out.cov[t].a[q] += gd.a[q];
    out.cross[t] = g * out.cov[t + 1];  // Cov(x_t, x_{t+1})
  }
  return out;
}

}  // namespace testutil
