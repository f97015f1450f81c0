#include <algorithm>
#include <cmath>
#include <limits>

#include "stamp/params/params.hpp"

namespace stamp::params {

void PriorSpec::validate() const {
  if (!(v_slab > 0.0) || !(gamma_shape > 0.0) || !(gamma_rate > 0.0) || !(v_b > 0.0))
    throw ValidationError("prior variances and gamma parameters must be positive");
  if (!(p_slab > 0.0) || p_slab > 1.0) throw ValidationError("p_slab must be in (0, 1]");
}

RowGaussian assemble_row_gaussian(int row, const engine::SufficientStats& stats,
                                  double e_q_ii, std::span<const double> control_x_sum) {
  RowGaussian rg;
  rg.support.assign(stats.sum_cross.row_cols(row).begin(),
                    stats.sum_cross.row_cols(row).end());
  int k = int(rg.support.size());
  rg.h.assign(k, 0.0);
  rg.q = DenseMat(k, k);
  auto cross_vals = stats.sum_cross.row_vals(row);
  for (int a = 0; a < k; ++a) {
    rg.h[a] = e_q_ii * cross_vals[a];
    if (!control_x_sum.empty()) rg.h[a] -= e_q_ii * control_x_sum[rg.support[a]];
    for (int b = 0; b <= a; ++b) {
      int p = stats.sum_xx_first.find(rg.support[a], rg.support[b]);
      if (p < 0) throw MissingEntry(rg.support[a], rg.support[b]);
      double v = e_q_ii * stats.sum_xx_first.values[p];
      rg.q(a, b) = v;
      rg.q(b, a) = v;
    }
  }
  return rg;
}

RowPosterior row_spike_slab_exact(const RowGaussian& row, const PriorSpec& prior) {
  prior.validate();
  int k = int(row.support.size());
  if (k > kMaxSupport) throw SupportTooLarge(k);
  RowPosterior out;
  out.support = row.support;
  out.mean.assign(k, 0.0);
  out.second_moment = DenseMat(k, k);
  out.inclusion.assign(k, 0.0);

  double log_p = std::log(prior.p_slab);
  double log_1mp =
      prior.p_slab < 1.0 ? std::log(1.0 - prior.p_slab) : -std::numeric_limits<double>::infinity();
  double log_vslab = std::log(prior.v_slab);

  struct Config {
    std::uint32_t mask;
    double log_w;
    std::vector<double> mu;  // over active coordinates
    DenseMat cov;
  };
  std::vector<Config> configs;
  double max_log_w = -std::numeric_limits<double>::infinity();

  std::uint32_t full = k >= 31 ? 0 : (std::uint32_t(1) << k) - 1;
  if (k >= 31) throw SupportTooLarge(k);
  for (std::uint32_t mask = 0; mask <= full; ++mask) {
    if (prior.p_slab >= 1.0 && mask != full) continue;
    std::vector<int> active;
    for (int b = 0; b < k; ++b)
      if (mask & (1u << b)) active.push_back(b);
    int m = int(active.size());
    double log_w = m * log_p;
    if (k - m > 0) log_w += (k - m) * log_1mp;
    Config cfg;
    cfg.mask = mask;
    if (m > 0) {
      DenseMat p_s(m, m);
      std::vector<double> h_s(m);
      for (int a = 0; a < m; ++a) {
        h_s[a] = row.h[active[a]];
        for (int b = 0; b < m; ++b) p_s(a, b) = row.q(active[a], active[b]);
        p_s(a, a) += 1.0 / prior.v_slab;
      }
      DenseMat l = p_s;
      if (!cholesky_in_place(l)) throw NotPositiveDefinite(row.support[active[0]]);
      cfg.mu = chol_solve(l, h_s);
      cfg.cov = spd_inverse(p_s);
      double quad = 0.0;
      for (int a = 0; a < m; ++a) quad += h_s[a] * cfg.mu[a];
      log_w += -0.5 * m * log_vslab - 0.5 * chol_logdet(l) + 0.5 * quad;
    }
    max_log_w = std::max(max_log_w, log_w);
    cfg.log_w = log_w;
    configs.push_back(std::move(cfg));
  }

  double z = 0.0;
  for (auto& c : configs) z += std::exp(c.log_w - max_log_w);
  out.log_normaliser = max_log_w + std::log(z);
  for (auto& c : configs) {
    double w = std::exp(c.log_w - max_log_w) / z;
    std::vector<int> active;
    for (int b = 0; b < k; ++b)
      if (c.mask & (1u << b)) active.push_back(b);
    for (size_t a = 0; a < active.size(); ++a) {
      out.inclusion[active[a]] += w;
      out.mean[active[a]] += w * c.mu[a];
      for (size_t b = 0; b < active.size(); ++b)
        out.second_moment(active[a], active[b]) +=
            w * (c.mu[a] * c.mu[b] + c.cov(int(a), int(b)));
    }
  }
  return out;
}

GammaPosterior update_q_gamma(const engine::SufficientStats& stats,
                              const std::vector<RowPosterior>& rows,
                              const PriorSpec& prior,
                              std::span<const double> control_terms) {
  prior.validate();
  int n = stats.n;
  if (int(rows.size()) != n) throw DimensionMismatch("row posterior count");
  GammaPosterior g;
  g.shape.assign(n, prior.gamma_shape + 0.5 * stats.transitions);
  g.rate.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const RowPosterior& r = rows[i];
    int k = int(r.support.size());
    double h_q = stats.sum_sq_second[i];
    auto cross_vals = stats.sum_cross.row_vals(i);
    for (int a = 0; a < k; ++a) h_q -= 2.0 * r.mean[a] * cross_vals[a];
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        int p = stats.sum_xx_first.find(r.support[a], r.support[b]);
        if (p < 0) throw MissingEntry(r.support[a], r.support[b]);
        h_q += r.second_moment(a, b) * stats.sum_xx_first.values[p];
      }
    if (!control_terms.empty()) h_q += control_terms[i];
    double rate = prior.gamma_rate + 0.5 * h_q;
    if (!(rate > 0.0)) throw NegativeRate(i);
    g.rate[i] = rate;
  }
  return g;
}

BPosterior update_b_gaussian(const std::vector<std::vector<double>>& means,
                             const sparse::SparseGen& e_a,
                             std::span<const double> e_q_diag,
                             const std::vector<std::vector<double>>& u, double v_b) {
  BPosterior out;
  if (u.empty()) return out;
  int n = int(e_q_diag.size());
  int m = int(u[0].size());
  int trans = int(u.size());
  if (int(means.size()) != trans + 1) throw DimensionMismatch("means vs controls");
  out.n = n;
  out.m = m;
  int d = n * m;
  DenseMat prec(d, d);
  std::vector<double> h(d, 0.0);
  // sum_t u u' (x) E[Q] + I / v_b, with vec(B) stacking columns of B
  DenseMat uu(m, m);
  for (int t = 0; t < trans; ++t)
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) uu(a, b) += u[t][a] * u[t][b];
  for (int a = 0; a < m; ++a)
    for (int b = 0; b < m; ++b)
      for (int i = 0; i < n; ++i) prec(a * n + i, b * n + i) = uu(a, b) * e_q_diag[i];
  for (int c = 0; c < d; ++c) prec(c, c) += 1.0 / v_b;
  for (int t = 0; t < trans; ++t) {
    auto drift = e_a.matvec(means[t]);
    for (int i = 0; i < n; ++i) {
      double resid = means[t + 1][i] - drift[i];
      for (int a = 0; a < m; ++a) h[a * n + i] += e_q_diag[i] * resid * u[t][a];
    }
  }
  DenseMat l = cholesky_lower(prec);
  out.mean = chol_solve(l, h);
  out.cov = spd_inverse(prec);
  return out;
}

gauss::TransitionExpectations expected_transition_products(
    const std::vector<RowPosterior>& rows, std::span<const double> e_q_diag, int n) {
  std::vector<int> is, js;
  std::vector<double> vs;
  std::vector<int> gi, gj;
  std::vector<double> gv, qv;
  for (int i = 0; i < n; ++i) {
    const RowPosterior& r = rows[i];
    int k = int(r.support.size());
    for (int a = 0; a < k; ++a) {
      gi.push_back(i);
      gj.push_back(r.support[a]);
      gv.push_back(r.mean[a]);
      for (int b = 0; b <= a; ++b) {
        is.push_back(std::max(r.support[a], r.support[b]));
        js.push_back(std::min(r.support[a], r.support[b]));
        vs.push_back(e_q_diag[i] * r.second_moment(a, b));
      }
    }
  }
  gauss::TransitionExpectations ex;
  ex.eatqa = sparse::sym_from_triplets(n, is, js, vs);
  sparse::SparseGen ea = sparse::gen_from_triplets(n, n, gi, gj, gv);
  {
    std::vector<int> qi(n);
    std::vector<double> qd(e_q_diag.begin(), e_q_diag.end());
    for (int i = 0; i < n; ++i) qi[i] = i;
    ex.eq = sparse::sym_from_triplets(n, qi, qi, qd);
  }
  // E[Q]E[A] row-scales E[A] for diagonal E[Q]
  sparse::SparseGen eqa = ea;
  for (int i = 0; i < n; ++i)
    for (int p = eqa.row_ptr[i]; p < eqa.row_ptr[i + 1]; ++p) eqa.values[p] *= e_q_diag[i];
  ex.eqa = std::move(eqa);
  return ex;
}

gauss::TransitionExpectations prior_expectations(const sparse::SparseGen& a_structure,
                                                 const PriorSpec& prior,
                                                 std::span<const double> e_q_diag) {
  int n = a_structure.rows;
  std::vector<RowPosterior> rows(n);
  for (int i = 0; i < n; ++i) {
    auto cols = a_structure.row_cols(i);
    rows[i].support.assign(cols.begin(), cols.end());
    int k = int(rows[i].support.size());
    rows[i].mean.assign(k, 0.0);
    rows[i].second_moment = DenseMat(k, k);
    for (int a = 0; a < k; ++a)
      rows[i].second_moment(a, a) = prior.p_slab * prior.v_slab;
    rows[i].inclusion.assign(k, prior.p_slab);
  }
  return expected_transition_products(rows, e_q_diag, n);
}

}  // namespace stamp::params
