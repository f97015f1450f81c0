#include <algorithm>
#include <cmath>

#include "stamp/params/params.hpp"

namespace stamp::params {

namespace {

double digamma(double x) {
  double acc = 0.0;
  while (x < 6.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  double inv = 1.0 / x, inv2 = inv * inv;
  return acc + std::log(x) - 0.5 * inv -
         inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 / 252.0));
}

// residual quadratic entering both the gamma update and the free energy
double row_residual_quadratic(int i, const engine::SufficientStats& stats,
                              const RowPosterior& r) {
  double h_q = stats.sum_sq_second[i];
  auto cross_vals = stats.sum_cross.row_vals(i);
  int k = int(r.support.size());
  for (int a = 0; a < k; ++a) h_q -= 2.0 * r.mean[a] * cross_vals[a];
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b) {
      int p = stats.sum_xx_first.find(r.support[a], r.support[b]);
      if (p < 0) throw MissingEntry(r.support[a], r.support[b]);
      h_q += r.second_moment(a, b) * stats.sum_xx_first.values[p];
    }
  return h_q;
}

double relative_change(const gauss::TransitionExpectations& a,
                       const gauss::TransitionExpectations& b,
                       const GammaPosterior& ga, const GammaPosterior& gb) {
  // largest parameter movement relative to the overall parameter scale, so
  // structurally-zero entries cannot dominate the stopping rule
  double scale = 1e-12, d = 0.0;
  for (double v : b.eqa.values) scale = std::max(scale, std::abs(v));
  for (size_t i = 0; i < gb.shape.size(); ++i)
    scale = std::max(scale, gb.shape[i] / gb.rate[i]);
  for (size_t p = 0; p < a.eqa.values.size(); ++p)
    d = std::max(d, std::abs(a.eqa.values[p] - b.eqa.values[p]));
  for (size_t i = 0; i < ga.shape.size(); ++i)
    d = std::max(d, std::abs(ga.shape[i] / ga.rate[i] - gb.shape[i] / gb.rate[i]));
  return d / scale;
}

}  // namespace

double conjugate_elbo(engine::Engine& eng, const engine::SufficientStats& stats,
                      const engine::SmoothedMarginals& marg,
                      const std::vector<RowPosterior>& rows, const GammaPosterior& gamma,
                      const PriorSpec& prior) {
  const auto& model = eng.model();
  int n = model.n, T = model.T;
  const double log2pi = std::log(2.0 * M_PI);
  double elbo = 0.0;

  // observation terms (exact Gaussian sites)
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < n; ++j) {
      const auto& f = model.site_fns[t][j];
      if (f.kind != sites::SiteFunction::Kind::Gaussian) continue;
      double ex2 = marg.var[t][j] + marg.mean[t][j] * marg.mean[t][j];
      elbo += -0.5 * std::log(2.0 * M_PI * f.v_obs) -
              (f.y * f.y - 2.0 * f.y * marg.mean[t][j] + ex2) / (2.0 * f.v_obs);
    }

  // transition terms and the q_ii prior/entropy
  for (int i = 0; i < n; ++i) {
    double e_log_q = digamma(gamma.shape[i]) - std::log(gamma.rate[i]);
    double e_q = gamma.mean(i);
    double h_q = row_residual_quadratic(i, stats, rows[i]);
    elbo += 0.5 * (T - 1) * (e_log_q - log2pi) - 0.5 * e_q * h_q;
    elbo += prior.gamma_shape * std::log(prior.gamma_rate) - std::lgamma(prior.gamma_shape) +
            (prior.gamma_shape - 1.0) * e_log_q - prior.gamma_rate * e_q;
    elbo += gamma.shape[i] - std::log(gamma.rate[i]) + std::lgamma(gamma.shape[i]) +
            (1.0 - gamma.shape[i]) * digamma(gamma.shape[i]);
  }

  // initial-state prior
  for (int i = 0; i < n; ++i) {
    double d = marg.mean[0][i] - model.prior_mean[i];
    elbo += -0.5 * (log2pi + std::log(model.prior_var[i])) -
            0.5 * (marg.var[0][i] + d * d) / model.prior_var[i];
  }

  // transition-coefficient prior and entropy (single slab configuration)
  for (int i = 0; i < n; ++i) {
    const RowPosterior& r = rows[i];
    int k = int(r.support.size());
    DenseMat cov(k, k);
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b)
        cov(a, b) = r.second_moment(a, b) - r.mean[a] * r.mean[b];
    for (int a = 0; a < k; ++a) {
      elbo += -0.5 * std::log(2.0 * M_PI * prior.v_slab) -
              r.second_moment(a, a) / (2.0 * prior.v_slab);
    }
    DenseMat l = cov;
    if (!cholesky_in_place(l)) throw NotPositiveDefinite(i);
    elbo += 0.5 * (k * (log2pi + 1.0) + chol_logdet(l));
  }

  // chain entropy: pair blocks minus the interior separators
  for (int p = 0; p < T - 1; ++p)
    elbo += 0.5 * (2 * n * (log2pi + 1.0) - eng.pair_precision_logdet(p));
  for (int t = 1; t + 1 < T; ++t) {
    DenseMat v = eng.slice_cov_dense(t, false);  // first slice of pair t
    DenseMat l = v;
    if (!cholesky_in_place(l)) throw NotPositiveDefinite(t);
    elbo -= 0.5 * (n * (log2pi + 1.0) + chol_logdet(l));
  }
  return elbo;
}

VbResult vb_outer_loop(engine::Engine& eng, const sparse::SparseGen& a_structure,
                       const PriorSpec& prior, const VbConfig& config) {
  prior.validate();
  int n = a_structure.rows;
  VbResult res;
  GammaPosterior gamma;
  gamma.shape.assign(n, prior.gamma_shape);
  gamma.rate.assign(n, prior.gamma_rate);
  std::vector<double> e_q(n);
  for (int i = 0; i < n; ++i) e_q[i] = gamma.mean(i);

  gauss::TransitionExpectations current = prior_expectations(a_structure, prior, e_q);
  eng.update_expectations(current);

  if (config.outer_iters == 0) {
    // prior-expectation inference only
    eng.reset_messages();
    res.last_engine_report = eng.run();
    res.marginals = eng.extract_marginals();
    res.gamma = gamma;
    res.rows.resize(n);
    for (int i = 0; i < n; ++i) {
      auto cols = a_structure.row_cols(i);
      res.rows[i].support.assign(cols.begin(), cols.end());
      int k = int(res.rows[i].support.size());
      res.rows[i].mean.assign(k, 0.0);
      res.rows[i].second_moment = DenseMat(k, k);
      res.rows[i].inclusion.assign(k, prior.p_slab);
    }
    return res;
  }

  for (int cycle = 0; cycle < config.outer_iters; ++cycle) {
    res.last_engine_report = eng.run();
    res.diagnostics.engine_rounds.push_back(res.last_engine_report.rounds);
    engine::SufficientStats stats = eng.extract_sufficient_stats();

    std::vector<RowPosterior> rows(n);
    for (int i = 0; i < n; ++i)
      rows[i] = row_spike_slab_exact(assemble_row_gaussian(i, stats, e_q[i]), prior);

    if (config.learn_q) {
      gamma = update_q_gamma(stats, rows, prior);
      for (int i = 0; i < n; ++i) e_q[i] = gamma.mean(i);
    }

    gauss::TransitionExpectations updated = expected_transition_products(rows, e_q, n);
    double change = relative_change(updated, current, gamma,
                                    res.rows.empty() ? gamma : res.gamma);
    res.diagnostics.param_change.push_back(change);
    res.rows = std::move(rows);
    res.gamma = gamma;
    current = updated;
    eng.update_expectations(current);
    if (config.track_evidence) res.diagnostics.evidence.push_back(eng.evidence_proxy());
    ++res.diagnostics.outer_iterations;
    if (change < config.outer_tol) {
      res.diagnostics.converged = true;
      break;
    }
  }
  // final state-space pass under the converged parameters
  res.last_engine_report = eng.run();
  res.marginals = eng.extract_marginals();
  return res;
}

}  // namespace stamp::params
