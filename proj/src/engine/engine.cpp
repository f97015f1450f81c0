#include "stamp/engine/engine.hpp"
#include <cstdlib>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <limits>

namespace stamp::engine {

using gauss::CanonicalGaussian;
using gauss::Gauss1;
using sites::SiteFunction;
using sites::SiteMessagePair;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

class StopWatch {
 public:
  explicit StopWatch(double& sink) : sink_(sink), t0_(clock::now()) {}
  ~StopWatch() { sink_ += std::chrono::duration<double>(clock::now() - t0_).count(); }

 private:
  using clock = std::chrono::steady_clock;
  double& sink_;
  clock::time_point t0_;
};

// Power-EP site update; fraction 1 reduces to the plain moment-matching step.
SiteMessagePair fractional_site_update(const SiteMessagePair& pair, const SiteFunction& site,
                                       double fraction, double damping, int nodes) {
  if (fraction >= 1.0 || site.is_gaussian_exact())
    return sites::ep_site_update(pair, site, damping, nodes);
  Gauss1 cav{pair.laml.h + (1.0 - fraction) * pair.lam0.h,
             pair.laml.q + (1.0 - fraction) * pair.lam0.q};
  SiteFunction frac_site = SiteFunction::expcox(fraction * site.h_count, fraction * site.eta);
  sites::TiltedMoments tm = sites::tilted_moments(frac_site, cav, nodes);
  Gauss1 target = gauss::from_moments1(tm.mean, tm.var);
  Gauss1 candidate{pair.lam0.h + (target.h - cav.h - fraction * pair.lam0.h) / fraction,
                   pair.lam0.q + (target.q - cav.q - fraction * pair.lam0.q) / fraction};
  SiteMessagePair out = pair;
  out.lam0.h = (1.0 - damping) * pair.lam0.h + damping * candidate.h;
  out.lam0.q = (1.0 - damping) * pair.lam0.q + damping * candidate.q;
  out.last_update_magnitude = std::max(std::abs(out.lam0.h - pair.lam0.h),
                                       std::abs(out.lam0.q - pair.lam0.q));
  return out;
}

// log of the Gaussian overlap integral of exp(a z - b z^2/2) against the
// normalised cavity with canonical parameters (hc, qc).
double log_gauss_site_integral(double a, double b, double hc, double qc) {
  double qt = qc + b;
  if (!(qt > 0.0)) throw ImproperTilted();
  double ht = hc + a;
  return 0.5 * (ht * ht / qt - hc * hc / qc) - 0.5 * std::log(qt / qc);
}

}  // namespace

void EngineModel::validate() const {
  if (n < 1 || T < 2) throw ValidationError("engine model needs n >= 1 and T >= 2");
  if (int(prior_mean.size()) != n || int(prior_var.size()) != n)
    throw DimensionMismatch("prior size");
  for (double v : prior_var)
    if (!(v > 0.0)) throw ValidationError("prior variances must be positive");
  if (!site_fns.empty() && int(site_fns.size()) != T)
    throw DimensionMismatch("site function table");
  for (auto& row : site_fns)
    if (int(row.size()) != n) throw DimensionMismatch("site function row");
  if (!h_data.empty() && int(h_data.size()) != T) throw DimensionMismatch("h_data table");
  for (auto& row : h_data)
    if (int(row.size()) != n) throw DimensionMismatch("h_data row");
  if (!h_control.empty() && int(h_control.size()) != T - 1)
    throw DimensionMismatch("h_control table");
  if (ex.eq.n != n) throw DimensionMismatch("expectation blocks vs n");
}

Engine::Engine(EngineModel model, sparse::SparseSym g_edges, EngineConfig config)
    : model_(std::move(model)), g_edges_(std::move(g_edges)), config_(config) {
  model_.validate();
  if (g_edges_.n != model_.n) throw DimensionMismatch("G(f) size");
  current_site_damping_ = config_.site_damping;

  msg_pattern_ = sparse::pattern_with_diagonal(g_edges_);
  cliques_ = sparse::clique_decomposition(g_edges_);
  projector_ = std::make_unique<gauss::ChordalProjector>(cliques_, g_edges_);
  asm_ = std::make_unique<gauss::TwoSliceAssembler>(model_.ex, msg_pattern_,
                                                    config_.two_slice_order);

  const auto& sym = asm_->symbolic();
  int n = model_.n;
  auto build_lookup = [&](const std::vector<int>& is, const std::vector<int>& js) {
    return sparse::CovLookup::build(sym, is, js).pos;
  };
  {
    std::vector<int> is, js;
    for (int j = 0; j < n; ++j)
      for (int i : msg_pattern_.col_rows(j)) {
        is.push_back(i);
        js.push_back(j);
      }
    gf_first_pos_ = build_lookup(is, js);
    for (auto& v : is) v += n;
    for (auto& v : js) v += n;
    gf_second_pos_ = build_lookup(is, js);
  }
  {
    std::vector<int> is(n), js(n);
    for (int j = 0; j < n; ++j) is[j] = js[j] = j;
    diag_first_pos_ = build_lookup(is, js);
    for (int j = 0; j < n; ++j) is[j] = js[j] = j + n;
    diag_second_pos_ = build_lookup(is, js);
  }
  cross_pattern_ = model_.ex.eqa;
  cross_pattern_.values.clear();
  {
    std::vector<int> is, js;
    for (int i = 0; i < n; ++i)
      for (int j : cross_pattern_.row_cols(i)) {
        is.push_back(i + n);
        js.push_back(j);
      }
    cross_pos_ = build_lookup(is, js);
  }
  stats_pattern_ = sparse::pattern_with_diagonal(model_.ex.eatqa);
  stats_pattern_.values.clear();
  {
    std::vector<int> is, js;
    for (int j = 0; j < n; ++j)
      for (int i : stats_pattern_.col_rows(j)) {
        is.push_back(i);
        js.push_back(j);
      }
    stats_pos_ = build_lookup(is, js);
  }
  clique_pos_first_.resize(cliques_.cliques.size());
  clique_pos_second_.resize(cliques_.cliques.size());
  for (size_t k = 0; k < cliques_.cliques.size(); ++k) {
    auto& mem = cliques_.cliques[k].members;
    std::vector<int> is, js;
    for (size_t a = 0; a < mem.size(); ++a)
      for (size_t b = 0; b <= a; ++b) {
        is.push_back(mem[a]);
        js.push_back(mem[b]);
      }
    clique_pos_first_[k] = build_lookup(is, js);
    for (auto& v : is) v += n;
    for (auto& v : js) v += n;
    clique_pos_second_[k] = build_lookup(is, js);
  }

  snapshots_.resize(model_.T - 1);
  reset_messages();
}

void Engine::reset_messages() {
  int n = model_.n, T = model_.T;
  msgs_.alpha.assign(T, gauss::zero_message(msg_pattern_));
  msgs_.beta.assign(T, gauss::zero_message(msg_pattern_));
  // the initial forward message carries the (diagonal) prior exactly
  for (int j = 0; j < n; ++j) {
    double q = 1.0 / model_.prior_var[j];
    msgs_.alpha[0].h[j] = model_.prior_mean[j] * q;
    msgs_.alpha[0].Q.values[msg_pattern_.find(j, j)] = q;
  }
  msgs_.sites.assign(T, std::vector<SiteMessagePair>(n));
  seed_exact_sites();
  for (auto& s : snapshots_) s.valid = false;
  mag_alpha_.assign(T, 0.0);
  mag_beta_.assign(T, 0.0);
  pending_.assign(T - 1, kInf);
  current_site_damping_ = config_.site_damping;
  current_temporal_damping_ = config_.temporal_damping;
}

void Engine::seed_exact_sites() {
  if (model_.site_fns.empty()) return;
  for (int t = 0; t < model_.T; ++t)
    for (int j = 0; j < model_.n; ++j) {
      const SiteFunction& f = model_.site_fns[t][j];
      if (f.kind == SiteFunction::Kind::Gaussian)
        msgs_.sites[t][j].lam0 = f.exact_canonical();
    }
}

void Engine::update_expectations(gauss::TransitionExpectations ex,
                                 std::vector<std::vector<double>> h_control) {
  asm_->update_expectations(ex);
  for (auto& a : pool_) a->update_expectations(ex);
  model_.ex = std::move(ex);
  if (!h_control.empty()) model_.h_control = std::move(h_control);
  pending_.assign(model_.T - 1, kInf);
}

void Engine::set_messages(Messages msgs) {
  if (int(msgs.alpha.size()) != model_.T || int(msgs.beta.size()) != model_.T ||
      int(msgs.sites.size()) != model_.T)
    throw DimensionMismatch("message bundle size");
  msgs_ = std::move(msgs);
  pending_.assign(model_.T - 1, kInf);
}

SiteFunction Engine::full_site(int t, int j) const {
  SiteFunction f = model_.site_fns.empty() ? SiteFunction::absent() : model_.site_fns[t][j];
  double hd = model_.h_data.empty() ? 0.0 : model_.h_data[t][j];
  if (f.kind == SiteFunction::Kind::ExpCox)
    return SiteFunction::expcox(f.h_count + hd, f.eta);
  return f;
}

void Engine::assemble_pair(gauss::TwoSliceAssembler& a, int pair, bool with_sites,
                           bool with_data) const {
  if (filter_mode_) with_data = false;  // the data term lives inside the sites
  int n = model_.n, t2 = pair + 1;
  gauss::TwoSliceAssembler::Sides sides;
  sides.alpha = &msgs_.alpha[pair];
  sides.beta = &msgs_.beta[t2];
  std::vector<double> l0h2(n, 0.0), l0q2(n, 0.0), l0h1, l0q1;
  if (with_sites) {
    for (int j = 0; j < n; ++j) {
      l0h2[j] = msgs_.sites[t2][j].lam0.h;
      l0q2[j] = msgs_.sites[t2][j].lam0.q;
    }
  }
  sides.lam0_h_second = l0h2;
  sides.lam0_q_second = l0q2;
  if (with_data && !model_.h_data.empty()) sides.h_data_second = model_.h_data[t2];
  if (pair == 0 && with_sites && !filter_mode_) {
    l0h1.assign(n, 0.0);
    l0q1.assign(n, 0.0);
    for (int j = 0; j < n; ++j) {
      l0h1[j] = msgs_.sites[0][j].lam0.h;
      l0q1[j] = msgs_.sites[0][j].lam0.q;
    }
    sides.lam0_h_first = l0h1;
    sides.lam0_q_first = l0q1;
  }
  if (pair == 0 && with_data && !filter_mode_ && !model_.h_data.empty())
    sides.h_data_first = model_.h_data[0];
  if (!model_.h_control.empty()) sides.h_control_first = model_.h_control[pair];
  a.assemble(sides);
}

void Engine::snapshot_pair(int pair) {
  PairSnapshot& s = snapshots_[pair];
  s.alpha = msgs_.alpha[pair];
  s.beta = msgs_.beta[pair + 1];
  s.sites_second = msgs_.sites[pair + 1];
  if (pair == 0) s.sites_first = msgs_.sites[0];
  s.valid = true;
}

bool Engine::recover_pair(gauss::TwoSliceAssembler& a, int pair) {
  PairSnapshot& s = snapshots_[pair];
  if (!s.valid) return false;
  double w = 0.5;
  for (int attempt = 0; attempt < 5; ++attempt, w *= 0.5) {
    auto blend_msg = [&](CanonicalGaussian& cur, const CanonicalGaussian& good) {
      for (size_t i = 0; i < cur.h.size(); ++i)
        cur.h[i] = good.h[i] + w * (cur.h[i] - good.h[i]);
      for (size_t p = 0; p < cur.Q.values.size(); ++p)
        cur.Q.values[p] = good.Q.values[p] + w * (cur.Q.values[p] - good.Q.values[p]);
    };
    blend_msg(msgs_.alpha[pair], s.alpha);
    blend_msg(msgs_.beta[pair + 1], s.beta);
    for (int j = 0; j < model_.n; ++j) {
      auto& cur = msgs_.sites[pair + 1][j].lam0;
      const auto& good = s.sites_second[j].lam0;
      cur.h = good.h + w * (cur.h - good.h);
      cur.q = good.q + w * (cur.q - good.q);
      if (pair == 0 && !s.sites_first.empty()) {
        auto& c0 = msgs_.sites[0][j].lam0;
        const auto& g0 = s.sites_first[j].lam0;
        c0.h = g0.h + w * (c0.h - g0.h);
        c0.q = g0.q + w * (c0.q - g0.q);
      }
    }
    try {
      assemble_pair(a, pair);
      a.factor(config_.pivot_rel_tol);
      return true;
    } catch (const NotPositiveDefinite&) {
      continue;
    }
  }
  msgs_.alpha[pair] = s.alpha;
  msgs_.beta[pair + 1] = s.beta;
  msgs_.sites[pair + 1] = s.sites_second;
  if (pair == 0 && !s.sites_first.empty()) msgs_.sites[0] = s.sites_first;
  return false;
}

double Engine::site_pass(int pair, std::span<const double> marg_mean,
                         std::span<const double> marg_var, bool first_slice,
                         PhaseTimers& tm) {
  if (model_.site_fns.empty() && !filter_mode_) return 0.0;
  int n = model_.n;
  int t = first_slice ? 0 : pair + 1;
  double change = 0.0;
  StopWatch sw(tm.sites);
  for (int j = 0; j < n; ++j) {
    SiteMessagePair& sp = msgs_.sites[t][j];
    Gauss1 marg = gauss::from_moments1(marg_mean[j], marg_var[j]);
    sp.laml = marg - sp.lam0;
    SiteFunction f = filter_mode_ ? full_site(t, j) : model_.site_fns[t][j];
    if (f.kind == SiteFunction::Kind::Absent) continue;
    if (f.kind == SiteFunction::Kind::Gaussian) continue;  // seeded exactly
    if (!(sp.laml.q > 0.0)) continue;  // improper cavity: skip this round
    try {
      SiteMessagePair updated = fractional_site_update(
          sp, f, config_.site_fraction, current_site_damping_, config_.gh_nodes);
      change = std::max(change, updated.last_update_magnitude);
      sp = updated;
    } catch (const NumericalError&) {
      // quadrature could not resolve this site at the current cavity; keep
      // the previous message and let the next sweep revisit it
      continue;
    }
  }
  return change;
}

CanonicalGaussian Engine::project_slice(gauss::TwoSliceAssembler& a, bool second) const {
  int n = model_.n;
  const auto& mean = a.mean();
  const auto& zv = a.selected_cov_values();
  std::span<const double> m(mean.data() + (second ? n : 0), n);
  const auto& plans = second ? clique_pos_second_ : clique_pos_first_;
  return projector_->project(m, [&](int k, DenseMat& vcc) {
    int msize = int(cliques_.cliques[k].members.size());
    size_t s_idx = 0;
    for (int ai = 0; ai < msize; ++ai)
      for (int bi = 0; bi <= ai; ++bi) {
        double v = zv[plans[k][s_idx++]];
        vcc(ai, bi) = vcc(bi, ai) = v;
      }
  });
}

Engine::VisitResult Engine::visit(gauss::TwoSliceAssembler& a, PhaseTimers& tm, int pair,
                                  const VisitOpts& opts) {
  int n = model_.n, t2 = pair + 1;
  VisitResult res;
  int inner_budget = opts.inner_iters > 0 ? opts.inner_iters : std::max(1, config_.inner_iters);
  bool sites_active = opts.update_sites && (!model_.site_fns.empty() || filter_mode_);
  if (!sites_active) inner_budget = 1;

  for (int inner = 0; inner < inner_budget; ++inner) {
    {
      StopWatch sw(tm.overhead);
      assemble_pair(a, pair);
    }
    bool ok = true;
    try {
      StopWatch sw(tm.linalg);
      a.factor(config_.pivot_rel_tol);
    } catch (const NotPositiveDefinite&) {
      ok = false;
    }
    if (!ok) {
      res.pd_failure = true;
      current_site_damping_ = std::min(current_site_damping_, 0.9);
      StopWatch sw(tm.linalg);
      if (!recover_pair(a, pair)) {
        res.skipped = true;
        return res;
      }
    }
    {
      StopWatch sw(tm.linalg);
      a.mean();
      a.selected_cov_values();
    }
    snapshot_pair(pair);

    const auto& mean = a.mean();
    const auto& zv = a.selected_cov_values();
    double eps = current_temporal_damping_;
    auto blend_into = [&](CanonicalGaussian& target, CanonicalGaussian&& candidate) {
      if (eps < 1.0) {
        for (size_t i = 0; i < candidate.h.size(); ++i)
          candidate.h[i] = (1.0 - eps) * target.h[i] + eps * candidate.h[i];
        for (size_t p2i = 0; p2i < candidate.Q.values.size(); ++p2i)
          candidate.Q.values[p2i] =
              (1.0 - eps) * target.Q.values[p2i] + eps * candidate.Q.values[p2i];
      }
      double d = gauss::canonical_distance(candidate, target);
      target = std::move(candidate);
      return d;
    };
    if (opts.update_alpha) {
      StopWatch sw(tm.projection);
      CanonicalGaussian p2 = project_slice(a, true);
      double d = blend_into(msgs_.alpha[t2], gauss::divide(p2, msgs_.beta[t2]));
      res.message_change = std::max(res.message_change, d);
      mag_alpha_[t2] = d;
    }
    if (opts.update_beta) {
      StopWatch sw(tm.projection);
      CanonicalGaussian p1 = project_slice(a, false);
      double d1 = blend_into(msgs_.beta[pair], gauss::divide(p1, msgs_.alpha[pair]));
      res.message_change = std::max(res.message_change, d1);
      mag_beta_[pair] = d1;
    }

    if (!sites_active) break;
    std::vector<double> var2(n);
    for (int j = 0; j < n; ++j) var2[j] = zv[diag_second_pos_[j]];
    static const bool debug_sites = std::getenv("STAMP_DEBUG") != nullptr;
    if (debug_sites) {
      double vmin = 1e300, vmax = -1e300;
      for (int j = 0; j < n; ++j) { vmin = std::min(vmin, var2[j]); vmax = std::max(vmax, var2[j]); }
      double l0max = 0.0;
      for (int j = 0; j < n; ++j) l0max = std::max(l0max, std::abs(msgs_.sites[t2][j].lam0.q));
      std::fprintf(stderr, "pair %d inner %d: var2 [%.3e, %.3e] lam0 qmax %.3e msgchg %.3e\n",
                   pair, inner, vmin, vmax, l0max, res.message_change);
    }
    std::span<const double> m2(mean.data() + n, n);
    double sc = site_pass(pair, m2, var2, false, tm);
    if (pair == 0 && !filter_mode_) {
      std::vector<double> var1(n);
      for (int j = 0; j < n; ++j) var1[j] = zv[diag_first_pos_[j]];
      std::span<const double> m1(mean.data(), n);
      sc = std::max(sc, site_pass(pair, m1, var1, true, tm));
    }
    res.site_change = std::max(res.site_change, sc);
    if (sc < config_.tol) break;
  }
  return res;
}

void Engine::maybe_stabilise(const std::vector<double>& trace) {
  if (!config_.auto_stabilise) return;
  size_t r = trace.size();
  if (r < 12 || r % 12 != 0) return;
  // deterministic step-size controller: damp harder while the update
  // magnitude refuses to shrink (limit cycles), recover once it does
  double recent = trace[r - 1];
  double before = trace[r - 12];
  if (recent > 0.8 * before) {
    current_temporal_damping_ = std::max(0.2, current_temporal_damping_ * 0.7);
    current_site_damping_ = std::max(0.4, current_site_damping_ * 0.85);
  } else {
    current_temporal_damping_ =
        std::min(config_.temporal_damping, current_temporal_damping_ * 1.15);
    current_site_damping_ =
        std::min(config_.site_damping, current_site_damping_ * 1.08);
  }
}

void Engine::bump_neighbours(int pair) {
  if (pair + 1 < int(pending_.size()))
    pending_[pair + 1] = std::max(pending_[pair + 1], mag_alpha_[pair + 1]);
  if (pair - 1 >= 0) pending_[pair - 1] = std::max(pending_[pair - 1], mag_beta_[pair]);
}

ConvergenceReport Engine::run() {
  if (!(config_.tol < kInf)) {
    ConvergenceReport rep;
    rep.converged = true;  // nothing to do: marginals are the prior propagation
    return rep;
  }
  switch (config_.schedule) {
    case SchedulePolicy::Sequential: return run_sequential();
    case SchedulePolicy::Static: return run_static();
    case SchedulePolicy::Dynamic: return run_dynamic();
  }
  throw ValidationError("unknown schedule");
}

ConvergenceReport Engine::run_sequential() {
  ConvergenceReport rep;
  int pairs = model_.T - 1;
  VisitOpts opts;
  auto budget_left = [&] {
    return config_.max_updates <= 0 || rep.updates < config_.max_updates;
  };
  for (int round = 0; round < config_.max_rounds && budget_left(); ++round) {
    double round_max = 0.0;
    auto sweep = [&](int p) {
      if (!budget_left()) return;
      VisitResult r = visit(*asm_, timers_, p, opts);
      round_max = std::max({round_max, r.message_change, r.site_change});
      pending_[p] = r.site_change;
      bump_neighbours(p);
      ++rep.updates;
    };
    for (int p = 0; p < pairs; ++p) sweep(p);
    for (int p = pairs - 2; p >= 0; --p) sweep(p);
    ++rep.rounds;
    rep.round_max_update.push_back(round_max);
    rep.final_max_update = round_max;
    if (round_max < config_.tol) {
      rep.converged = true;
      break;
    }
    maybe_stabilise(rep.round_max_update);
  }
  return rep;
}

ConvergenceReport Engine::run_static() {
  ConvergenceReport rep;
  int pairs = model_.T - 1;
  for (int round = 0; round < config_.max_rounds; ++round) {
    double round_max = 0.0;
    // forward-backward iterations of the temporal messages with sites frozen
    VisitOpts mp_only{true, true, false, 1};
    for (int it = 0; it < config_.max_rounds; ++it) {
      double mp_max = 0.0;
      for (int p = 0; p < pairs; ++p) {
        VisitResult r = visit(*asm_, timers_, p, mp_only);
        mp_max = std::max(mp_max, r.message_change);
        ++rep.updates;
      }
      for (int p = pairs - 2; p >= 0; --p) {
        VisitResult r = visit(*asm_, timers_, p, mp_only);
        mp_max = std::max(mp_max, r.message_change);
        ++rep.updates;
      }
      round_max = std::max(round_max, mp_max);
      if (mp_max < config_.tol) break;
    }
    // one parallel site refresh per pair
    VisitOpts sites_only{false, false, true, 1};
    double site_max = 0.0;
    for (int p = 0; p < pairs; ++p) {
      VisitResult r = visit(*asm_, timers_, p, sites_only);
      site_max = std::max(site_max, r.site_change);
      ++rep.updates;
    }
    round_max = std::max(round_max, site_max);
    ++rep.rounds;
    rep.round_max_update.push_back(round_max);
    rep.final_max_update = round_max;
    if (site_max < config_.tol) {
      rep.converged = true;
      break;
    }
  }
  return rep;
}

ConvergenceReport Engine::run_dynamic() {
  ConvergenceReport rep;
  int pairs = model_.T - 1;
  int width = std::max(1, config_.dynamic_width);
  long long budget = 2LL * config_.max_rounds * pairs;
  if (config_.max_updates > 0) budget = std::min(budget, config_.max_updates);
  VisitOpts opts;
  while (rep.updates < budget) {
    // pick up to `width` disjoint pairs with the largest pending updates
    std::vector<int> order(pairs);
    for (int p = 0; p < pairs; ++p) order[p] = p;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (pending_[a] != pending_[b]) return pending_[a] > pending_[b];
      return a < b;
    });
    std::vector<int> batch;
    std::vector<char> blocked(pairs, 0);
    for (int p : order) {
      if (pending_[p] < config_.tol) break;
      if (blocked[p]) continue;
      batch.push_back(p);
      for (int d = -1; d <= 1; ++d) {
        int q = p + d;
        if (q >= 0 && q < pairs) blocked[q] = 1;
      }
      if (int(batch.size()) == width) break;
    }
    if (batch.empty()) {
      rep.converged = true;
      break;
    }
    std::sort(batch.begin(), batch.end());

    double batch_max = 0.0;
    if (config_.threads > 1 && batch.size() > 1) {
      while (pool_.size() < batch.size())
        pool_.push_back(std::make_unique<gauss::TwoSliceAssembler>(*asm_));
      std::vector<std::future<VisitResult>> futs;
      std::vector<PhaseTimers> tms(batch.size());
      for (size_t i = 0; i < batch.size(); ++i)
        futs.push_back(std::async(std::launch::async, [&, i] {
          return visit(*pool_[i], tms[i], batch[i], opts);
        }));
      for (size_t i = 0; i < batch.size(); ++i) {
        VisitResult r = futs[i].get();
        batch_max = std::max({batch_max, r.message_change, r.site_change});
        pending_[batch[i]] = r.site_change;
        timers_.projection += tms[i].projection;
        timers_.linalg += tms[i].linalg;
        timers_.sites += tms[i].sites;
        timers_.overhead += tms[i].overhead;
        ++rep.updates;
      }
      for (int p : batch) bump_neighbours(p);
    } else {
      for (int p : batch) {
        VisitResult r = visit(*asm_, timers_, p, opts);
        batch_max = std::max({batch_max, r.message_change, r.site_change});
        pending_[p] = r.site_change;
        bump_neighbours(p);
        ++rep.updates;
      }
    }
    ++rep.rounds;
    rep.round_max_update.push_back(batch_max);
    rep.final_max_update = batch_max;
    if (rep.rounds % (2 * pairs) == 0) maybe_stabilise(rep.round_max_update);
  }
  if (!rep.converged) {
    double mx = 0.0;
    for (double p : pending_) mx = std::max(mx, p);
    rep.converged = mx < config_.tol;
  }
  return rep;
}

std::vector<double> Engine::filter_evidence() {
  int n = model_.n, T = model_.T;
  Messages saved = std::move(msgs_);
  bool saved_mode = filter_mode_;
  filter_mode_ = true;
  reset_messages();

  // Posterior for x_0 from the diagonal prior and its own sites; exact
  // per-coordinate moment matching. Their evidence is not part of the
  // one-step-ahead sum.
  for (int j = 0; j < n; ++j) {
    SiteFunction f = full_site(0, j);
    if (f.kind == SiteFunction::Kind::Absent) continue;
    Gauss1 prior{model_.prior_mean[j] / model_.prior_var[j], 1.0 / model_.prior_var[j]};
    sites::TiltedMoments tm = sites::tilted_moments(f, prior, config_.gh_nodes);
    Gauss1 post = gauss::from_moments1(tm.mean, tm.var);
    msgs_.alpha[0].h[j] = post.h;
    msgs_.alpha[0].Q.values[msg_pattern_.find(j, j)] = post.q;
  }

  std::vector<double> log_pred(T - 1, 0.0);
  VisitOpts opts;
  opts.update_beta = false;
  for (int p = 0; p < T - 1; ++p) {
    visit(*asm_, timers_, p, opts);
    // evidence pieces at the final inner state
    assemble_pair(*asm_, p, true, false);
    asm_->factor(config_.pivot_rel_tol);
    const auto& mean = asm_->mean();
    double ln_post = n * kLogTwoPi - 0.5 * asm_->log_det();
    for (int i = 0; i < 2 * n; ++i) ln_post += 0.5 * asm_->h()[i] * mean[i];

    assemble_pair(*asm_, p, false, false);
    asm_->factor(config_.pivot_rel_tol);
    const auto& mean0 = asm_->mean();
    double ln_prior = n * kLogTwoPi - 0.5 * asm_->log_det();
    for (int i = 0; i < 2 * n; ++i) ln_prior += 0.5 * asm_->h()[i] * mean0[i];

    double log_c = 0.0;
    for (int j = 0; j < n; ++j) {
      SiteFunction f = full_site(p + 1, j);
      if (f.kind == SiteFunction::Kind::Absent) continue;
      const SiteMessagePair& sp = msgs_.sites[p + 1][j];
      if (!(sp.laml.q > 0.0)) throw ImproperTilted();
      sites::TiltedMoments tm = sites::tilted_moments(f, sp.laml, config_.gh_nodes);
      log_c += tm.log_z -
               log_gauss_site_integral(sp.lam0.h, sp.lam0.q, sp.laml.h, sp.laml.q);
    }
    log_pred[p] = ln_post - ln_prior + log_c;
  }

  msgs_ = std::move(saved);
  filter_mode_ = saved_mode;
  return log_pred;
}

double Engine::evidence_proxy() {
  auto terms = filter_evidence();
  double s = 0.0;
  for (double v : terms) s += v;
  return s;
}

SmoothedMarginals Engine::extract_marginals() {
  int n = model_.n, T = model_.T;
  SmoothedMarginals out;
  out.n = n;
  out.T = T;
  out.mean.assign(T, std::vector<double>(n, 0.0));
  out.var.assign(T, std::vector<double>(n, 0.0));
  out.tilted_mean.assign(T, std::vector<double>(n, 0.0));
  out.tilted_var.assign(T, std::vector<double>(n, 0.0));
  for (int p = 0; p < T - 1; ++p) {
    assemble_pair(*asm_, p);
    asm_->factor(config_.pivot_rel_tol);
    const auto& mean = asm_->mean();
    const auto& zv = asm_->selected_cov_values();
    for (int j = 0; j < n; ++j) {
      out.mean[p][j] = mean[j];
      out.var[p][j] = zv[diag_first_pos_[j]];
    }
    if (p == T - 2)
      for (int j = 0; j < n; ++j) {
        out.mean[p + 1][j] = mean[n + j];
        out.var[p + 1][j] = zv[diag_second_pos_[j]];
      }
  }
  for (int t = 0; t < T; ++t)
    for (int j = 0; j < n; ++j) {
      out.tilted_mean[t][j] = out.mean[t][j];
      out.tilted_var[t][j] = out.var[t][j];
      if (model_.site_fns.empty()) continue;
      const SiteFunction& f = model_.site_fns[t][j];
      if (f.kind != SiteFunction::Kind::ExpCox) continue;
      Gauss1 marg = gauss::from_moments1(out.mean[t][j], out.var[t][j]);
      Gauss1 cav = marg - msgs_.sites[t][j].lam0;
      if (!(cav.q > 0.0)) continue;
      sites::TiltedMoments tm = sites::tilted_moments(f, cav, config_.gh_nodes);
      out.tilted_mean[t][j] = tm.mean;
      out.tilted_var[t][j] = tm.var;
    }
  return out;
}

SufficientStats Engine::extract_sufficient_stats() {
  int n = model_.n, T = model_.T;
  SufficientStats st;
  st.n = n;
  st.transitions = T - 1;
  st.sum_xx_first = stats_pattern_;
  st.sum_xx_first.values.assign(stats_pattern_.nnz(), 0.0);
  st.sum_cross = cross_pattern_;
  st.sum_cross.values.assign(cross_pattern_.nnz(), 0.0);
  st.sum_sq_second.assign(n, 0.0);
  st.sum_x_first.assign(n, 0.0);
  st.sum_x_second.assign(n, 0.0);

  for (int p = 0; p < T - 1; ++p) {
    assemble_pair(*asm_, p);
    asm_->factor(config_.pivot_rel_tol);
    const auto& mean = asm_->mean();
    const auto& zv = asm_->selected_cov_values();
    {
      size_t k = 0;
      for (int j = 0; j < n; ++j)
        for (int i : stats_pattern_.col_rows(j)) {
          st.sum_xx_first.values[k] += zv[stats_pos_[k]] + mean[i] * mean[j];
          ++k;
        }
    }
    {
      size_t k = 0;
      for (int i = 0; i < n; ++i)
        for (int j : cross_pattern_.row_cols(i)) {
          st.sum_cross.values[k] += zv[cross_pos_[k]] + mean[n + i] * mean[j];
          ++k;
        }
    }
    for (int j = 0; j < n; ++j) {
      st.sum_sq_second[j] += zv[diag_second_pos_[j]] + mean[n + j] * mean[n + j];
      st.sum_x_first[j] += mean[j];
      st.sum_x_second[j] += mean[n + j];
    }
  }
  return st;
}

WeakConsistencyReport Engine::weak_consistency_report() {
  int T = model_.T;
  WeakConsistencyReport rep;
  rep.residual.assign(T, 0.0);
  std::vector<CanonicalGaussian> proj_first(T - 1), proj_second(T - 1);
  std::vector<char> ok(T - 1, 0);
  for (int p = 0; p < T - 1; ++p) {
    try {
      assemble_pair(*asm_, p);
      asm_->factor(config_.pivot_rel_tol);
      asm_->mean();
      asm_->selected_cov_values();
      proj_first[p] = project_slice(*asm_, false);
      proj_second[p] = project_slice(*asm_, true);
      ok[p] = 1;
    } catch (const NotPositiveDefinite&) {
      // an unconverged state may assemble an improper joint; report the
      // affected slots as infinitely inconsistent instead of failing
    }
  }
  for (int t = 1; t + 1 < T; ++t) {
    rep.residual[t] = (ok[t - 1] && ok[t])
                          ? gauss::canonical_distance(proj_second[t - 1], proj_first[t])
                          : kInf;
    rep.max_residual = std::max(rep.max_residual, rep.residual[t]);
  }
  return rep;
}

CanonicalGaussian Engine::pair_joint(int pair) {
  if (pair < 0 || pair >= model_.T - 1) throw ValidationError("pair index out of range");
  assemble_pair(*asm_, pair);
  CanonicalGaussian joint;
  joint.h.assign(asm_->h().begin(), asm_->h().end());
  joint.Q = asm_->pattern();
  joint.Q.values.assign(asm_->values().begin(), asm_->values().end());
  return joint;
}

double Engine::pair_precision_logdet(int pair) {
  if (pair < 0 || pair >= model_.T - 1) throw ValidationError("pair index out of range");
  assemble_pair(*asm_, pair);
  asm_->factor(config_.pivot_rel_tol);
  return asm_->log_det();
}

DenseMat Engine::slice_cov_dense(int pair, bool second) {
  if (pair < 0 || pair >= model_.T - 1) throw ValidationError("pair index out of range");
  int n = model_.n;
  assemble_pair(*asm_, pair);
  asm_->factor(config_.pivot_rel_tol);
  const auto& zv = asm_->selected_cov_values();
  int off = second ? n : 0;
  std::vector<int> is, js;
  is.reserve(size_t(n) * (n + 1) / 2);
  js.reserve(is.capacity());
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      is.push_back(i + off);
      js.push_back(j + off);
    }
  auto pos = sparse::CovLookup::build(asm_->symbolic(), is, js).pos;
  DenseMat v(n, n);
  size_t k = 0;
  for (int j = 0; j < n; ++j)
    for (int i = j; i < n; ++i) {
      v(i, j) = v(j, i) = zv[pos[k++]];
    }
  return v;
}

}  // namespace stamp::engine
