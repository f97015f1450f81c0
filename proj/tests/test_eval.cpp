#include <cmath>

#include "doctest.h"
#include "stamp/eval/metrics.hpp"
#include "stamp/models/builders.hpp"
#include "stamp/models/simulate.hpp"
#include "test_helpers.hpp"

using namespace stamp;
using namespace stamp::eval;
using namespace testutil;

TEST_CASE("kl_accuracy: zero at identity, closed form on hand Gaussians, symmetric") {
  JointMoments p;
  p.mean = {0.0, 1.0};
  p.cov = DenseMat(2, 2);
  p.cov(0, 0) = 1.0;
  p.cov(1, 1) = 2.0;
  p.cov(0, 1) = p.cov(1, 0) = 0.5;
  JointMoments q;
  q.mean = {0.5, 0.5};
  q.cov = DenseMat(2, 2);
  q.cov(0, 0) = 1.5;
  q.cov(1, 1) = 1.0;
  q.cov(0, 1) = q.cov(1, 0) = -0.2;

  CHECK(kl_accuracy({p}, {p}) == doctest::Approx(0.0));
  double direct = 0.5 * (gauss::gaussian_kl(p.mean, p.cov, q.mean, q.cov) +
                         gauss::gaussian_kl(q.mean, q.cov, p.mean, p.cov));
  // T = 2 means one pair
  CHECK(kl_accuracy({p}, {q}) == doctest::Approx(direct));
  CHECK(kl_accuracy({p}, {q}) == doctest::Approx(kl_accuracy({q}, {p})));
}

TEST_CASE("normal_quantile inverts the gaussian cdf") {
  for (double p : {0.001, 0.025, 0.2, 0.5, 0.81, 0.975, 0.999}) {
    double x = normal_quantile(p);
    double cdf = 0.5 * std::erfc(-x / std::sqrt(2.0));
    CHECK(std::abs(cdf - p) <= 1e-13);
  }
}

namespace {

double qq_of_samples(std::vector<double> residuals, int bins = 50) {
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

}  // namespace

TEST_CASE("qq deviation: standard normal samples are near zero, a shift reads as one") {
  Rng rng(6);
  std::vector<double> z(1000000);
  for (auto& v : z) v = rng.normal();
  CHECK(qq_of_samples(z) <= 0.01);
  for (auto& v : z) v += 1.0;
  CHECK(qq_of_samples(z) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("qq deviation: whitened residuals from a well-specified gaussian run") {
  models::ModelSpec spec = models::build_1d_model(8, 1, 0.025, 0.25, 0.0);
  spec.obs.kind = models::ObsModel::Kind::Gaussian;
  auto sim = models::simulate(spec, 40, 4);
  auto em = models::to_engine_model(spec, sim.data);
  sparse::SparseSym s_a = sparse::structure_of(spec.a);
  engine::EngineConfig cfg;
  cfg.tol = 1e-9;
  engine::Engine eng(em, engine::build_message_structure(s_a, engine::MessageFamily::full()),
                     cfg);
  eng.run();
  double dev = qq_deviation(eng, sim.path);
  // exact posterior; deviation is pure sampling noise of ~600 residuals
  CHECK(dev <= 0.2);
}

TEST_CASE("structure_roc: perfect, random and monotone-invariant") {
  std::vector<double> scores = {0.9, 0.8, 0.2, 0.1};
  std::vector<bool> truth = {true, true, false, false};
  RocCurve roc = structure_roc(scores, truth);
  CHECK(roc.auc == doctest::Approx(1.0));

  Rng rng(8);
  std::vector<double> rs(2000);
  std::vector<bool> rt(2000);
  for (int i = 0; i < 2000; ++i) {
    rs[i] = rng.uniform();
    rt[i] = rng.uniform() < 0.5;
  }
  RocCurve rroc = structure_roc(rs, rt);
  CHECK(std::abs(rroc.auc - 0.5) <= 0.05);

  std::vector<double> transformed(rs.size());
  for (size_t i = 0; i < rs.size(); ++i) transformed[i] = std::exp(3.0 * rs[i]) + 1.0;
  RocCurve troc = structure_roc(transformed, rt);
  CHECK(troc.auc == doctest::Approx(rroc.auc));

  std::vector<bool> degenerate(4, true);
  CHECK_THROWS_AS(structure_roc(scores, degenerate), ValidationError);
}

TEST_CASE("one_step_predictive: flat likelihood limit contributes nothing") {
  models::ModelSpec spec = models::build_1d_model(4, 1, 0.025, 0.25, 0.0);
  {
    std::vector<int> idx = {0, 1, 2, 3};
    std::vector<double> qv(4, 4.0);
    spec.q = sparse::sym_from_triplets(4, idx, idx, qv);
  }
  auto em = models::to_engine_model(spec, [] {
    models::EventData d;
    d.T = 5;
    d.kind = models::ObsModel::Kind::Gaussian;
    d.gaussian_obs.assign(5, {});
    return d;
  }());
  // replace the sites with near-vanishing exposure weights and no events
  em.h_data.assign(5, std::vector<double>(4, 0.0));
  for (auto& row : em.site_fns)
    for (auto& s : row) s = sites::SiteFunction::expcox(0.0, 1e-12);
  sparse::SparseSym s_a = sparse::structure_of(spec.a);
  engine::Engine eng(em, engine::build_message_structure(s_a, engine::MessageFamily::full()),
                     {});
  auto terms = one_step_predictive(eng);
  for (double v : terms) CHECK(std::abs(v) <= 1e-6);
}
