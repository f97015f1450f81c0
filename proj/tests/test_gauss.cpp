#include <cmath>

#include "doctest.h"
#include "stamp/gauss/project.hpp"
#include "stamp/gauss/two_slice.hpp"
#include "test_helpers.hpp"

using namespace stamp;
using namespace stamp::gauss;
using namespace stamp::sparse;
using namespace testutil;

namespace {

SparseSym diag_sym(std::vector<double> d) {
  int n = int(d.size());
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  return sym_from_triplets(n, idx, idx, d);
}

SparseSym empty_edges(int n) { return sym_from_triplets(n, {}, {}, {}, false); }

TransitionExpectations scalar_model(double a, double q) {
  TransitionExpectations ex;
  ex.eatqa = diag_sym({a * a * q});
  ex.eqa = gen_from_triplets(1, 1, std::vector<int>{0}, std::vector<int>{0},
                             std::vector<double>{q * a});
  ex.eq = diag_sym({q});
  return ex;
}

}  // namespace

TEST_CASE("two-slice assembly: scalar transition expands to the closed form") {
  double a = 0.7, q = 2.5;
  SparseSym msg = empty_edges(1);
  CanonicalGaussian alpha = zero_message(pattern_with_diagonal(msg));
  CanonicalGaussian beta = alpha;
  TwoSliceMarginal ts = assemble_two_slice(scalar_model(a, q), msg, alpha, beta, {}, {}, {});
  CHECK(ts.joint.Q.at(0, 0) == doctest::Approx(a * a * q));
  CHECK(ts.joint.Q.at(1, 0) == doctest::Approx(-a * q));
  CHECK(ts.joint.Q.at(1, 1) == doctest::Approx(q));
}

TEST_CASE("two-slice assembly: identity blocks give the singular difference form") {
  int n = 3;
  std::vector<double> ones(n, 1.0);
  TransitionExpectations ex;
  ex.eatqa = diag_sym(ones);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  ex.eqa = gen_from_triplets(n, n, idx, idx, ones);
  ex.eq = diag_sym(ones);
  SparseSym msg = empty_edges(n);
  CanonicalGaussian zero = zero_message(pattern_with_diagonal(msg));
  TwoSliceMarginal ts = assemble_two_slice(ex, msg, zero, zero, {}, {}, {});
  for (int i = 0; i < n; ++i) {
    CHECK(ts.joint.Q.at(i, i) == doctest::Approx(1.0));
    CHECK(ts.joint.Q.at(n + i, i) == doctest::Approx(-1.0));
    CHECK(ts.joint.Q.at(n + i, n + i) == doctest::Approx(1.0));
  }
  // singular: flagged only at factorisation
  CHECK_THROWS_AS(ts.assembler->factor(), NotPositiveDefinite);
}

TEST_CASE("two-slice assembly: n=2 with posterior-uncertain transition vs dense oracle") {
  // E[A'QA] != E[A]'E[Q]E[A]: add a PSD row-covariance contribution.
  double q0 = 2.0, q1 = 3.0;
  DenseMat ea(2, 2);
  ea(0, 0) = 0.5;
  ea(0, 1) = 0.2;
  ea(1, 0) = -0.3;
  ea(1, 1) = 0.6;
  DenseMat c0(2, 2), c1(2, 2);  // row posterior covariances
  c0(0, 0) = 0.10; c0(0, 1) = 0.02; c0(1, 0) = 0.02; c0(1, 1) = 0.05;
  c1(0, 0) = 0.07; c1(0, 1) = -0.01; c1(1, 0) = -0.01; c1(1, 1) = 0.04;
  DenseMat eatqa(2, 2);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k)
      eatqa(j, k) = q0 * (ea(0, j) * ea(0, k) + c0(j, k)) +
                    q1 * (ea(1, j) * ea(1, k) + c1(j, k));
  TransitionExpectations ex;
  {
    std::vector<int> is, js;
    std::vector<double> vs;
    for (int j = 0; j < 2; ++j)
      for (int k = 0; k <= j; ++k) {
        is.push_back(j);
        js.push_back(k);
        vs.push_back(eatqa(j, k));
      }
    ex.eatqa = sym_from_triplets(2, is, js, vs);
  }
  {
    std::vector<int> is, js;
    std::vector<double> vs;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        is.push_back(i);
        js.push_back(j);
        vs.push_back((i == 0 ? q0 : q1) * ea(i, j));
      }
    ex.eqa = gen_from_triplets(2, 2, is, js, vs);
  }
  ex.eq = diag_sym({q0, q1});

  // messages with band-1 structure, plus sites on the second slice
  SparseSym edges = sym_from_triplets(2, {1}, {0}, {}, false);
  SparseSym msgpat = pattern_with_diagonal(edges);
  CanonicalGaussian alpha = zero_message(msgpat);
  alpha.h = {0.3, -0.2};
  alpha.Q.values = {0.8, 0.1, 0.9};  // (0,0),(1,0),(1,1)
  CanonicalGaussian beta = zero_message(msgpat);
  beta.h = {-0.1, 0.4};
  beta.Q.values = {0.5, -0.05, 0.6};
  std::vector<double> l0h = {0.2, 0.1}, l0q = {0.3, 0.25}, hy = {1.0, -0.5};

  TwoSliceMarginal ts = assemble_two_slice(ex, edges, alpha, beta, l0h, l0q, hy);

  DenseMat expect(4, 4);
  for (int j = 0; j < 2; ++j)
    for (int k = 0; k < 2; ++k) {
      expect(j, k) = eatqa(j, k) + to_dense(alpha.Q)(j, k);
      expect(2 + j, k) = -(j == 0 ? q0 : q1) * ea(j, k);
      expect(k, 2 + j) = expect(2 + j, k);
      expect(2 + j, 2 + k) = to_dense(beta.Q)(j, k);
    }
  expect(2, 2) += q0 + l0q[0];
  expect(3, 3) += q1 + l0q[1];
  CHECK(max_abs_diff(to_dense(ts.joint.Q), expect) <= 1e-14);
  for (int j = 0; j < 2; ++j) {
    CHECK(ts.joint.h[j] == doctest::Approx(alpha.h[j]));
    CHECK(ts.joint.h[2 + j] == doctest::Approx(beta.h[j] + hy[j] + l0h[j]));
  }
}

TEST_CASE("selected moments: decoupled diagonal case") {
  SparseSym msg = empty_edges(1);
  CanonicalGaussian alpha = zero_message(pattern_with_diagonal(msg));
  alpha.h = {2.0};
  alpha.Q.values = {2.0};
  CanonicalGaussian beta = zero_message(pattern_with_diagonal(msg));
  TransitionExpectations ex = scalar_model(0.0, 2.0);
  std::vector<double> hy = {4.0};
  TwoSliceMarginal ts = assemble_two_slice(ex, msg, alpha, beta, {}, {}, hy);
  MomentGaussian mom = selected_moments(ts);
  CHECK(mom.mean[0] == doctest::Approx(1.0));
  CHECK(mom.mean[1] == doctest::Approx(2.0));
  CHECK(mom.V.at(0, 0) == doctest::Approx(0.5));
  CHECK(mom.V.at(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("selected moments: coupled case and n=20 random joint vs dense inverse") {
  Rng rng(3);
  for (int n : {2, 20}) {
    TransitionExpectations ex;
    SparseGen a;
    {
      std::vector<int> is, js;
      std::vector<double> vs;
      for (int i = 0; i < n; ++i) {
        is.push_back(i);
        js.push_back(i);
        vs.push_back(0.6);
        if (i + 1 < n) {
          is.push_back(i);
          js.push_back(i + 1);
          vs.push_back(0.2 + 0.1 * rng.normal());
        }
      }
      a = gen_from_triplets(n, n, is, js, vs);
    }
    std::vector<double> qd(n);
    for (auto& v : qd) v = 1.5 + rng.uniform();
    SparseSym q = diag_sym(qd);
    ex.eq = q;
    ex.eqa = qa_product(q, a);
    ex.eatqa = atqa(a, q);
    SparseSym edges = chain_structure(n);
    CanonicalGaussian alpha = zero_message(pattern_with_diagonal(edges));
    for (auto& v : alpha.Q.values) v = 0.0;
    for (int i = 0; i < n; ++i) {
      alpha.Q.values[alpha.Q.find(i, i)] = 0.5 + rng.uniform();
      alpha.h[i] = rng.normal();
    }
    CanonicalGaussian beta = alpha;
    std::vector<double> l0q(n), l0h(n), hy(n);
    for (int i = 0; i < n; ++i) {
      l0q[i] = rng.uniform();
      l0h[i] = rng.normal();
      hy[i] = rng.normal();
    }
    TwoSliceMarginal ts = assemble_two_slice(ex, edges, alpha, beta, l0h, l0q, hy);
    MomentGaussian mom = selected_moments(ts);

    DenseMat qd2 = to_dense(ts.joint.Q);
    DenseMat vinv = spd_inverse(qd2);
    auto mexp = matvec(vinv, std::vector<double>(ts.joint.h.begin(), ts.joint.h.end()));
    for (int i = 0; i < 2 * n; ++i) CHECK(std::abs(mom.mean[i] - mexp[i]) <= 1e-9);
    for (int j = 0; j < mom.V.n; ++j)
      for (int p = mom.V.col_ptr[j]; p < mom.V.col_ptr[j + 1]; ++p)
        CHECK(std::abs(mom.V.values[p] - vinv(mom.V.row_idx[p], j)) <= 1e-9);
  }
}

TEST_CASE("project_chordal: disconnected graph moment-matches per coordinate") {
  int n = 4;
  Rng rng(17);
  MomentGaussian mom;
  mom.mean = {0.5, -1.0, 2.0, 0.0};
  std::vector<double> var = {0.5, 1.5, 2.0, 0.25};
  mom.V = diag_sym(var);
  SparseSym edges = empty_edges(n);
  CanonicalGaussian g = project_chordal(mom, clique_decomposition(edges), edges);
  for (int i = 0; i < n; ++i) {
    CHECK(g.Q.at(i, i) == doctest::Approx(1.0 / var[i]));
    CHECK(g.h[i] == doctest::Approx(mom.mean[i] / var[i]));
  }
}

TEST_CASE("project_chordal: complete graph returns the exact inverse") {
  int n = 5;
  Rng rng(23);
  SparseSym vs = random_pd(n, 1.0, rng);
  DenseMat v = to_dense(vs);
  MomentGaussian mom;
  mom.mean.assign(n, 0.0);
  for (auto& m : mom.mean) m = rng.normal();
  mom.V = vs;
  std::vector<int> is, js;
  for (int j = 0; j < n; ++j)
    for (int i = j + 1; i < n; ++i) {
      is.push_back(i);
      js.push_back(j);
    }
  SparseSym full = sym_from_triplets(n, is, js, {}, false);
  CanonicalGaussian g = project_chordal(mom, clique_decomposition(full), full);
  DenseMat vinv = spd_inverse(v);
  CHECK(max_abs_diff(to_dense(g.Q), vinv) <= 1e-9);
}

TEST_CASE("project_chordal: tree graph satisfies the covariance-matching condition") {
  int n = 6;
  Rng rng(29);
  // tree edges: star-ish 0-1,1-2,1-3,3-4,3-5
  SparseSym tree = sym_from_triplets(n, {1, 2, 3, 4, 5}, {0, 1, 1, 3, 3}, {}, false);
  SparseSym vfull = random_pd(n, 1.0, rng);
  DenseMat v = to_dense(vfull);
  MomentGaussian mom;
  mom.mean.assign(n, 0.0);
  for (auto& m : mom.mean) m = rng.normal();
  mom.V = vfull;
  CanonicalGaussian g = project_chordal(mom, clique_decomposition(tree), tree);

  DenseMat qhat = to_dense(g.Q);
  DenseMat cov = spd_inverse(qhat);
  // (Q^{-1})_{ij} = V_{ij} on every edge of the tree and the diagonal
  for (int i = 0; i < n; ++i) CHECK(std::abs(cov(i, i) - v(i, i)) <= 1e-9);
  for (int j = 0; j < n; ++j)
    for (int i : tree.col_rows(j)) CHECK(std::abs(cov(i, j) - v(i, j)) <= 1e-9);
  // mean preserved
  auto mhat = chol_solve(cholesky_lower(qhat), std::vector<double>(g.h.begin(), g.h.end()));
  for (int i = 0; i < n; ++i) CHECK(std::abs(mhat[i] - mom.mean[i]) <= 1e-9);

  // idempotence: projecting the moments of the output reproduces it
  MomentGaussian again;
  again.mean = mhat;
  again.V = mom.V;  // pattern holder; refill from cov
  again.V = vfull;
  {
    std::vector<int> is, js;
    std::vector<double> vs2;
    for (int j = 0; j < n; ++j)
      for (int i = j; i < n; ++i) {
        is.push_back(i);
        js.push_back(j);
        vs2.push_back(cov(i, j));
      }
    again.V = sym_from_triplets(n, is, js, vs2);
  }
  CanonicalGaussian g2 = project_chordal(again, clique_decomposition(tree), tree);
  CHECK(canonical_distance(g, g2) <= 1e-10);

  // local optimality: random same-structure perturbations do not lower the KL
  double base = gaussian_kl(mom.mean, v, mhat, cov);
  for (int trial = 0; trial < 10; ++trial) {
    CanonicalGaussian gp = g;
    for (auto& val : gp.Q.values) val *= 1.0 + 0.02 * rng.normal();
    DenseMat qp = to_dense(gp.Q);
    DenseMat lp = qp;
    if (!cholesky_in_place(lp)) continue;
    DenseMat covp = spd_inverse(qp);
    auto mp = chol_solve(cholesky_lower(qp), std::vector<double>(gp.h.begin(), gp.h.end()));
    CHECK(gaussian_kl(mom.mean, v, mp, covp) >= base - 1e-12);
  }
}

TEST_CASE("gaussian_kl: identity, univariate shift, quadrature oracle in 2D") {
  std::vector<double> m0 = {0.0}, m1 = {1.0};
  DenseMat v1(1, 1);
  v1(0, 0) = 1.0;
  CHECK(gaussian_kl(m0, v1, m0, v1) == doctest::Approx(0.0));
  CHECK(gaussian_kl(m0, v1, m1, v1) == doctest::Approx(0.5));
  CHECK(gaussian_kl_sym(m0, v1, m1, v1) == doctest::Approx(0.5));

  // 2D quadrature oracle for KL(p||q)
  std::vector<double> mp = {0.2, -0.3}, mq = {-0.1, 0.4};
  DenseMat vp(2, 2), vq(2, 2);
  vp(0, 0) = 1.0; vp(0, 1) = vp(1, 0) = 0.3; vp(1, 1) = 0.8;
  vq(0, 0) = 1.4; vq(0, 1) = vq(1, 0) = -0.2; vq(1, 1) = 1.1;
  auto logpdf = [](const std::vector<double>& m, const DenseMat& v, double x, double y) {
    DenseMat l = v;
    cholesky_in_place(l);
    std::vector<double> d = {x - m[0], y - m[1]};
    auto s = chol_solve(l, d);
    double quad = d[0] * s[0] + d[1] * s[1];
    return -0.5 * quad - 0.5 * chol_logdet(l) - std::log(2.0 * M_PI);
  };
  double acc = 0.0;
  int grid = 400;
  double lo = -8.0, hi = 8.0, step = (hi - lo) / grid;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      double x = lo + (i + 0.5) * step, y = lo + (j + 0.5) * step;
      double lp = logpdf(mp, vp, x, y);
      double lq = logpdf(mq, vq, x, y);
      acc += std::exp(lp) * (lp - lq) * step * step;
    }
  CHECK(std::abs(gaussian_kl(mp, vp, mq, vq) - acc) <= 1e-6);
}

TEST_CASE("divide: cancellation and univariate parameter subtraction") {
  SparseSym edges = sym_from_triplets(2, {1}, {0}, {}, false);
  CanonicalGaussian x = zero_message(pattern_with_diagonal(edges));
  x.h = {3.0, -1.0};
  x.Q.values = {2.0, 0.5, 1.5};
  CanonicalGaussian z = divide(x, x);
  for (double v : z.h) CHECK(v == 0.0);
  for (double v : z.Q.values) CHECK(v == 0.0);

  CanonicalGaussian a = zero_message(pattern_with_diagonal(empty_edges(1)));
  a.h = {3.0};
  a.Q.values = {2.0};
  CanonicalGaussian b = a;
  b.h = {1.0};
  b.Q.values = {0.5};
  CanonicalGaussian c = divide(a, b);
  CHECK(c.h[0] == doctest::Approx(2.0));
  CHECK(c.Q.values[0] == doctest::Approx(1.5));
}

TEST_CASE("assembled precision stays PD for exact posterior moments") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 3 + rng.uniform_int(6);
    // random supports and row posteriors with PSD second moments
    DenseMat ea(n, n);
    DenseMat extra(n, n);  // sum_i q_i C_i accumulated
    std::vector<double> qd(n);
    for (auto& v : qd) v = 0.5 + 2.0 * rng.uniform();
    std::vector<int> is, js;
    std::vector<double> vs;
    DenseMat eatqa(n, n);
    for (int i = 0; i < n; ++i) {
      std::vector<int> supp;
      for (int j = 0; j < n; ++j)
        if (j == i || rng.uniform() < 0.4) supp.push_back(j);
      int m = int(supp.size());
      std::vector<double> mean(m);
      for (auto& v : mean) v = 0.5 * rng.normal();
      DenseMat half(m, m);
      for (auto& v : half.a) v = 0.3 * rng.normal();
      DenseMat cov = half * half.transposed();
      for (int aix = 0; aix < m; ++aix) {
        ea(i, supp[aix]) = mean[aix];
        for (int bix = 0; bix < m; ++bix)
          eatqa(supp[aix], supp[bix]) +=
              qd[i] * (mean[aix] * mean[bix] + cov(aix, bix));
      }
    }
    for (int j = 0; j < n; ++j)
      for (int k = 0; k <= j; ++k)
        if (eatqa(j, k) != 0.0 || j == k) {
          is.push_back(j);
          js.push_back(k);
          vs.push_back(eatqa(j, k));
        }
    TransitionExpectations ex;
    ex.eatqa = sym_from_triplets(n, is, js, vs);
    {
      std::vector<int> ia, ja;
      std::vector<double> va;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (ea(i, j) != 0.0) {
            ia.push_back(i);
            ja.push_back(j);
            va.push_back(qd[i] * ea(i, j));
          }
      ex.eqa = gen_from_triplets(n, n, ia, ja, va);
    }
    ex.eq = diag_sym(qd);
    SparseSym edges = empty_edges(n);
    CanonicalGaussian alpha = zero_message(pattern_with_diagonal(edges));
    CanonicalGaussian beta = alpha;
    std::vector<double> l0q(n);
    for (int i = 0; i < n; ++i) {
      alpha.Q.values[i] = rng.uniform();  // PSD diagonal messages
      beta.Q.values[i] = rng.uniform();
      l0q[i] = rng.uniform();
    }
    std::vector<double> l0h(n, 0.0), hy(n, 0.0);
    TwoSliceMarginal ts = assemble_two_slice(ex, edges, alpha, beta, l0h, l0q, hy);
    CHECK_NOTHROW(ts.assembler->factor(1e-14));
  }
}
