#include "stamp/gauss/project.hpp"

#include <algorithm>

namespace stamp::gauss {

ChordalProjector::ChordalProjector(const sparse::CliqueDecomposition& cliques,
                                   const sparse::SparseSym& g_edges)
    : cliques_(cliques) {
  pattern_ = sparse::pattern_with_diagonal(g_edges);
  pattern_.values.clear();
  plans_.resize(cliques_.cliques.size());
  for (size_t k = 0; k < cliques_.cliques.size(); ++k) {
    auto& c = cliques_.cliques[k];
    auto& plan = plans_[k];
    int m = int(c.members.size());
    for (int a = 0; a < m; ++a) {
      int v = c.members[a];
      if (std::binary_search(c.separator.begin(), c.separator.end(), v))
        plan.sep_pos.push_back(a);
      else
        plan.res_pos.push_back(a);
    }
    plan.scatter.reserve(size_t(m) * (m + 1) / 2);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b <= a; ++b) {
        int p = pattern_.find(c.members[a], c.members[b]);
        if (p < 0) throw MissingEntry(c.members[a], c.members[b]);
        plan.scatter.push_back(p);
      }
  }
}

CanonicalGaussian ChordalProjector::project(
    std::span<const double> mean,
    const std::function<void(int, DenseMat&)>& clique_cov) const {
  int n = pattern_.n;
  if (int(mean.size()) != n) throw DimensionMismatch("project mean");
  CanonicalGaussian out = zero_message(pattern_);

  DenseMat vcc;
  for (size_t k = 0; k < cliques_.cliques.size(); ++k) {
    auto& c = cliques_.cliques[k];
    auto& plan = plans_[k];
    int m = int(c.members.size());
    int ns = int(plan.sep_pos.size());
    int nr = int(plan.res_pos.size());
    vcc = DenseMat(m, m);
    clique_cov(int(k), vcc);

    // Schur pieces on the (sep, res) split.
    DenseMat j;  // nr x nr precision of the residual conditional
    DenseMat b;  // ns x nr
    if (ns == 0) {
      DenseMat vrr(nr, nr);
      for (int a = 0; a < nr; ++a)
        for (int bcol = 0; bcol < nr; ++bcol)
          vrr(a, bcol) = vcc(plan.res_pos[a], plan.res_pos[bcol]);
      j = spd_inverse(vrr, c.members[plan.res_pos[0]]);
    } else {
      DenseMat vss(ns, ns), vsr(ns, nr), vrr(nr, nr);
      for (int a = 0; a < ns; ++a) {
        for (int bcol = 0; bcol < ns; ++bcol)
          vss(a, bcol) = vcc(plan.sep_pos[a], plan.sep_pos[bcol]);
        for (int bcol = 0; bcol < nr; ++bcol)
          vsr(a, bcol) = vcc(plan.sep_pos[a], plan.res_pos[bcol]);
      }
      for (int a = 0; a < nr; ++a)
        for (int bcol = 0; bcol < nr; ++bcol)
          vrr(a, bcol) = vcc(plan.res_pos[a], plan.res_pos[bcol]);
      DenseMat lss = vss;
      if (!cholesky_in_place(lss)) throw SingularSeparator(int(k));
      b = DenseMat(ns, nr);
      std::vector<double> col(ns);
      for (int bcol = 0; bcol < nr; ++bcol) {
        for (int a = 0; a < ns; ++a) col[a] = vsr(a, bcol);
        chol_solve_in_place(lss, col);
        for (int a = 0; a < ns; ++a) b(a, bcol) = col[a];
      }
      DenseMat schur = vrr;
      for (int a = 0; a < nr; ++a)
        for (int bcol = 0; bcol < nr; ++bcol) {
          double s = schur(a, bcol);
          for (int t = 0; t < ns; ++t) s -= vsr(t, a) * b(t, bcol);
          schur(a, bcol) = s;
        }
      j = spd_inverse(schur, c.members[plan.res_pos.empty() ? 0 : plan.res_pos[0]]);
    }

    // w J w' restricted to the clique block: w has identity rows on the
    // residual positions and -B rows on the separator positions.
    DenseMat w(m, nr);
    for (int a = 0; a < nr; ++a) w(plan.res_pos[a], a) = 1.0;
    for (int a = 0; a < ns; ++a)
      for (int bcol = 0; bcol < nr; ++bcol) w(plan.sep_pos[a], bcol) = -b(a, bcol);
    DenseMat wj = w * j;
    // scatter-add lower triangle of wj * w'
    size_t s_idx = 0;
    for (int a = 0; a < m; ++a)
      for (int bcol = 0; bcol <= a; ++bcol) {
        double v = 0.0;
        for (int t = 0; t < nr; ++t) v += wj(a, t) * w(bcol, t);
        out.Q.values[plan.scatter[s_idx++]] += v;
      }
  }

  // h = Q_hat * m
  std::fill(out.h.begin(), out.h.end(), 0.0);
  out.Q.sym_matvec_add(mean, out.h);
  return out;
}

CanonicalGaussian project_chordal(const MomentGaussian& mom,
                                  const sparse::CliqueDecomposition& cliques,
                                  const sparse::SparseSym& g_edges) {
  ChordalProjector proj(cliques, g_edges);
  return proj.project(mom.mean, [&](int k, DenseMat& vcc) {
    auto& c = proj.cliques().cliques[k];
    int m = int(c.members.size());
    for (int a = 0; a < m; ++a)
      for (int b = 0; b <= a; ++b) {
        int p = mom.V.find(c.members[a], c.members[b]);
        if (p < 0) throw MissingEntry(c.members[a], c.members[b]);
        vcc(a, b) = vcc(b, a) = mom.V.values[p];
      }
  });
}

}  // namespace stamp::gauss
