#pragma once

#include <functional>

#include "stamp/gauss/canonical.hpp"
#include "stamp/sparse/chordal.hpp"

namespace stamp::gauss {

// Moment-matching projection onto the Gaussian family with precision
// structure restricted to the chordal graph G. The optimum has closed form:
// with cliques in running-intersection order and clique covariance blocks
//   B_k = V_{S_k,S_k}^{-1} V_{S_k,R_k},
//   D_k = [V_{R_k,R_k} - V_{R_k,S_k} B_k]^{-1},
// the projected precision accumulates w_k D_k w_k' per clique, where w_k is
// the identity on R_k stacked with -B_k on S_k. The inverse of the result
// reproduces V on every edge of G.
class ChordalProjector {
 public:
  ChordalProjector(const sparse::CliqueDecomposition& cliques,
                   const sparse::SparseSym& g_edges);

  // `clique_cov` must fill the dense members-by-members covariance block of
  // clique k (ordered like cliques[k].members).
  CanonicalGaussian project(std::span<const double> mean,
                            const std::function<void(int, DenseMat&)>& clique_cov) const;

  const sparse::SparseSym& pattern() const { return pattern_; }
  const sparse::CliqueDecomposition& cliques() const { return cliques_; }

 private:
  sparse::CliqueDecomposition cliques_;
  sparse::SparseSym pattern_;  // diag + G edges, lower
  // per clique: local separator/residual positions and scatter positions of
  // the members-by-members block into the pattern value array
  struct CliquePlan {
    std::vector<int> sep_pos, res_pos;
    std::vector<int> scatter;  // (m*(m+1)/2) positions, row-major lower
  };
  std::vector<CliquePlan> plans_;
};

// One-shot convenience: V entries are read from mom.V (which must cover all
// edges of G and the diagonal).
CanonicalGaussian project_chordal(const MomentGaussian& mom,
                                  const sparse::CliqueDecomposition& cliques,
                                  const sparse::SparseSym& g_edges);

}  // namespace stamp::gauss
