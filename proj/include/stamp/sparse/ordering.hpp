#pragma once

#include <vector>

#include "stamp/sparse/sparse_sym.hpp"

namespace stamp::sparse {

// Bijection on {0..n-1}. `forward[k]` is the original index eliminated at
// step k (new -> old); `inverse` is the cached old -> new map.
struct Permutation {
  std::vector<int> forward;
  std::vector<int> inverse;

  Permutation() = default;
  explicit Permutation(std::vector<int> fwd);

  static Permutation identity(int n);
  int size() const { return int(forward.size()); }
};

// Greedy minimum-degree ordering with lowest-original-index tie-breaking.
// Complete graphs short-circuit to the identity (any order is fill-free).
Permutation amd_order(const SparseSym& structure);

// Reverse Cuthill-McKee with a George-Liu pseudo-peripheral start node
// (lowest index on ties).
Permutation rcm_order(const SparseSym& structure);

// Symmetric permutation of the stored lower triangle: entry (i,j) maps to
// (inverse[i], inverse[j]) and is stored back in the lower triangle. Values
// are carried when present.
SparseSym permute_sym(const SparseSym& s, const Permutation& p);

// Number of strictly-lower nonzeros of the Cholesky factor of `structure`
// under elimination order `p` (fill metric used by the ordering tests).
long long symbolic_fill_nnz(const SparseSym& structure, const Permutation& p);

// max |i - j| over stored off-diagonal entries after applying `p`.
int bandwidth_after(const SparseSym& structure, const Permutation& p);

}  // namespace stamp::sparse
