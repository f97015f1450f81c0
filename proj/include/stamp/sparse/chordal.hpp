#pragma once

#include <vector>

#include "stamp/sparse/cholesky.hpp"
#include "stamp/sparse/sparse_sym.hpp"

namespace stamp::sparse {

// Ordered maximal cliques of a chordal graph with separator/residual splits.
// The ordering satisfies the running-intersection property: each S_k is
// contained in a single earlier clique, and the R_k partition the vertices.
struct CliqueDecomposition {
  int n = 0;
  struct Clique {
    std::vector<int> members;    // sorted, original vertex ids
    std::vector<int> separator;  // S_k = C_k ∩ (C_1 ∪ … ∪ C_{k-1})
    std::vector<int> residual;   // R_k = C_k \ S_k
  };
  std::vector<Clique> cliques;

  int max_clique_size() const;
};

// Completes an edge structure to a chordal graph: the symmetrised pattern of
// the symbolic Cholesky factor under `perm`, mapped back to original indices.
// Output is a strictly-lower edge structure containing the input.
SparseSym chordal_complete(const SparseSym& edges, const Permutation& perm);

// Maximum-cardinality search; returns an elimination order that is perfect
// iff the graph is chordal (lowest-index tie-breaking).
Permutation mcs_order(const SparseSym& edges);

bool is_chordal(const SparseSym& edges);

// Requires a chordal edge structure (verified via MCS + zero-fill test);
// throws NotChordal otherwise. Clique order starts from the clique holding
// the lowest-eliminated vertex and walks the clique tree, so ancestors
// precede descendants.
CliqueDecomposition clique_decomposition(const SparseSym& edges);

}  // namespace stamp::sparse
