#pragma once

#include <memory>
#include <span>
#include <vector>

#include "stamp/sparse/ordering.hpp"
#include "stamp/sparse/sparse_sym.hpp"

namespace stamp::sparse {

// Symbolic analysis of a symmetric matrix under a fixed elimination order:
// permuted pattern, elimination tree, and the exact fill-in pattern of L.
// Computed once, then reused by any number of numeric refactorisations with
// the same structure.
struct SymbolicFactor {
  Permutation perm;
  int n = 0;

  // Permuted input pattern (lower, diagonal guaranteed present) and the map
  // from its entries back into the caller's value array.
  SparseSym input_pattern;
  std::vector<int> input_value_map;

  std::vector<int> parent;  // elimination tree over permuted columns

  // L pattern, diagonal first in each column, rows ascending.
  std::vector<int> l_col_ptr;
  std::vector<int> l_rows;

  // Strict row pattern of L (CSR), columns ascending; drives the up-looking
  // numeric factorisation.
  std::vector<int> r_row_ptr;
  std::vector<int> r_cols;

  long long nnz_l() const { return l_col_ptr.empty() ? 0 : l_col_ptr.back(); }
  long long nnz_strict() const { return nnz_l() - n; }

  // Entry position of (i, j), permuted indices, i >= j; -1 if absent.
  int find_l(int i, int j) const;
};

// Pattern of `matrix` must be structurally symmetric (lower stored); the
// diagonal need not be present for structure-only analysis.
SymbolicFactor symbolic_cholesky(const SparseSym& matrix, const Permutation& perm);

// Scratch space reused across refactorisations.
struct CholWorkspace {
  std::vector<double> x;
  std::vector<int> fill;
  std::vector<double> scatter;  // dense n*n scratch for the selected inverse
  void ensure(int n, bool with_scatter);
};

class CholeskyFactor {
 public:
  CholeskyFactor() = default;
  explicit CholeskyFactor(std::shared_ptr<const SymbolicFactor> sym);

  // Numeric factorisation of `matrix`, whose pattern must equal the pattern
  // the symbolic analysis was built from. Throws NotPositiveDefinite (with
  // the original column index) when a pivot falls at or below
  // pivot_rel_tol * max diagonal.
  void refactor(const SparseSym& matrix, CholWorkspace& ws,
                double pivot_rel_tol = 1e-12);
  void refactor_values(std::span<const double> values, CholWorkspace& ws,
                       double pivot_rel_tol = 1e-12);

  const SymbolicFactor& symbolic() const { return *sym_; }
  std::span<const double> l_values() const { return l_values_; }
  bool factored() const { return factored_; }

  // Solves (L L^T) x = b in the original index space (permutation applied on
  // both sides).
  std::vector<double> solve(std::span<const double> b) const;

  // In the permuted space, overwrite x with L^{-1} x or L^{-T} x.
  void solve_lower_permuted(std::span<double> x) const;
  void solve_upper_permuted(std::span<double> x) const;

  // Selected inverse on the pattern of L via the reverse recursion on the
  // factor; output values are aligned with the L pattern (permuted indices).
  void selected_inverse_values(CholWorkspace& ws, std::vector<double>& z_values) const;

  double log_det() const;  // of the factored matrix

 private:
  bool same_pattern_input(const SparseSym& matrix) const;

  std::shared_ptr<const SymbolicFactor> sym_;
  std::vector<double> l_values_;
  bool factored_ = false;
};

// One-shot convenience used by tests and small callers.
CholeskyFactor numeric_cholesky(const SparseSym& matrix, const Permutation& perm);
CholeskyFactor numeric_cholesky(const SparseSym& matrix,
                                std::shared_ptr<const SymbolicFactor> sym);

enum class TriangularSide { Lower, Upper };

// Standalone substitution with the factor's L in original index space:
// Lower solves L y = b, Upper solves L^T y = b (both permuted consistently,
// so composing Lower then Upper yields (L L^T)^{-1} b).
std::vector<double> solve_triangular(const CholeskyFactor& f, std::span<const double> b,
                                     TriangularSide side);

// Selected inverse of the factored matrix: entries of (L L^T)^{-1} on the
// symmetrised pattern of L, permuted back to original indices.
SparseSym takahashi_selected_inverse(const CholeskyFactor& f);

// Positions of requested original-index pairs inside the L pattern, for
// repeated harvesting of selected-inverse values.
struct CovLookup {
  std::vector<int> pos;
  static CovLookup build(const SymbolicFactor& sym, std::span<const int> is,
                         std::span<const int> js);
};

}  // namespace stamp::sparse
