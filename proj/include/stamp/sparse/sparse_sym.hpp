#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "stamp/util/error.hpp"

namespace stamp::sparse {

// Symmetric sparse matrix in compressed-column form. Only the lower triangle
// (diagonal included when present) is stored; row indices are strictly
// increasing within each column. An empty `values` array marks a
// structure-only object.
struct SparseSym {
  int n = 0;
  std::vector<int> col_ptr;  // size n+1
  std::vector<int> row_idx;  // row >= column
  std::vector<double> values;

  SparseSym() = default;
  explicit SparseSym(int dim) : n(dim), col_ptr(dim + 1, 0) {}

  int nnz() const { return col_ptr.empty() ? 0 : col_ptr.back(); }
  bool structure_only() const { return values.empty() && nnz() > 0; }

  std::span<const int> col_rows(int j) const {
    return {row_idx.data() + col_ptr[j], size_t(col_ptr[j + 1] - col_ptr[j])};
  }

  // Position of entry (i, j) with i >= j, or -1 when absent.
  int find(int i, int j) const;

  // Entry value at (i, j) in either triangle; zero when absent.
  double at(int i, int j) const;

  void check_invariants() const;

  // y += M x treating the stored lower triangle as a symmetric matrix.
  void sym_matvec_add(std::span<const double> x, std::span<double> y) const;
};

// Builds a SparseSym from (i, j, v) triplets given in any order and triangle;
// duplicate entries are summed. Pass `with_values = false` for structures.
SparseSym sym_from_triplets(int n, std::span<const int> is, std::span<const int> js,
                            std::span<const double> vs, bool with_values = true);

inline SparseSym sym_from_triplets(int n, std::initializer_list<int> is,
                                   std::initializer_list<int> js,
                                   std::initializer_list<double> vs,
                                   bool with_values = true) {
  return sym_from_triplets(n, std::span<const int>(is.begin(), is.size()),
                           std::span<const int>(js.begin(), js.size()),
                           std::span<const double>(vs.begin(), vs.size()), with_values);
}

// Pattern union of the lower-triangular structures (values dropped).
SparseSym pattern_union(const SparseSym& a, const SparseSym& b);

// Pattern with all n diagonal entries present.
SparseSym pattern_with_diagonal(const SparseSym& a);

// Strictly-lower edge structure (drops the diagonal and values).
SparseSym strict_lower(const SparseSym& a);

bool same_pattern(const SparseSym& a, const SparseSym& b);

// Adjacency lists (both triangles, no diagonal), each sorted ascending.
std::vector<std::vector<int>> adjacency(const SparseSym& s);

// General (rectangular/unsymmetric) sparse matrix in compressed-row form.
struct SparseGen {
  int rows = 0;
  int cols = 0;
  std::vector<int> row_ptr;
  std::vector<int> col_idx;
  std::vector<double> values;

  SparseGen() = default;
  SparseGen(int r, int c) : rows(r), cols(c), row_ptr(r + 1, 0) {}

  int nnz() const { return row_ptr.empty() ? 0 : row_ptr.back(); }

  std::span<const int> row_cols(int i) const {
    return {col_idx.data() + row_ptr[i], size_t(row_ptr[i + 1] - row_ptr[i])};
  }
  std::span<const double> row_vals(int i) const {
    return {values.data() + row_ptr[i], size_t(row_ptr[i + 1] - row_ptr[i])};
  }

  double at(int i, int j) const;
  SparseGen transposed() const;
  std::vector<double> matvec(std::span<const double> x) const;
};

SparseGen gen_from_triplets(int rows, int cols, std::span<const int> is,
                            std::span<const int> js, std::span<const double> vs);

// A^T Q A for symmetric Q (SparseSym) and general A; result is symmetric.
SparseSym atqa(const SparseGen& a, const SparseSym& q);

// Q A with symmetric Q.
SparseGen qa_product(const SparseSym& q, const SparseGen& a);

// Symmetrised structure S(A) + S(A^T) as a strictly-lower edge structure.
SparseSym structure_of(const SparseGen& a);

}  // namespace stamp::sparse
