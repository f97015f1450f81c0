#include "stamp/sparse/cholesky.hpp"

#include <algorithm>
#include <cmath>

namespace stamp::sparse {

int SymbolicFactor::find_l(int i, int j) const {
  if (i < j) return -1;
  int lo = l_col_ptr[j], hi = l_col_ptr[j + 1];
  auto it = std::lower_bound(l_rows.begin() + lo, l_rows.begin() + hi, i);
  if (it == l_rows.begin() + hi || *it != i) return -1;
  return int(it - l_rows.begin());
}

SymbolicFactor symbolic_cholesky(const SparseSym& matrix, const Permutation& perm) {
  if (perm.size() != matrix.n) throw DimensionMismatch("symbolic_cholesky perm");
  SymbolicFactor sym;
  sym.perm = perm;
  sym.n = matrix.n;
  int n = matrix.n;

  // Permute, remembering where each permuted entry came from. A missing
  // diagonal entry is added with map -1.
  {
    struct Cell {
      int row, src;
    };
    std::vector<std::vector<Cell>> cols(n);
    for (int j = 0; j < n; ++j)
      for (int p = matrix.col_ptr[j]; p < matrix.col_ptr[j + 1]; ++p) {
        int pi = perm.inverse[matrix.row_idx[p]];
        int pj = perm.inverse[j];
        if (pi < pj) std::swap(pi, pj);
        cols[pj].push_back({pi, p});
      }
    for (int j = 0; j < n; ++j) {
      auto& c = cols[j];
      std::sort(c.begin(), c.end(), [](const Cell& a, const Cell& b) { return a.row < b.row; });
      if (c.empty() || c.front().row != j) c.insert(c.begin(), {j, -1});
    }
    sym.input_pattern.n = n;
    sym.input_pattern.col_ptr.assign(n + 1, 0);
    for (int j = 0; j < n; ++j) {
      for (auto& cell : cols[j]) {
        if (int(sym.input_pattern.row_idx.size()) > sym.input_pattern.col_ptr[j] &&
            sym.input_pattern.row_idx.back() == cell.row)
          throw ValidationError("duplicate entry in matrix pattern");
        sym.input_pattern.row_idx.push_back(cell.row);
        sym.input_value_map.push_back(cell.src);
      }
      sym.input_pattern.col_ptr[j + 1] = int(sym.input_pattern.row_idx.size());
    }
  }
  const SparseSym& b = sym.input_pattern;

  // Strict row lists of the permuted input (columns j < k per row k).
  std::vector<std::vector<int>> brows(n);
  for (int j = 0; j < n; ++j)
    for (int p = b.col_ptr[j]; p < b.col_ptr[j + 1]; ++p)
      if (b.row_idx[p] != j) brows[b.row_idx[p]].push_back(j);

  // Elimination tree (Liu's algorithm with path compression).
  sym.parent.assign(n, -1);
  std::vector<int> ancestor(n, -1);
  for (int k = 0; k < n; ++k)
    for (int j : brows[k]) {
      int i = j;
      while (i != -1 && i < k) {
        int next = ancestor[i];
        ancestor[i] = k;
        if (next == -1) sym.parent[i] = k;
        i = next;
      }
    }

  // Column patterns: strict rows of column j are the strict input rows plus
  // every child pattern passed up the tree.
  std::vector<std::vector<int>> children(n);
  for (int j = 0; j < n; ++j)
    if (sym.parent[j] >= 0) children[sym.parent[j]].push_back(j);

  std::vector<std::vector<int>> pat(n);
  {
    std::vector<int> lastmark(n, -1);
    // strict rows of each column from the input
    std::vector<std::vector<int>> bcols(n);
    for (int j = 0; j < n; ++j)
      for (int p = b.col_ptr[j]; p < b.col_ptr[j + 1]; ++p)
        if (b.row_idx[p] != j) bcols[j].push_back(b.row_idx[p]);
    for (int j = 0; j < n; ++j) {
      auto& rows = pat[j];
      for (int r : bcols[j])
        if (lastmark[r] != j) {
          lastmark[r] = j;
          rows.push_back(r);
        }
      for (int c : children[j])
        for (int r : pat[c])
          if (r > j && lastmark[r] != j) {
            lastmark[r] = j;
            rows.push_back(r);
          }
      std::sort(rows.begin(), rows.end());
    }
  }

  sym.l_col_ptr.assign(n + 1, 0);
  for (int j = 0; j < n; ++j) sym.l_col_ptr[j + 1] = sym.l_col_ptr[j] + 1 + int(pat[j].size());
  sym.l_rows.resize(sym.l_col_ptr[n]);
  for (int j = 0; j < n; ++j) {
    int p = sym.l_col_ptr[j];
    sym.l_rows[p++] = j;
    for (int r : pat[j]) sym.l_rows[p++] = r;
  }

  // Strict row pattern (CSR transpose of the strict column pattern).
  sym.r_row_ptr.assign(n + 1, 0);
  for (int j = 0; j < n; ++j)
    for (int r : pat[j]) ++sym.r_row_ptr[r + 1];
  for (int i = 0; i < n; ++i) sym.r_row_ptr[i + 1] += sym.r_row_ptr[i];
  sym.r_cols.resize(sym.r_row_ptr[n]);
  {
    std::vector<int> next(sym.r_row_ptr.begin(), sym.r_row_ptr.end() - 1);
    for (int j = 0; j < n; ++j)
      for (int r : pat[j]) sym.r_cols[next[r]++] = j;  // ascending j per row
  }
  return sym;
}

void CholWorkspace::ensure(int n, bool with_scatter) {
  if (int(x.size()) < n) x.assign(n, 0.0);
  if (int(fill.size()) < n) fill.assign(n, 0);
  if (with_scatter && scatter.size() < size_t(n) * n) scatter.assign(size_t(n) * n, 0.0);
}

CholeskyFactor::CholeskyFactor(std::shared_ptr<const SymbolicFactor> sym)
    : sym_(std::move(sym)) {
  l_values_.assign(sym_->nnz_l(), 0.0);
}

void CholeskyFactor::refactor(const SparseSym& matrix, CholWorkspace& ws,
                              double pivot_rel_tol) {
  if (!same_pattern_input(matrix)) throw DimensionMismatch("refactor pattern mismatch");
  refactor_values(matrix.values, ws, pivot_rel_tol);
}

bool CholeskyFactor::same_pattern_input(const SparseSym& matrix) const {
  // The symbolic object stores the permuted pattern; the caller's matrix must
  // simply have as many entries as the value map expects.
  int want = 0;
  for (int m : sym_->input_value_map)
    if (m >= 0) want = std::max(want, m + 1);
  return matrix.n == sym_->n && matrix.nnz() >= want;
}

void CholeskyFactor::refactor_values(std::span<const double> values, CholWorkspace& ws,
                                     double pivot_rel_tol) {
  const SymbolicFactor& s = *sym_;
  int n = s.n;
  ws.ensure(n, false);
  std::fill(ws.fill.begin(), ws.fill.begin() + n, 0);
  auto& x = ws.x;

  const SparseSym& b = s.input_pattern;
  auto val_of = [&](int p) {
    int m = s.input_value_map[p];
    return m < 0 ? 0.0 : values[m];
  };

  double max_diag = 0.0;
  for (int j = 0; j < n; ++j) {
    int p = b.col_ptr[j];  // diagonal is first (ensured by construction)
    max_diag = std::max(max_diag, std::abs(val_of(p)));
  }
  double tol = pivot_rel_tol * max_diag;

  // Per-column write cursor into the static L pattern (strict part).
  std::vector<int>& cursor = ws.fill;
  for (int j = 0; j < n; ++j) cursor[j] = s.l_col_ptr[j] + 1;

  for (int k = 0; k < n; ++k) {
    // Scatter the upper entries of permuted column k: input entries (k, j),
    // j < k, live in the strict row list of row k.
    double d = 0.0;
    for (int p = b.col_ptr[k]; p < b.col_ptr[k + 1]; ++p) {
      // only the diagonal of column k is needed from here
      if (b.row_idx[p] == k) d = val_of(p);
    }
    // strict entries of row k of the input: find them via columns j < k
    // (iterate the precomputed strict row pattern of L, which is a superset,
    // and pull input values where present).
    for (int rp = s.r_row_ptr[k]; rp < s.r_row_ptr[k + 1]; ++rp) {
      int j = s.r_cols[rp];
      int p = b.find(k, j);
      x[j] = p >= 0 ? val_of(p) : 0.0;
    }

    for (int rp = s.r_row_ptr[k]; rp < s.r_row_ptr[k + 1]; ++rp) {
      int j = s.r_cols[rp];  // ascending: valid topological order
      double lkj = x[j] / l_values_[s.l_col_ptr[j]];
      x[j] = 0.0;
      for (int p = s.l_col_ptr[j] + 1; p < cursor[j]; ++p)
        x[s.l_rows[p]] -= l_values_[p] * lkj;
      d -= lkj * lkj;
      l_values_[cursor[j]] = lkj;  // row index there is k by construction
      ++cursor[j];
    }
    if (!(d > tol) || !std::isfinite(d)) throw NotPositiveDefinite(s.perm.forward[k]);
    l_values_[s.l_col_ptr[k]] = std::sqrt(d);
  }
  factored_ = true;
}

void CholeskyFactor::solve_lower_permuted(std::span<double> x) const {
  const SymbolicFactor& s = *sym_;
  for (int j = 0; j < s.n; ++j) {
    int p0 = s.l_col_ptr[j];
    x[j] /= l_values_[p0];
    double xj = x[j];
    for (int p = p0 + 1; p < s.l_col_ptr[j + 1]; ++p) x[s.l_rows[p]] -= l_values_[p] * xj;
  }
}

void CholeskyFactor::solve_upper_permuted(std::span<double> x) const {
  const SymbolicFactor& s = *sym_;
  for (int j = s.n - 1; j >= 0; --j) {
    int p0 = s.l_col_ptr[j];
    double acc = x[j];
    for (int p = p0 + 1; p < s.l_col_ptr[j + 1]; ++p) acc -= l_values_[p] * x[s.l_rows[p]];
    x[j] = acc / l_values_[p0];
  }
}

std::vector<double> CholeskyFactor::solve(std::span<const double> b) const {
  const SymbolicFactor& s = *sym_;
  if (int(b.size()) != s.n) throw DimensionMismatch("solve rhs size");
  std::vector<double> x(s.n);
  for (int k = 0; k < s.n; ++k) x[k] = b[s.perm.forward[k]];
  solve_lower_permuted(x);
  solve_upper_permuted(x);
  std::vector<double> out(s.n);
  for (int k = 0; k < s.n; ++k) out[s.perm.forward[k]] = x[k];
  return out;
}

double CholeskyFactor::log_det() const {
  const SymbolicFactor& s = *sym_;
  double acc = 0.0;
  for (int j = 0; j < s.n; ++j) acc += std::log(l_values_[s.l_col_ptr[j]]);
  return 2.0 * acc;
}

void CholeskyFactor::selected_inverse_values(CholWorkspace& ws,
                                             std::vector<double>& z) const {
  const SymbolicFactor& s = *sym_;
  int n = s.n;
  ws.ensure(n, true);
  z.assign(s.nnz_l(), 0.0);
  auto& zs = ws.scatter;  // dense mirror of computed entries

  // Reverse recursion over columns of L. With Q = L L^T = L' D L'^T
  // (L' unit lower, D = diag(L)^2) the inverse satisfies, for c <= r,
  //   Z_cr = delta_cr / D_c - sum_{k > c} L'_kc Z_kr,
  // and every referenced Z_kr lies inside the pattern.
  for (int c = n - 1; c >= 0; --c) {
    int p0 = s.l_col_ptr[c], p1 = s.l_col_ptr[c + 1];
    double dl = l_values_[p0];
    double dinv = 1.0 / (dl * dl);
    for (int pr = p1 - 1; pr > p0; --pr) {
      int r = s.l_rows[pr];
      double acc = 0.0;
      for (int pk = p0 + 1; pk < p1; ++pk) {
        int k = s.l_rows[pk];
        acc += (l_values_[pk] / dl) * zs[size_t(k) * n + r];
      }
      z[pr] = -acc;
      zs[size_t(r) * n + c] = -acc;
      zs[size_t(c) * n + r] = -acc;
    }
    double acc = 0.0;
    for (int pk = p0 + 1; pk < p1; ++pk) {
      int k = s.l_rows[pk];
      acc += (l_values_[pk] / dl) * zs[size_t(k) * n + c];
    }
    z[p0] = dinv - acc;
    zs[size_t(c) * n + c] = z[p0];
  }
  // Clear only the touched entries so the scratch can be reused.
  for (int c = 0; c < n; ++c)
    for (int p = s.l_col_ptr[c]; p < s.l_col_ptr[c + 1]; ++p) {
      int r = s.l_rows[p];
      zs[size_t(r) * n + c] = 0.0;
      zs[size_t(c) * n + r] = 0.0;
    }
}

CholeskyFactor numeric_cholesky(const SparseSym& matrix, const Permutation& perm) {
  auto sym = std::make_shared<SymbolicFactor>(symbolic_cholesky(matrix, perm));
  return numeric_cholesky(matrix, std::move(sym));
}

CholeskyFactor numeric_cholesky(const SparseSym& matrix,
                                std::shared_ptr<const SymbolicFactor> sym) {
  CholeskyFactor f(std::move(sym));
  CholWorkspace ws;
  f.refactor_values(matrix.values, ws);
  return f;
}

std::vector<double> solve_triangular(const CholeskyFactor& f, std::span<const double> b,
                                     TriangularSide side) {
  const SymbolicFactor& s = f.symbolic();
  if (int(b.size()) != s.n) throw DimensionMismatch("solve_triangular rhs");
  std::vector<double> x(s.n);
  for (int k = 0; k < s.n; ++k) x[k] = b[s.perm.forward[k]];
  if (side == TriangularSide::Lower)
    f.solve_lower_permuted(x);
  else
    f.solve_upper_permuted(x);
  std::vector<double> out(s.n);
  for (int k = 0; k < s.n; ++k) out[s.perm.forward[k]] = x[k];
  return out;
}

SparseSym takahashi_selected_inverse(const CholeskyFactor& f) {
  const SymbolicFactor& s = f.symbolic();
  CholWorkspace ws;
  std::vector<double> z;
  f.selected_inverse_values(ws, z);
  std::vector<int> is, js;
  std::vector<double> vs;
  is.reserve(z.size());
  js.reserve(z.size());
  vs.reserve(z.size());
  for (int c = 0; c < s.n; ++c)
    for (int p = s.l_col_ptr[c]; p < s.l_col_ptr[c + 1]; ++p) {
      is.push_back(s.perm.forward[s.l_rows[p]]);
      js.push_back(s.perm.forward[c]);
      vs.push_back(z[p]);
    }
  return sym_from_triplets(s.n, is, js, vs);
}

CovLookup CovLookup::build(const SymbolicFactor& sym, std::span<const int> is,
                           std::span<const int> js) {
  if (is.size() != js.size()) throw DimensionMismatch("CovLookup");
  CovLookup lk;
  lk.pos.reserve(is.size());
  for (size_t k = 0; k < is.size(); ++k) {
    int pi = sym.perm.inverse[is[k]];
    int pj = sym.perm.inverse[js[k]];
    if (pi < pj) std::swap(pi, pj);
    int p = sym.find_l(pi, pj);
    if (p < 0) throw MissingEntry(is[k], js[k]);
    lk.pos.push_back(p);
  }
  return lk;
}

}  // namespace stamp::sparse
