#include "stamp/sparse/sparse_sym.hpp"

#include <algorithm>
#include <map>
#include <tuple>

namespace stamp::sparse {

int SparseSym::find(int i, int j) const {
  if (i < j) std::swap(i, j);
  auto rows = col_rows(j);
  auto it = std::lower_bound(rows.begin(), rows.end(), i);
  if (it == rows.end() || *it != i) return -1;
  return col_ptr[j] + int(it - rows.begin());
}

double SparseSym::at(int i, int j) const {
  int p = find(i, j);
  return p < 0 ? 0.0 : values[p];
}

void SparseSym::check_invariants() const {
  if (int(col_ptr.size()) != n + 1) throw ValidationError("bad col_ptr size");
  for (int j = 0; j < n; ++j) {
    if (col_ptr[j] > col_ptr[j + 1]) throw ValidationError("col_ptr not monotone");
    for (int p = col_ptr[j]; p < col_ptr[j + 1]; ++p) {
      if (row_idx[p] < j || row_idx[p] >= n) throw ValidationError("row index out of range");
      if (p > col_ptr[j] && row_idx[p] <= row_idx[p - 1])
        throw ValidationError("row indices not strictly increasing");
    }
  }
  if (!values.empty() && values.size() != row_idx.size())
    throw ValidationError("values size does not match pattern");
}

void SparseSym::sym_matvec_add(std::span<const double> x, std::span<double> y) const {
  if (int(x.size()) != n || int(y.size()) != n) throw DimensionMismatch("sym_matvec");
  for (int j = 0; j < n; ++j) {
    for (int p = col_ptr[j]; p < col_ptr[j + 1]; ++p) {
      int i = row_idx[p];
      double v = values[p];
      y[i] += v * x[j];
      if (i != j) y[j] += v * x[i];
    }
  }
}

SparseSym sym_from_triplets(int n, std::span<const int> is, std::span<const int> js,
                            std::span<const double> vs, bool with_values) {
  if (is.size() != js.size() || (with_values && vs.size() != is.size()))
    throw DimensionMismatch("triplet arrays");
  std::map<std::pair<int, int>, double> cells;  // key (col, row), lower triangle
  for (size_t k = 0; k < is.size(); ++k) {
    int i = is[k], j = js[k];
    if (i < 0 || j < 0 || i >= n || j >= n) throw ValidationError("triplet index out of range");
    if (i < j) std::swap(i, j);
    cells[{j, i}] += with_values ? vs[k] : 0.0;
  }
  SparseSym s(n);
  s.row_idx.reserve(cells.size());
  if (with_values) s.values.reserve(cells.size());
  int col = 0;
  s.col_ptr[0] = 0;
  for (auto& [key, v] : cells) {
    while (col < key.first) s.col_ptr[++col] = int(s.row_idx.size());
    s.row_idx.push_back(key.second);
    if (with_values) s.values.push_back(v);
  }
  while (col < n) s.col_ptr[++col] = int(s.row_idx.size());
  return s;
}

SparseSym pattern_union(const SparseSym& a, const SparseSym& b) {
  if (a.n != b.n) throw DimensionMismatch("pattern_union");
  SparseSym u(a.n);
  for (int j = 0; j < a.n; ++j) {
    auto ra = a.col_rows(j);
    auto rb = b.col_rows(j);
    std::vector<int> merged;
    std::set_union(ra.begin(), ra.end(), rb.begin(), rb.end(), std::back_inserter(merged));
    u.row_idx.insert(u.row_idx.end(), merged.begin(), merged.end());
    u.col_ptr[j + 1] = int(u.row_idx.size());
  }
  return u;
}

SparseSym pattern_with_diagonal(const SparseSym& a) {
  SparseSym u(a.n);
  for (int j = 0; j < a.n; ++j) {
    auto ra = a.col_rows(j);
    if (ra.empty() || ra.front() != j) u.row_idx.push_back(j);
    u.row_idx.insert(u.row_idx.end(), ra.begin(), ra.end());
    u.col_ptr[j + 1] = int(u.row_idx.size());
  }
  return u;
}

SparseSym strict_lower(const SparseSym& a) {
  SparseSym u(a.n);
  for (int j = 0; j < a.n; ++j) {
    for (int i : a.col_rows(j))
      if (i != j) u.row_idx.push_back(i);
    u.col_ptr[j + 1] = int(u.row_idx.size());
  }
  return u;
}

bool same_pattern(const SparseSym& a, const SparseSym& b) {
  return a.n == b.n && a.col_ptr == b.col_ptr && a.row_idx == b.row_idx;
}

std::vector<std::vector<int>> adjacency(const SparseSym& s) {
  std::vector<std::vector<int>> adj(s.n);
  for (int j = 0; j < s.n; ++j)
    for (int i : s.col_rows(j))
      if (i != j) {
        adj[j].push_back(i);
        adj[i].push_back(j);
      }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  return adj;
}

double SparseGen::at(int i, int j) const {
  for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p)
    if (col_idx[p] == j) return values[p];
  return 0.0;
}

SparseGen SparseGen::transposed() const {
  SparseGen t(cols, rows);
  std::vector<int> count(cols, 0);
  for (int idx : col_idx) ++count[idx];
  for (int j = 0; j < cols; ++j) t.row_ptr[j + 1] = t.row_ptr[j] + count[j];
  t.col_idx.resize(nnz());
  t.values.resize(nnz());
  std::vector<int> next(t.row_ptr.begin(), t.row_ptr.end() - 1);
  for (int i = 0; i < rows; ++i)
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
      int slot = next[col_idx[p]]++;
      t.col_idx[slot] = i;
      t.values[slot] = values[p];
    }
  return t;
}

std::vector<double> SparseGen::matvec(std::span<const double> x) const {
  if (int(x.size()) != cols) throw DimensionMismatch("sparse matvec");
  std::vector<double> y(rows, 0.0);
  for (int i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int p = row_ptr[i]; p < row_ptr[i + 1]; ++p) s += values[p] * x[col_idx[p]];
    y[i] = s;
  }
  return y;
}

SparseGen gen_from_triplets(int rows, int cols, std::span<const int> is,
                            std::span<const int> js, std::span<const double> vs) {
  if (is.size() != js.size() || js.size() != vs.size())
    throw DimensionMismatch("triplet arrays");
  std::map<std::pair<int, int>, double> cells;
  for (size_t k = 0; k < is.size(); ++k) {
    if (is[k] < 0 || js[k] < 0 || is[k] >= rows || js[k] >= cols)
      throw ValidationError("triplet index out of range");
    cells[{is[k], js[k]}] += vs[k];
  }
  SparseGen g(rows, cols);
  g.col_idx.reserve(cells.size());
  g.values.reserve(cells.size());
  int row = 0;
  for (auto& [key, v] : cells) {
    while (row < key.first) g.row_ptr[++row] = int(g.col_idx.size());
    g.col_idx.push_back(key.second);
    g.values.push_back(v);
  }
  while (row < rows) g.row_ptr[++row] = int(g.col_idx.size());
  return g;
}

namespace {

// Sparse row accumulator used by the products below.
struct RowAccum {
  std::vector<double> val;
  std::vector<char> mark;
  std::vector<int> touched;

  explicit RowAccum(int n) : val(n, 0.0), mark(n, 0) {}

  void add(int j, double v) {
    if (!mark[j]) {
      mark[j] = 1;
      touched.push_back(j);
    }
    val[j] += v;
  }

  // Harvests (sorted) and resets.
  template <typename F>
  void drain(F&& f) {
    std::sort(touched.begin(), touched.end());
    for (int j : touched) {
      f(j, val[j]);
      val[j] = 0.0;
      mark[j] = 0;
    }
    touched.clear();
  }
};

}  // namespace

SparseGen qa_product(const SparseSym& q, const SparseGen& a) {
  if (q.n != a.rows) throw DimensionMismatch("qa_product");
  // Expand Q to row lists once.
  std::vector<std::vector<std::pair<int, double>>> qrow(q.n);
  for (int j = 0; j < q.n; ++j)
    for (int p = q.col_ptr[j]; p < q.col_ptr[j + 1]; ++p) {
      int i = q.row_idx[p];
      qrow[i].push_back({j, q.values[p]});
      if (i != j) qrow[j].push_back({i, q.values[p]});
    }
  SparseGen m(q.n, a.cols);
  RowAccum acc(a.cols);
  for (int i = 0; i < q.n; ++i) {
    for (auto [k, qik] : qrow[i]) {
      for (int p = a.row_ptr[k]; p < a.row_ptr[k + 1]; ++p)
        acc.add(a.col_idx[p], qik * a.values[p]);
    }
    acc.drain([&](int j, double v) {
      m.col_idx.push_back(j);
      m.values.push_back(v);
    });
    m.row_ptr[i + 1] = int(m.col_idx.size());
  }
  return m;
}

SparseSym atqa(const SparseGen& a, const SparseSym& q) {
  SparseGen m = qa_product(q, a);  // m = Q A
  // (A^T M)_{jk} accumulated column-by-column of A via the transpose.
  SparseGen at = a.transposed();
  std::vector<int> is, js;
  std::vector<double> vs;
  RowAccum acc(a.cols);
  for (int j = 0; j < a.cols; ++j) {
    for (int p = at.row_ptr[j]; p < at.row_ptr[j + 1]; ++p) {
      int i = at.col_idx[p];
      double aij = at.values[p];
      for (int pm = m.row_ptr[i]; pm < m.row_ptr[i + 1]; ++pm)
        acc.add(m.col_idx[pm], aij * m.values[pm]);
    }
    acc.drain([&](int k, double v) {
      if (k >= j) {  // keep lower triangle (result symmetric)
        is.push_back(k);
        js.push_back(j);
        vs.push_back(v);
      }
    });
  }
  return sym_from_triplets(a.cols, is, js, vs);
}

SparseSym structure_of(const SparseGen& a) {
  if (a.rows != a.cols) throw DimensionMismatch("structure_of needs square A");
  std::vector<int> is, js;
  for (int i = 0; i < a.rows; ++i)
    for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      int j = a.col_idx[p];
      if (i != j) {
        is.push_back(i);
        js.push_back(j);
      }
    }
  SparseSym s = sym_from_triplets(a.rows, is, js, {}, false);
  return strict_lower(s);
}

}  // namespace stamp::sparse
