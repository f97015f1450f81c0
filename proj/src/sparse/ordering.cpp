#include "stamp/sparse/ordering.hpp"

#include <algorithm>
#include <queue>

#include "stamp/sparse/cholesky.hpp"

namespace stamp::sparse {

Permutation::Permutation(std::vector<int> fwd) : forward(std::move(fwd)) {
  int n = int(forward.size());
  inverse.assign(n, -1);
  for (int k = 0; k < n; ++k) {
    int v = forward[k];
    if (v < 0 || v >= n || inverse[v] != -1) throw ValidationError("not a permutation");
    inverse[v] = k;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> fwd(n);
  for (int i = 0; i < n; ++i) fwd[i] = i;
  return Permutation(std::move(fwd));
}

namespace {

// Merge b into sorted a, skipping `skip` and anything flagged dead.
std::vector<int> merge_live(const std::vector<int>& a, const std::vector<int>& b,
                            const std::vector<char>& dead, int skip) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  size_t i = 0, j = 0;
  auto push = [&](int v) {
    if (v != skip && !dead[v] && (out.empty() || out.back() != v)) out.push_back(v);
  };
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j])
      push(a[i++]);
    else if (b[j] < a[i])
      push(b[j++]);
    else {
      push(a[i]);
      ++i;
      ++j;
    }
  }
  while (i < a.size()) push(a[i++]);
  while (j < b.size()) push(b[j++]);
  return out;
}

}  // namespace

Permutation amd_order(const SparseSym& structure) {
  int n = structure.n;
  auto adj = adjacency(structure);
  long long edges = 0;
  for (auto& a : adj) edges += (long long)a.size();
  if (edges == (long long)n * (n - 1)) return Permutation::identity(n);

  std::vector<char> dead(n, 0);
  std::vector<int> order;
  order.reserve(n);
  using Key = std::pair<int, int>;  // (degree, vertex)
  std::priority_queue<Key, std::vector<Key>, std::greater<Key>> heap;
  for (int v = 0; v < n; ++v) heap.push({int(adj[v].size()), v});

  std::vector<char> in_pivot(n, 0);
  while (!heap.empty()) {
    auto [deg, v] = heap.top();
    heap.pop();
    if (dead[v] || deg != int(adj[v].size())) continue;  // stale entry
    dead[v] = 1;
    order.push_back(v);
    // Eliminate v: its live neighbours become a clique.
    std::vector<int> nbrs;
    nbrs.reserve(adj[v].size());
    for (int u : adj[v])
      if (!dead[u]) nbrs.push_back(u);
    for (int u : nbrs) {
      adj[u] = merge_live(adj[u], nbrs, dead, u);
      heap.push({int(adj[u].size()), u});
    }
    adj[v].clear();
    adj[v].shrink_to_fit();
  }
  return Permutation(std::move(order));
}

namespace {

// BFS levels from root over live adjacency; returns vertices level by level.
std::vector<std::vector<int>> bfs_levels(const std::vector<std::vector<int>>& adj, int root,
                                         std::vector<int>& level) {
  std::fill(level.begin(), level.end(), -1);
  std::vector<std::vector<int>> levels;
  std::vector<int> frontier{root};
  level[root] = 0;
  while (!frontier.empty()) {
    levels.push_back(frontier);
    std::vector<int> next;
    for (int v : frontier)
      for (int u : adj[v])
        if (level[u] < 0) {
          level[u] = level[v] + 1;
          next.push_back(u);
        }
    std::sort(next.begin(), next.end());
    frontier = std::move(next);
  }
  return levels;
}

int pseudo_peripheral(const std::vector<std::vector<int>>& adj, int start,
                      std::vector<int>& level) {
  int x = start;
  int ecc = -1;
  for (;;) {
    auto levels = bfs_levels(adj, x, level);
    int e = int(levels.size()) - 1;
    if (e <= ecc) return x;
    ecc = e;
    // min-degree node in the last level, lowest index on ties
    int best = levels.back()[0];
    for (int v : levels.back())
      if (adj[v].size() < adj[best].size() || (adj[v].size() == adj[best].size() && v < best))
        best = v;
    x = best;
  }
}

}  // namespace

Permutation rcm_order(const SparseSym& structure) {
  int n = structure.n;
  auto adj = adjacency(structure);
  std::vector<int> level(n);
  std::vector<char> visited(n, 0);
  std::vector<int> cm;
  cm.reserve(n);
  for (int s = 0; s < n; ++s) {
    if (visited[s]) continue;
    int root = pseudo_peripheral(adj, s, level);
    std::vector<int> queue{root};
    visited[root] = 1;
    size_t head = 0;
    while (head < queue.size()) {
      int v = queue[head++];
      cm.push_back(v);
      std::vector<int> nbrs;
      for (int u : adj[v])
        if (!visited[u]) nbrs.push_back(u);
      std::sort(nbrs.begin(), nbrs.end(), [&](int a, int b) {
        if (adj[a].size() != adj[b].size()) return adj[a].size() < adj[b].size();
        return a < b;
      });
      for (int u : nbrs) {
        visited[u] = 1;
        queue.push_back(u);
      }
    }
  }
  std::reverse(cm.begin(), cm.end());
  return Permutation(std::move(cm));
}

SparseSym permute_sym(const SparseSym& s, const Permutation& p) {
  if (p.size() != s.n) throw DimensionMismatch("permute_sym");
  bool with_values = !s.values.empty();
  std::vector<int> is, js;
  std::vector<double> vs;
  is.reserve(s.nnz());
  js.reserve(s.nnz());
  if (with_values) vs.reserve(s.nnz());
  for (int j = 0; j < s.n; ++j)
    for (int q = s.col_ptr[j]; q < s.col_ptr[j + 1]; ++q) {
      is.push_back(p.inverse[s.row_idx[q]]);
      js.push_back(p.inverse[j]);
      if (with_values) vs.push_back(s.values[q]);
    }
  return sym_from_triplets(s.n, is, js, vs, with_values);
}

long long symbolic_fill_nnz(const SparseSym& structure, const Permutation& p) {
  SymbolicFactor sym = symbolic_cholesky(pattern_with_diagonal(structure), p);
  return sym.nnz_strict();
}

int bandwidth_after(const SparseSym& structure, const Permutation& p) {
  int bw = 0;
  for (int j = 0; j < structure.n; ++j)
    for (int i : structure.col_rows(j))
      if (i != j) bw = std::max(bw, std::abs(p.inverse[i] - p.inverse[j]));
  return bw;
}

}  // namespace stamp::sparse
