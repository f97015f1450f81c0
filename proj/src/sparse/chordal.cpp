#include "stamp/sparse/chordal.hpp"

#include <algorithm>
#include <numeric>

namespace stamp::sparse {

int CliqueDecomposition::max_clique_size() const {
  int m = 0;
  for (auto& c : cliques) m = std::max(m, int(c.members.size()));
  return m;
}

SparseSym chordal_complete(const SparseSym& edges, const Permutation& perm) {
  SymbolicFactor sym = symbolic_cholesky(pattern_with_diagonal(edges), perm);
  std::vector<int> is, js;
  is.reserve(sym.nnz_strict());
  js.reserve(sym.nnz_strict());
  for (int c = 0; c < sym.n; ++c)
    for (int p = sym.l_col_ptr[c] + 1; p < sym.l_col_ptr[c + 1]; ++p) {
      is.push_back(sym.perm.forward[sym.l_rows[p]]);
      js.push_back(sym.perm.forward[c]);
    }
  return sym_from_triplets(edges.n, is, js, {}, false);
}

Permutation mcs_order(const SparseSym& edges) {
  int n = edges.n;
  auto adj = adjacency(edges);
  std::vector<int> weight(n, 0);
  std::vector<char> visited(n, 0);
  std::vector<int> visit_order;
  visit_order.reserve(n);
  for (int step = 0; step < n; ++step) {
    int best = -1;
    for (int v = 0; v < n; ++v)
      if (!visited[v] && (best < 0 || weight[v] > weight[best])) best = v;
    visited[best] = 1;
    visit_order.push_back(best);
    for (int u : adj[best])
      if (!visited[u]) ++weight[u];
  }
  // Reversed visit order is a perfect elimination order for chordal graphs.
  std::reverse(visit_order.begin(), visit_order.end());
  return Permutation(std::move(visit_order));
}

bool is_chordal(const SparseSym& edges) {
  Permutation peo = mcs_order(edges);
  long long fill = symbolic_fill_nnz(edges, peo);
  long long m = edges.nnz();
  return fill == m;
}

CliqueDecomposition clique_decomposition(const SparseSym& edges) {
  Permutation peo = mcs_order(edges);
  SymbolicFactor sym = symbolic_cholesky(pattern_with_diagonal(edges), peo);
  if (sym.nnz_strict() != edges.nnz()) throw NotChordal();
  int n = sym.n;

  // Candidate clique of column j is {j} ∪ strict pattern of column j. It is
  // absorbed by an elimination-tree child whose pattern is one larger.
  std::vector<int> colcount(n);
  for (int j = 0; j < n; ++j) colcount[j] = sym.l_col_ptr[j + 1] - sym.l_col_ptr[j];
  std::vector<int> absorbed_into(n, -1);  // column -> absorbing child
  std::vector<std::vector<int>> children(n);
  for (int j = 0; j < n; ++j)
    if (sym.parent[j] >= 0) children[sym.parent[j]].push_back(j);
  for (int j = 0; j < n; ++j)
    for (int c : children[j])
      if (colcount[c] == colcount[j] + 1) {
        absorbed_into[j] = c;  // children listed ascending; first match kept
        break;
      }

  // Representative (maximal-clique) column of each column.
  std::vector<int> rep(n);
  for (int j = 0; j < n; ++j) {
    int c = j;
    while (absorbed_into[c] >= 0) c = absorbed_into[c];
    rep[j] = c;
  }

  std::vector<int> reps;
  for (int j = 0; j < n; ++j)
    if (rep[j] == j) reps.push_back(j);

  // Clique tree: the parent of a maximal clique lives where the lowest
  // column of its separator-above-the-supernode is resident.
  int k_cnt = int(reps.size());
  std::vector<int> clique_id(n, -1);
  for (int k = 0; k < k_cnt; ++k) clique_id[reps[k]] = k;
  std::vector<std::vector<int>> tree_adj(k_cnt);
  for (int k = 0; k < k_cnt; ++k) {
    // top of the supernode chain: follow etree while absorbed into this chain
    int top = reps[k];
    while (sym.parent[top] >= 0 && absorbed_into[sym.parent[top]] == top)
      top = sym.parent[top];
    if (sym.l_col_ptr[top] + 1 < sym.l_col_ptr[top + 1]) {
      int above = sym.l_rows[sym.l_col_ptr[top] + 1];  // lowest separator column
      int pk = clique_id[rep[above]];
      tree_adj[k].push_back(pk);
      tree_adj[pk].push_back(k);
    }
  }
  for (auto& a : tree_adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }

  // Emit cliques by BFS over the clique tree, starting from the clique that
  // holds the lowest original vertex id; disconnected components follow in
  // vertex order.
  std::vector<int> emit;
  std::vector<char> seen_clique(k_cnt, 0);
  for (int v = 0; v < n && int(emit.size()) < k_cnt; ++v) {
    int k0 = clique_id[rep[sym.perm.inverse[v]]];
    if (seen_clique[k0]) continue;
    std::vector<int> queue{k0};
    seen_clique[k0] = 1;
    size_t head = 0;
    while (head < queue.size()) {
      int k = queue[head++];
      emit.push_back(k);
      for (int u : tree_adj[k])
        if (!seen_clique[u]) {
          seen_clique[u] = 1;
          queue.push_back(u);
        }
    }
  }

  CliqueDecomposition out;
  out.n = n;
  std::vector<char> vertex_seen(n, 0);
  for (int k : emit) {
    int j = reps[k];
    CliqueDecomposition::Clique c;
    c.members.push_back(sym.perm.forward[j]);
    for (int p = sym.l_col_ptr[j] + 1; p < sym.l_col_ptr[j + 1]; ++p)
      c.members.push_back(sym.perm.forward[sym.l_rows[p]]);
    std::sort(c.members.begin(), c.members.end());
    for (int v : c.members)
      (vertex_seen[v] ? c.separator : c.residual).push_back(v);
    for (int v : c.residual) vertex_seen[v] = 1;
    out.cliques.push_back(std::move(c));
  }
  return out;
}

}  // namespace stamp::sparse
