#include "stamp/engine/structure.hpp"

#include <algorithm>
#include <numeric>

#include "stamp/sparse/ordering.hpp"

namespace stamp::engine {

MessageFamily MessageFamily::parse(const std::string& name) {
  if (name == "diag") return diag();
  if (name == "tsp") return tsp();
  if (name == "full") return full();
  if (name == "chordal" || name == "chordal:amd") return chordal(Order::Amd);
  if (name == "chordal:rcm") return chordal(Order::Rcm);
  if (name == "chordal:none") return chordal(Order::None);
  if (name.rfind("band:", 0) == 0) {
    int k = std::stoi(name.substr(5));
    if (k < 0) throw ValidationError("band family needs a non-negative width");
    return band(k);
  }
  throw ValidationError("unknown message family: " + name);
}

std::string MessageFamily::name() const {
  switch (kind) {
    case Kind::Diag: return "diag";
    case Kind::Tsp: return "tsp";
    case Kind::Full: return "full";
    case Kind::Band: return "band:" + std::to_string(bandwidth);
    case Kind::Chordal:
      switch (order) {
        case Order::Amd: return "chordal:amd";
        case Order::Rcm: return "chordal:rcm";
        case Order::None: return "chordal:none";
      }
  }
  return "diag";
}

sparse::SparseSym max_weight_spanning_tree(const sparse::SparseSym& w) {
  struct Edge {
    double weight;
    int index, i, j;
  };
  std::vector<Edge> edges;
  int idx = 0;
  for (int j = 0; j < w.n; ++j)
    for (int p = w.col_ptr[j]; p < w.col_ptr[j + 1]; ++p)
      if (w.row_idx[p] != j) {
        edges.push_back({w.values.empty() ? 1.0 : std::abs(w.values[p]), idx++,
                         w.row_idx[p], j});
      }
  std::stable_sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    return a.index < b.index;
  });
  std::vector<int> parent(w.n);
  std::iota(parent.begin(), parent.end(), 0);
  std::function<int(int)> find = [&](int v) {
    while (parent[v] != v) {
      parent[v] = parent[parent[v]];
      v = parent[v];
    }
    return v;
  };
  std::vector<int> is, js;
  for (auto& e : edges) {
    int a = find(e.i), b = find(e.j);
    if (a == b) continue;
    parent[a] = b;
    is.push_back(e.i);
    js.push_back(e.j);
  }
  return sparse::sym_from_triplets(w.n, is, js, {}, false);
}

sparse::SparseSym build_message_structure(const sparse::SparseSym& s_a,
                                          const MessageFamily& family,
                                          const sparse::SparseSym* weights) {
  int n = s_a.n;
  switch (family.kind) {
    case MessageFamily::Kind::Diag:
      return sparse::sym_from_triplets(n, {}, {}, {}, false);
    case MessageFamily::Kind::Full: {
      std::vector<int> is, js;
      for (int j = 0; j < n; ++j)
        for (int i = j + 1; i < n; ++i) {
          is.push_back(i);
          js.push_back(j);
        }
      return sparse::sym_from_triplets(n, is, js, {}, false);
    }
    case MessageFamily::Kind::Band: {
      std::vector<int> is, js;
      for (int j = 0; j < n; ++j)
        for (int i = j + 1; i < std::min(n, j + family.bandwidth + 1); ++i) {
          is.push_back(i);
          js.push_back(j);
        }
      return sparse::sym_from_triplets(n, is, js, {}, false);
    }
    case MessageFamily::Kind::Tsp: {
      if (!weights) throw ValidationError("tsp family needs |A| weights");
      return max_weight_spanning_tree(*weights);
    }
    case MessageFamily::Kind::Chordal: {
      sparse::SparseSym edges = sparse::strict_lower(s_a);
      sparse::Permutation perm;
      switch (family.order) {
        case MessageFamily::Order::Amd: perm = sparse::amd_order(edges); break;
        case MessageFamily::Order::Rcm: perm = sparse::rcm_order(edges); break;
        case MessageFamily::Order::None: perm = sparse::Permutation::identity(n); break;
      }
      return sparse::chordal_complete(edges, perm);
    }
  }
  throw ValidationError("unhandled message family");
}

}  // namespace stamp::engine
