#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <filesystem>
#include <numeric>

#include "doctest.h"
#include "stamp/sparse/chordal.hpp"
#include "stamp/sparse/cholesky.hpp"
#include "stamp/sparse/matrix_market.hpp"
#include "stamp/sparse/ordering.hpp"
#include "test_helpers.hpp"

using namespace stamp;
using namespace stamp::sparse;
using namespace testutil;

namespace {

long long fill_of(const SparseSym& edges, const Permutation& p) {
  return symbolic_fill_nnz(edges, p) - edges.nnz();
}

SparseSym star_structure(int leaves) {
  std::vector<int> is, js;
  for (int l = 1; l <= leaves; ++l) {
    is.push_back(l);
    js.push_back(0);
  }
  return sym_from_triplets(leaves + 1, is, js, {}, false);
}

SparseSym arrow_matrix(int n, bool hub_first) {
  // PD arrow: dense first (or last) row/column plus strong diagonal.
  std::vector<int> is, js;
  std::vector<double> vs;
  int hub = hub_first ? 0 : n - 1;
  for (int i = 0; i < n; ++i)
    if (i != hub) {
      is.push_back(std::max(i, hub));
      js.push_back(std::min(i, hub));
      vs.push_back(0.3);
    }
  for (int i = 0; i < n; ++i) {
    is.push_back(i);
    js.push_back(i);
    vs.push_back(double(n));
  }
  return sym_from_triplets(n, is, js, vs);
}

}  // namespace

TEST_CASE("amd: diagonal structure has zero fill") {
  SparseSym s = sym_from_triplets(5, {}, {}, {}, false);
  Permutation p = amd_order(s);
  CHECK(fill_of(s, p) == 0);
}

TEST_CASE("amd: star hub is kept until the end and fill matches exhaustive minimum") {
  SparseSym s = star_structure(4);
  Permutation p = amd_order(s);
  // The hub is never picked while any leaf of strictly lower degree remains;
  // with lowest-index tie-breaking it ties with the last leaf, so it lands in
  // one of the final two slots.
  CHECK(p.inverse[0] >= 3);
  CHECK(fill_of(s, p) == 0);
  // brute-force over all 5! orders
  std::vector<int> idx(5);
  std::iota(idx.begin(), idx.end(), 0);
  long long best = 1 << 30;
  do {
    best = std::min(best, fill_of(s, Permutation(idx)));
  } while (std::next_permutation(idx.begin(), idx.end()));
  CHECK(fill_of(s, p) == best);
}

TEST_CASE("amd: tridiagonal chain has zero fill") {
  SparseSym s = chain_structure(6);
  CHECK(fill_of(s, amd_order(s)) == 0);
}

TEST_CASE("rcm: banded chain keeps bandwidth 1") {
  SparseSym s = chain_structure(6);
  CHECK(bandwidth_after(s, rcm_order(s)) == 1);
}

TEST_CASE("rcm: scrambled chain recovers bandwidth 1") {
  // chain over vertices in a scrambled labelling
  std::vector<int> label = {3, 7, 1, 5, 0, 6, 2, 4};
  std::vector<int> is, js;
  for (int k = 0; k + 1 < 8; ++k) {
    is.push_back(std::max(label[k], label[k + 1]));
    js.push_back(std::min(label[k], label[k + 1]));
  }
  SparseSym s = sym_from_triplets(8, is, js, {}, false);
  CHECK(bandwidth_after(s, rcm_order(s)) == 1);
}

TEST_CASE("rcm: 3x3 grid bandwidth at most 3") {
  SparseSym s = grid_structure(3, 3);
  CHECK(bandwidth_after(s, rcm_order(s)) <= 3);
}

TEST_CASE("symbolic: tridiagonal with identity permutation has no fill") {
  SparseSym s = chain_structure(6);
  SymbolicFactor sym = symbolic_cholesky(pattern_with_diagonal(s), Permutation::identity(6));
  CHECK(sym.nnz_strict() == s.nnz());
}

TEST_CASE("symbolic: arrow matrix, hub first is dense, hub last has no fill") {
  int n = 6;
  SparseSym first = arrow_matrix(n, true);
  SymbolicFactor sf = symbolic_cholesky(first, Permutation::identity(n));
  CHECK(sf.nnz_strict() == (long long)n * (n - 1) / 2);  // hand elimination: full lower
  SparseSym last = arrow_matrix(n, false);
  SymbolicFactor sl = symbolic_cholesky(last, Permutation::identity(n));
  CHECK(sl.nnz_strict() == n - 1);
}

TEST_CASE("numeric: identity factors to identity") {
  std::vector<int> idx(5);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> ones(5, 1.0);
  SparseSym q = sym_from_triplets(5, idx, idx, ones);
  CholeskyFactor f = numeric_cholesky(q, Permutation::identity(5));
  for (double v : f.l_values()) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("numeric: closed-form 2x2") {
  SparseSym q = sym_from_triplets(2, {0, 1, 1}, {0, 0, 1}, {4.0, 2.0, 3.0});
  CholeskyFactor f = numeric_cholesky(q, Permutation::identity(2));
  const SymbolicFactor& s = f.symbolic();
  CHECK(f.l_values()[s.find_l(0, 0)] == doctest::Approx(2.0));
  CHECK(f.l_values()[s.find_l(1, 0)] == doctest::Approx(1.0));
  CHECK(f.l_values()[s.find_l(1, 1)] == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("numeric: negative diagonal entry throws with column id") {
  SparseSym q = sym_from_triplets(3, {0, 1, 2}, {0, 1, 2}, {1.0, -1.0, 1.0});
  CHECK_THROWS_AS(numeric_cholesky(q, Permutation::identity(3)), NotPositiveDefinite);
}

TEST_CASE("solve: identity factor returns rhs, 2x2 forward solve") {
  std::vector<int> idx(4);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> ones(4, 1.0);
  CholeskyFactor id = numeric_cholesky(sym_from_triplets(4, idx, idx, ones),
                                       Permutation::identity(4));
  std::vector<double> b = {1.0, -2.0, 3.5, 0.25};
  auto y = solve_triangular(id, b, TriangularSide::Lower);
  CHECK(y == b);

  SparseSym q = sym_from_triplets(2, {0, 1, 1}, {0, 0, 1}, {4.0, 2.0, 3.0});
  CholeskyFactor f = numeric_cholesky(q, Permutation::identity(2));
  std::vector<double> rhs = {2.0, std::sqrt(2.0) + 1.0};
  auto fw = solve_triangular(f, rhs, TriangularSide::Lower);
  CHECK(fw[0] == doctest::Approx(1.0));
  CHECK(fw[1] == doctest::Approx(1.0));
}

TEST_CASE("solve: residual check on random sparse PD n=20") {
  Rng rng(42);
  SparseSym q = random_pd(20, 0.2, rng);
  CholeskyFactor f = numeric_cholesky(q, amd_order(q));
  std::vector<double> b(20);
  for (auto& v : b) v = rng.normal();
  auto x = f.solve(b);
  std::vector<double> qx(20, 0.0);
  q.sym_matvec_add(x, qx);
  double bn = 0.0, rn = 0.0;
  for (int i = 0; i < 20; ++i) {
    bn = std::max(bn, std::abs(b[i]));
    rn = std::max(rn, std::abs(qx[i] - b[i]));
  }
  CHECK(rn <= 1e-10 * bn);
}

TEST_CASE("takahashi: diagonal matrix") {
  SparseSym q = sym_from_triplets(2, {0, 1}, {0, 1}, {2.0, 4.0});
  CholeskyFactor f = numeric_cholesky(q, Permutation::identity(2));
  SparseSym z = takahashi_selected_inverse(f);
  CHECK(z.at(0, 0) == doctest::Approx(0.5));
  CHECK(z.at(1, 1) == doctest::Approx(0.25));
}

TEST_CASE("takahashi: tridiagonal n=6 vs dense inverse") {
  Rng rng(7);
  std::vector<int> is, js;
  std::vector<double> vs;
  for (int i = 0; i < 6; ++i) {
    is.push_back(i);
    js.push_back(i);
    vs.push_back(3.0 + rng.uniform());
  }
  for (int i = 0; i + 1 < 6; ++i) {
    is.push_back(i + 1);
    js.push_back(i);
    vs.push_back(rng.normal() * 0.5);
  }
  SparseSym q = sym_from_triplets(6, is, js, vs);
  CholeskyFactor f = numeric_cholesky(q, Permutation::identity(6));
  SparseSym z = takahashi_selected_inverse(f);
  DenseMat inv = spd_inverse(to_dense(q));
  for (int j = 0; j < 6; ++j)
    for (int p = z.col_ptr[j]; p < z.col_ptr[j + 1]; ++p)
      CHECK(std::abs(z.values[p] - inv(z.row_idx[p], j)) <= 1e-10);
}

TEST_CASE("takahashi: grid laplacian + I under amd vs dense inverse") {
  SparseSym g = grid_structure(5, 5);
  // laplacian + I
  std::vector<int> is, js;
  std::vector<double> vs;
  std::vector<double> deg(25, 0.0);
  for (int j = 0; j < g.n; ++j)
    for (int i : g.col_rows(j)) {
      is.push_back(i);
      js.push_back(j);
      vs.push_back(-1.0);
      deg[i] += 1.0;
      deg[j] += 1.0;
    }
  for (int i = 0; i < 25; ++i) {
    is.push_back(i);
    js.push_back(i);
    vs.push_back(deg[i] + 1.0);
  }
  SparseSym q = sym_from_triplets(25, is, js, vs);
  CholeskyFactor f = numeric_cholesky(q, amd_order(q));
  SparseSym z = takahashi_selected_inverse(f);
  DenseMat inv = spd_inverse(to_dense(q));
  double scale = 0.0;
  for (auto& v : inv.a) scale = std::max(scale, std::abs(v));
  for (int j = 0; j < z.n; ++j)
    for (int p = z.col_ptr[j]; p < z.col_ptr[j + 1]; ++p)
      CHECK(std::abs(z.values[p] - inv(z.row_idx[p], j)) <= 1e-9 * scale);
}

TEST_CASE("takahashi covers every nonzero of the input") {
  Rng rng(11);
  SparseSym q = random_pd(25, 0.15, rng);
  CholeskyFactor f = numeric_cholesky(q, amd_order(q));
  SparseSym z = takahashi_selected_inverse(f);
  for (int j = 0; j < q.n; ++j)
    for (int i : q.col_rows(j)) CHECK(z.find(i, j) >= 0);
}

TEST_CASE("selected inverse matches dense oracle on random PD sweeps") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    int n = 5 + rng.uniform_int(46);
    SparseSym q = random_pd(n, 0.1 + 0.2 * rng.uniform(), rng);
    CholeskyFactor f = numeric_cholesky(q, amd_order(q));
    SparseSym z = takahashi_selected_inverse(f);
    DenseMat inv = spd_inverse(to_dense(q));
    double scale = 0.0;
    for (auto& v : inv.a) scale = std::max(scale, std::abs(v));
    double err = 0.0;
    for (int j = 0; j < z.n; ++j)
      for (int p = z.col_ptr[j]; p < z.col_ptr[j + 1]; ++p)
        err = std::max(err, std::abs(z.values[p] - inv(z.row_idx[p], j)));
    CHECK(err <= 1e-9 * scale);
  }
}

TEST_CASE("chordal_complete: tree input is returned unchanged") {
  // small tree: 0-1, 1-2, 1-3, 3-4
  SparseSym t = sym_from_triplets(5, {1, 2, 3, 4}, {0, 1, 1, 3}, {}, false);
  SparseSym g = chordal_complete(t, amd_order(t));
  CHECK(same_pattern(g, strict_lower(t)));
}

TEST_CASE("chordal_complete: 4-cycle gains exactly one chord") {
  SparseSym c4 = sym_from_triplets(4, {1, 2, 3, 3}, {0, 1, 2, 0}, {}, false);
  SparseSym g = chordal_complete(c4, amd_order(c4));
  CHECK(g.nnz() == 5);
  CHECK(is_chordal(g));
}

TEST_CASE("chordal_complete: 4x4 grid output passes the chordality test") {
  SparseSym s = grid_structure(4, 4);
  for (auto perm : {amd_order(s), rcm_order(s), Permutation::identity(16)}) {
    SparseSym g = chordal_complete(s, perm);
    CHECK(is_chordal(g));
    // input edges contained
    for (int j = 0; j < s.n; ++j)
      for (int i : s.col_rows(j)) CHECK(g.find(i, j) >= 0);
  }
}

TEST_CASE("clique_decomposition: edgeless graph gives singletons") {
  SparseSym s = sym_from_triplets(3, {}, {}, {}, false);
  CliqueDecomposition d = clique_decomposition(s);
  REQUIRE(d.cliques.size() == 3);
  for (auto& c : d.cliques) {
    CHECK(c.members.size() == 1);
    CHECK(c.separator.empty());
  }
}

TEST_CASE("clique_decomposition: path a-b-c") {
  SparseSym s = sym_from_triplets(3, {1, 2}, {0, 1}, {}, false);
  CliqueDecomposition d = clique_decomposition(s);
  REQUIRE(d.cliques.size() == 2);
  CHECK(d.cliques[0].members == std::vector<int>{0, 1});
  CHECK(d.cliques[1].members == std::vector<int>{1, 2});
  CHECK(d.cliques[1].separator == std::vector<int>{1});
  CHECK(d.cliques[1].residual == std::vector<int>{2});
}

TEST_CASE("clique_decomposition: 4-cycle is rejected") {
  SparseSym c4 = sym_from_triplets(4, {1, 2, 3, 3}, {0, 1, 2, 0}, {}, false);
  CHECK_THROWS_AS(clique_decomposition(c4), NotChordal);
}

TEST_CASE("clique_decomposition: running intersection on random chordal graphs") {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    int n = 4 + rng.uniform_int(20);
    SparseSym base = random_pd(n, 0.25, rng);
    SparseSym g = chordal_complete(strict_lower(base), amd_order(base));
    CliqueDecomposition d = clique_decomposition(g);
    std::vector<char> seen(n, 0);
    std::vector<int> res_count(n, 0);
    for (size_t k = 0; k < d.cliques.size(); ++k) {
      auto& c = d.cliques[k];
      // S_k ∪ R_k = C_k disjointly
      std::vector<int> u;
      std::merge(c.separator.begin(), c.separator.end(), c.residual.begin(), c.residual.end(),
                 std::back_inserter(u));
      CHECK(u == c.members);
      // S_k contained in a single earlier clique
      if (k > 0) {
        bool found = c.separator.empty();
        for (size_t e = 0; e < k && !found; ++e)
          found = std::includes(d.cliques[e].members.begin(), d.cliques[e].members.end(),
                                c.separator.begin(), c.separator.end());
        CHECK(found);
      } else {
        CHECK(c.separator.empty());
      }
      for (int v : c.separator) CHECK(seen[v]);
      for (int v : c.residual) {
        CHECK(!seen[v]);
        ++res_count[v];
      }
      for (int v : c.members) seen[v] = 1;
    }
    for (int v = 0; v < n; ++v) CHECK(res_count[v] == 1);
  }
}

TEST_CASE("amd beats identity on most random banded/grid instances") {
  Rng rng(31);
  int wins = 0, total = 0;
  for (int trial = 0; trial < 30; ++trial) {
    SparseSym s;
    if (trial % 2 == 0) {
      int r = 3 + rng.uniform_int(4), c = 3 + rng.uniform_int(4);
      s = grid_structure(r, c);
    } else {
      int n = 10 + rng.uniform_int(20);
      std::vector<int> is, js;
      for (int j = 0; j < n; ++j)
        for (int b = 1; b <= 3; ++b)
          if (j + b < n && rng.uniform() < 0.7) {
            is.push_back(j + b);
            js.push_back(j);
          }
      s = sym_from_triplets(n, is, js, {}, false);
    }
    // scramble labels so identity is not already optimal
    std::vector<int> lab(s.n);
    std::iota(lab.begin(), lab.end(), 0);
    for (int i = s.n - 1; i > 0; --i) std::swap(lab[i], lab[rng.uniform_int(i + 1)]);
    std::vector<int> is, js;
    for (int j = 0; j < s.n; ++j)
      for (int i : s.col_rows(j)) {
        is.push_back(std::max(lab[i], lab[j]));
        js.push_back(std::min(lab[i], lab[j]));
      }
    SparseSym scr = sym_from_triplets(s.n, is, js, {}, false);
    if (fill_of(scr, amd_order(scr)) <= fill_of(scr, Permutation::identity(scr.n))) ++wins;
    ++total;
  }
  CHECK(double(wins) / total >= 0.9);
}

TEST_CASE("matrix market: exact round-trip") {
  Rng rng(9);
  SparseSym q = random_pd(12, 0.3, rng);
  auto dir = std::filesystem::temp_directory_path() / "stamp_mm_test";
  std::filesystem::create_directories(dir);
  auto path = (dir / "q.mtx").string();
  write_matrix_market(q, path);
  SparseSym r = read_matrix_market_sym(path);
  CHECK(same_pattern(q, r));
  CHECK(q.values == r.values);
  // write(read(f)) is byte-identical to f
  auto path2 = (dir / "q2.mtx").string();
  write_matrix_market(r, path2);
  std::ifstream a(path), b(path2);
  std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}
