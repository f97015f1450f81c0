#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "stamp/models/builders.hpp"
#include "stamp/models/model_io.hpp"
#include "stamp/models/simulate.hpp"
#include "test_helpers.hpp"

using namespace stamp;
using namespace stamp::models;
using namespace testutil;

TEST_CASE("1d model: interior rows share (1-eps)/(1+2nb), boundary rows rescale") {
  ModelSpec spec = build_1d_model(8, 1, 0.025, 0.25, 0.0);
  for (int j = 3; j <= 5; ++j) CHECK(spec.a.at(4, j) == doctest::Approx(0.975 / 3.0));
  // row sums are 1 - eps everywhere
  for (int i = 0; i < 8; ++i) {
    double s = 0.0;
    for (double v : spec.a.row_vals(i)) s += v;
    CHECK(s == doctest::Approx(0.975));
  }
}

TEST_CASE("1d model: implied noise marginal variances equal v_x") {
  for (double s : {-1.0, 0.0, 1.0}) {
    ModelSpec spec = build_1d_model(16, 2, 0.025, 0.25, s);
    DenseMat q = to_dense(spec.q);
    DenseMat qinv = spd_inverse(q);
    for (int i = 0; i < 16; ++i) CHECK(std::abs(qinv(i, i) - 0.25) <= 1e-10);
  }
}

TEST_CASE("1d model: reference configuration builds and simulates") {
  for (int nb : {1, 2, 4, 8}) {
    for (double s : {-1.0, 0.0, 1.0}) {
      ModelSpec spec = build_1d_model(64, nb, 0.025, 0.25, s);
      spec.obs.kind = ObsModel::Kind::Gaussian;
      spec.obs.v_obs = 0.0625;
      spec.obs.p_obs = 0.75;
      auto sim = simulate(spec, 3, 1);
      CHECK(int(sim.path.size()) == 3);
    }
  }
}

TEST_CASE("rotation model: w + eps_w = 1 leaves only the diagonal") {
  Mesh mesh = make_disc_mesh_n(1.0, 24);
  ModelSpec spec = build_2d_rotation(mesh, 0.95, 0.05, 1.0);
  for (int i = 0; i < spec.n; ++i) {
    CHECK(spec.a.at(i, i) == doctest::Approx(0.95));
    for (int j : spec.a.row_cols(i))
      if (j != i) CHECK(spec.a.at(i, j) == doctest::Approx(0.0));
  }
}

TEST_CASE("rotation model: surviving edges form a consistent orientation") {
  // hexagon mesh: centre plus 6 ring vertices
  std::vector<double> xs = {0.0}, ys = {0.0};
  for (int k = 0; k < 6; ++k) {
    xs.push_back(std::cos(k * M_PI / 3.0 + 0.1));
    ys.push_back(std::sin(k * M_PI / 3.0 + 0.1));
  }
  Mesh mesh = delaunay(xs, ys);
  int empties = 0;
  ModelSpec spec = build_2d_rotation(mesh, 0.4, 0.05, 1.0, &empties);
  int both = 0;
  for (int i = 0; i < spec.n; ++i)
    for (int j : spec.a.row_cols(i)) {
      if (j == i) continue;
      double cross_ij =
          (mesh.x[j] - mesh.x[i]) * mesh.y[i] - (mesh.y[j] - mesh.y[i]) * mesh.x[i];
      double cross_ji =
          (mesh.x[i] - mesh.x[j]) * mesh.y[j] - (mesh.y[i] - mesh.y[j]) * mesh.x[j];
      if (spec.a.at(j, i) != 0.0 && !(cross_ij == 0.0 && cross_ji == 0.0)) ++both;
    }
  CHECK(both == 0);
  // row sums are 1 - eps_w except the self-loop-only rows
  for (int i = 0; i < spec.n; ++i) {
    double s = 0.0;
    int nnz_row = 0;
    for (double v : spec.a.row_vals(i)) {
      s += v;
      ++nnz_row;
    }
    if (nnz_row > 1) CHECK(s == doctest::Approx(0.95));
  }
}

TEST_CASE("rotation model: reference parameters accepted at n=362") {
  Mesh mesh = make_disc_mesh_n(10.0, 362);
  CHECK(mesh.n_vertices() == 362);
  ModelSpec spec = build_2d_rotation(mesh, 0.4, 0.05, 1.0);
  CHECK(spec.n == 362);
}

TEST_CASE("stationary moments: closed forms and residuals") {
  // A = 0 gives V = Q^{-1}
  {
    sparse::SparseGen a = sparse::gen_from_triplets(2, 2, std::vector<int>{},
                                                    std::vector<int>{}, std::vector<double>{});
    sparse::SparseSym q =
        sparse::sym_from_triplets(2, {0, 1}, {0, 1}, {2.0, 4.0});
    std::vector<double> m;
    DenseMat v;
    stationary_moments(a, q, m, v);
    CHECK(v(0, 0) == doctest::Approx(0.5));
    CHECK(v(1, 1) == doctest::Approx(0.25));
  }
  // scalar a = 0.5, q = 1: v = 1/(1 - 0.25)
  {
    sparse::SparseGen a = sparse::gen_from_triplets(1, 1, std::vector<int>{0},
                                                    std::vector<int>{0},
                                                    std::vector<double>{0.5});
    sparse::SparseSym q = sparse::sym_from_triplets(1, {0}, {0}, {1.0});
    std::vector<double> m;
    DenseMat v;
    stationary_moments(a, q, m, v);
    CHECK(v(0, 0) == doctest::Approx(4.0 / 3.0));
  }
  // rotation model residual
  {
    Mesh mesh = make_disc_mesh_n(3.0, 55);
    ModelSpec spec = build_2d_rotation(mesh, 0.4, 0.05, 1.0);
    std::vector<double> m;
    DenseMat v;
    stationary_moments(spec.a, spec.q, m, v);
    DenseMat a = to_dense(spec.a);
    DenseMat res = a * v * a.transposed();
    DenseMat qinv = spd_inverse(to_dense(spec.q));
    double err = 0.0;
    for (int i = 0; i < spec.n; ++i)
      for (int j = 0; j < spec.n; ++j)
        err = std::max(err, std::abs(v(i, j) - res(i, j) - qinv(i, j)));
    CHECK(err <= 1e-10);
  }
  // instability detected
  {
    sparse::SparseGen a = sparse::gen_from_triplets(1, 1, std::vector<int>{0},
                                                    std::vector<int>{0},
                                                    std::vector<double>{1.01});
    sparse::SparseSym q = sparse::sym_from_triplets(1, {0}, {0}, {1.0});
    std::vector<double> m;
    DenseMat v;
    CHECK_THROWS_AS(stationary_moments(a, q, m, v), NotStable);
  }
}

TEST_CASE("lgcp discretisation: basis volumes and barycentric event rows") {
  // one unit-area triangle
  std::vector<double> xs = {0.0, 1.0, 0.0}, ys = {0.0, 0.0, 2.0};
  Mesh mesh = delaunay(xs, ys);
  REQUIRE(mesh.n_triangles() == 1);
  CHECK(mesh.total_area() == doctest::Approx(1.0));
  auto eta = lgcp_discretise(mesh, 1.0);
  for (double e : eta) CHECK(e == doctest::Approx(1.0 / 3.0));

  std::vector<double> row(3, 0.0);
  accumulate_event(mesh, 0.0, 0.0, row);  // at vertex 0
  CHECK(row[0] == doctest::Approx(1.0));
  CHECK(row[1] + row[2] == doctest::Approx(0.0));
  std::fill(row.begin(), row.end(), 0.0);
  accumulate_event(mesh, 1.0 / 3.0, 2.0 / 3.0, row);  // centroid
  for (double w : row) CHECK(w == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(accumulate_event(mesh, 5.0, 5.0, row), EventOutsideMesh);
}

TEST_CASE("lgcp discretisation: eta sums to dt * total area") {
  Mesh mesh = make_disc_mesh_n(2.0, 60);
  auto eta = lgcp_discretise(mesh, 0.5);
  double s = 0.0;
  for (double e : eta) s += e;
  CHECK(s == doctest::Approx(0.5 * mesh.total_area()));
}

TEST_CASE("disc mesh: minimal, calibrated, and invariant-checked") {
  Mesh tiny = make_disc_mesh(1.0, 2.0);
  CHECK(tiny.n_triangles() <= 8);
  tiny.validate();

  // edge length calibrated to land near 362 vertices
  double r = 10.0;
  double h = std::sqrt(2.0 * M_PI * r * r / (std::sqrt(3.0) * 362.0));
  Mesh m = make_disc_mesh(r, h);
  CHECK(std::abs(m.n_vertices() - 362) <= 36);
  m.validate();
  // adjacency symmetric by construction of edge_structure
  auto adj = sparse::adjacency(m.edge_structure());
  for (int i = 0; i < m.n_vertices(); ++i)
    for (int j : adj[i])
      CHECK(std::binary_search(adj[j].begin(), adj[j].end(), i));
}

TEST_CASE("simulate: near-noiseless limit keeps the path constant") {
  ModelSpec spec;
  spec.n = 3;
  {
    std::vector<int> idx = {0, 1, 2};
    std::vector<double> ones = {1.0, 1.0, 1.0};
    // A slightly inside the unit circle, precision huge: x stays put
    std::vector<double> diag_a = {0.999999, 0.999999, 0.999999};
    spec.a = sparse::gen_from_triplets(3, 3, idx, idx, diag_a);
    std::vector<double> bigq = {1e8, 1e8, 1e8};
    spec.q = sparse::sym_from_triplets(3, idx, idx, bigq);
  }
  spec.prior_mean.assign(3, 0.0);
  spec.prior_var.assign(3, 1.0);
  spec.obs.kind = ObsModel::Kind::Gaussian;
  spec.obs.p_obs = 0.0;
  auto sim = simulate(spec, 50, 9);
  for (int t = 1; t < 50; ++t)
    for (int j = 0; j < 3; ++j) CHECK(std::abs(sim.path[t][j] - sim.path[0][j]) <= 1e-3);
}

TEST_CASE("simulate: poisson counts match the exp-field on average") {
  ModelSpec spec = build_1d_model(4, 1, 0.05, 0.09, 0.0);
  spec.obs.kind = ObsModel::Kind::PoissonCounts;
  int T = 10000;
  auto sim = simulate(spec, T, 21);
  for (int j = 0; j < 4; ++j) {
    double mean_count = 0.0, mean_field = 0.0, var_field = 0.0;
    for (int t = 0; t < T; ++t) {
      mean_count += double(sim.data.counts[t][j]);
      double lam = std::exp(sim.path[t][j]);
      mean_field += lam;
      var_field += lam;  // Poisson variance around the field
    }
    mean_count /= T;
    mean_field /= T;
    double sd = std::sqrt(var_field) / T;
    CHECK(std::abs(mean_count - mean_field) <= 3.0 * sd + 1e-12);
  }
}

TEST_CASE("simulate: thinning produces the homogeneous count on a flat field") {
  // tiny transition and huge precision pin the field at zero
  Mesh mesh = make_disc_mesh_n(1.5, 40);
  ModelSpec spec;
  spec.n = mesh.n_vertices();
  {
    std::vector<int> idx(spec.n);
    std::vector<double> diag_a(spec.n, 1e-6), bigq(spec.n, 1e8);
    for (int i = 0; i < spec.n; ++i) idx[i] = i;
    spec.a = sparse::gen_from_triplets(spec.n, spec.n, idx, idx, diag_a);
    spec.q = sparse::sym_from_triplets(spec.n, idx, idx, bigq);
  }
  spec.prior_mean.assign(spec.n, 0.0);
  spec.prior_var.assign(spec.n, 1.0);
  spec.obs.kind = ObsModel::Kind::Lgcp;
  spec.obs.dt = 1.0;
  spec.mesh = mesh;
  spec.eta = lgcp_discretise(mesh, spec.obs.dt);
  int T = 200;
  auto sim = simulate(spec, T, 33);
  double expect = mesh.total_area() * T;  // e^0 * |S| * T * dt
  double sd = std::sqrt(expect);
  CHECK(std::abs(double(sim.data.events.size()) - expect) <= 4.0 * sd);
}

TEST_CASE("simulate: byte-identical reruns and csv round-trips") {
  ModelSpec spec = build_1d_model(6, 1, 0.025, 0.25, 0.0);
  spec.obs.kind = ObsModel::Kind::Gaussian;
  auto a = simulate(spec, 4, 99);
  auto b = simulate(spec, 4, 99);
  CHECK(a.path == b.path);
  REQUIRE(a.data.gaussian_obs.size() == b.data.gaussian_obs.size());
  for (int t = 0; t < 4; ++t) CHECK(a.data.gaussian_obs[t] == b.data.gaussian_obs[t]);

  auto dir = std::filesystem::temp_directory_path() / "stamp_models_io";
  std::filesystem::create_directories(dir);
  write_path_csv(a.path, (dir / "path.csv").string());
  auto path2 = read_path_csv((dir / "path.csv").string());
  CHECK(a.path == path2);
  write_events(a.data, (dir / "obs.csv").string());
  auto data2 = read_events(ObsModel::Kind::Gaussian, (dir / "obs.csv").string());
  for (int t = 0; t < 4; ++t) CHECK(a.data.gaussian_obs[t] == data2.gaussian_obs[t]);

  Mesh mesh = make_disc_mesh_n(1.0, 20);
  write_mesh(mesh, (dir / "v.csv").string(), (dir / "t.csv").string());
  Mesh mesh2 = read_mesh((dir / "v.csv").string(), (dir / "t.csv").string());
  CHECK(mesh.x == mesh2.x);
  CHECK(mesh.y == mesh2.y);
  CHECK(mesh.triangles == mesh2.triangles);
}
