#include "stamp/models/builders.hpp"

#include <cmath>

namespace stamp::models {

namespace {

DenseMat dense_of(const sparse::SparseGen& g) {
  DenseMat d(g.rows, g.cols);
  for (int i = 0; i < g.rows; ++i)
    for (int p = g.row_ptr[i]; p < g.row_ptr[i + 1]; ++p)
      d(i, g.col_idx[p]) = g.values[p];
  return d;
}

// Dense inverse of a SparseSym (testbed sizes only).
DenseMat dense_inverse_of(const sparse::SparseSym& s) {
  DenseMat d(s.n, s.n);
  for (int j = 0; j < s.n; ++j)
    for (int p = s.col_ptr[j]; p < s.col_ptr[j + 1]; ++p) {
      d(s.row_idx[p], j) = s.values[p];
      d(j, s.row_idx[p]) = s.values[p];
    }
  return spd_inverse(d);
}

}  // namespace

ModelSpec build_1d_model(int n, int n_neighb, double eps_a, double v_x, double s) {
  if (n < 2 || n_neighb < 1 || n_neighb >= n || !(v_x > 0.0))
    throw ValidationError("invalid 1d model sizes");
  ModelSpec spec;
  spec.n = n;
  {
    std::vector<int> is, js;
    std::vector<double> vs;
    for (int i = 0; i < n; ++i) {
      int lo = std::max(0, i - n_neighb), hi = std::min(n - 1, i + n_neighb);
      double val = (1.0 - eps_a) / double(hi - lo + 1);
      for (int j = lo; j <= hi; ++j) {
        is.push_back(i);
        js.push_back(j);
        vs.push_back(val);
      }
    }
    spec.a = sparse::gen_from_triplets(n, n, is, js, vs);
  }
  {
    // R = I + 10^s R1 with R1 the precision of sum (x_{i+1} - x_i)^2
    std::vector<int> is, js;
    std::vector<double> vs;
    double c = std::pow(10.0, s);
    for (int i = 0; i < n; ++i) {
      double d = 1.0 + c * ((i == 0 || i == n - 1) ? 1.0 : 2.0);
      is.push_back(i);
      js.push_back(i);
      vs.push_back(d);
      if (i + 1 < n) {
        is.push_back(i + 1);
        js.push_back(i);
        vs.push_back(-c);
      }
    }
    sparse::SparseSym r = sparse::sym_from_triplets(n, is, js, vs);
    DenseMat rinv = dense_inverse_of(r);
    std::vector<double> scale(n);
    for (int i = 0; i < n; ++i) scale[i] = std::sqrt(rinv(i, i));
    sparse::SparseSym q = r;
    for (int j = 0; j < n; ++j)
      for (int p = q.col_ptr[j]; p < q.col_ptr[j + 1]; ++p)
        q.values[p] = q.values[p] * scale[q.row_idx[p]] * scale[j] / v_x;
    spec.q = std::move(q);
  }
  spec.prior_mean.assign(n, 0.0);
  DenseMat vinf;
  std::vector<double> minf;
  stationary_moments(spec.a, spec.q, minf, vinf);
  spec.prior_var.resize(n);
  for (int i = 0; i < n; ++i) spec.prior_var[i] = vinf(i, i);
  return spec;
}

ModelSpec build_2d_rotation(const Mesh& mesh, double w, double eps_w, double sigma2,
                            int* empty_rows) {
  if (!(w >= 0.0) || !(w <= 1.0 - eps_w) || !(sigma2 > 0.0))
    throw ValidationError("rotation model needs 0 <= w < 1 - eps_w and sigma2 > 0");
  int n = mesh.n_vertices();
  ModelSpec spec;
  spec.n = n;
  spec.mesh = mesh;
  auto adj = sparse::adjacency(mesh.edge_structure());
  std::vector<int> is, js;
  std::vector<double> vs;
  int empties = 0;
  for (int i = 0; i < n; ++i) {
    std::vector<int> delta;
    for (int j : adj[i]) {
      // 2D cross product of the incoming edge vector with the radius at i;
      // strictly negative means the edge is dropped, zero is kept.
      double cross = (mesh.x[j] - mesh.x[i]) * mesh.y[i] - (mesh.y[j] - mesh.y[i]) * mesh.x[i];
      if (cross >= 0.0) delta.push_back(j);
    }
    is.push_back(i);
    js.push_back(i);
    vs.push_back(w);
    if (delta.empty()) {
      ++empties;
      continue;
    }
    double val = (1.0 - eps_w - w) / double(delta.size());
    for (int j : delta) {
      is.push_back(i);
      js.push_back(j);
      vs.push_back(val);
    }
  }
  if (empty_rows) *empty_rows = empties;
  spec.a = sparse::gen_from_triplets(n, n, is, js, vs);
  {
    std::vector<int> idx(n);
    std::vector<double> qd(n, 1.0 / sigma2);
    for (int i = 0; i < n; ++i) idx[i] = i;
    spec.q = sparse::sym_from_triplets(n, idx, idx, qd);
  }
  spec.obs.kind = ObsModel::Kind::Lgcp;
  spec.eta = lgcp_discretise(mesh, spec.obs.dt);
  spec.prior_mean.assign(n, 0.0);
  DenseMat vinf;
  std::vector<double> minf;
  stationary_moments(spec.a, spec.q, minf, vinf);
  spec.prior_var.resize(n);
  for (int i = 0; i < n; ++i) spec.prior_var[i] = vinf(i, i);
  return spec;
}

void stationary_moments(const sparse::SparseGen& a, const sparse::SparseSym& q,
                        std::vector<double>& m, DenseMat& v) {
  int n = a.rows;
  if (a.cols != n || q.n != n) throw DimensionMismatch("stationary_moments");
  // spectral radius estimate by power iteration
  {
    std::vector<double> x(n, 1.0 / std::sqrt(double(n)));
    double rho = 0.0;
    for (int it = 0; it < 100; ++it) {
      auto y = a.matvec(x);
      double norm = 0.0;
      for (double val : y) norm += val * val;
      norm = std::sqrt(norm);
      if (norm == 0.0) {
        rho = 0.0;
        break;
      }
      rho = norm;
      for (int i = 0; i < n; ++i) x[i] = y[i] / norm;
    }
    if (rho >= 1.0) throw NotStable();
  }
  m.assign(n, 0.0);
  DenseMat qinv = dense_inverse_of(q);
  v = qinv;
  if (n <= 128) {
    // doubling recursion: V <- V + A V A', A <- A*A; geometric in iterations
    DenseMat ak = dense_of(a);
    for (int iter = 0; iter < 200; ++iter) {
      DenseMat term = ak * v * ak.transposed();
      double add = 0.0, scale = 0.0;
      for (size_t k = 0; k < term.a.size(); ++k) {
        v.a[k] += term.a[k];
        add = std::max(add, std::abs(term.a[k]));
        scale = std::max(scale, std::abs(v.a[k]));
      }
      if (!(scale < 1e12)) throw NotStable();
      if (add < 1e-13 * std::max(1.0, scale)) return;
      ak = ak * ak;
    }
    throw NotStable();
  }
  DenseMat av(n, n), avat(n, n);
  for (int iter = 0; iter < 100000; ++iter) {
    // av = A v
    for (int i = 0; i < n; ++i) {
      auto cols = a.row_cols(i);
      auto vals = a.row_vals(i);
      for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (size_t k = 0; k < cols.size(); ++k) s += vals[k] * v(cols[k], j);
        av(i, j) = s;
      }
    }
    // avat = av A' + qinv
    double delta = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        auto cols = a.row_cols(j);
        auto vals = a.row_vals(j);
        double s = qinv(i, j);
        for (size_t k = 0; k < cols.size(); ++k) s += av(i, cols[k]) * vals[k];
        avat(i, j) = s;
        delta = std::max(delta, std::abs(s - v(i, j)));
      }
    std::swap(v, avat);
    if (delta < 1e-12) return;
    if (!(delta < 1e12)) throw NotStable();
  }
  throw NotStable();
}

std::vector<double> lgcp_discretise(const Mesh& mesh, double dt) {
  if (!(dt > 0.0)) throw ValidationError("lgcp discretisation needs dt > 0");
  std::vector<double> eta = mesh.vertex_volumes();
  for (double& e : eta) e *= dt;
  return eta;
}

void accumulate_event(const Mesh& mesh, double ex, double ey, std::span<double> h_row) {
  auto loc = mesh.locate(ex, ey);
  if (!loc) throw EventOutsideMesh(ex, ey);
  auto& tri = mesh.triangles[loc->triangle];
  for (int k = 0; k < 3; ++k) h_row[tri[k]] += loc->bary[k];
}

gauss::TransitionExpectations fixed_expectations(const sparse::SparseGen& a,
                                                 const sparse::SparseSym& q) {
  gauss::TransitionExpectations ex;
  ex.eq = q;
  ex.eqa = sparse::qa_product(q, a);
  ex.eatqa = sparse::atqa(a, q);
  return ex;
}

engine::EngineModel to_engine_model(const ModelSpec& spec, const EventData& data) {
  engine::EngineModel em;
  em.n = spec.n;
  em.T = data.T;
  em.ex = fixed_expectations(spec.a, spec.q);
  em.prior_mean = spec.prior_mean;
  em.prior_var = spec.prior_var;
  em.site_fns.assign(data.T, std::vector<sites::SiteFunction>(spec.n));
  switch (data.kind) {
    case ObsModel::Kind::Gaussian: {
      if (int(data.gaussian_obs.size()) != data.T)
        throw DimensionMismatch("gaussian observation table");
      for (int t = 0; t < data.T; ++t)
        for (auto& [node, value] : data.gaussian_obs[t])
          em.site_fns[t][node] = sites::SiteFunction::gaussian(value, spec.obs.v_obs);
      break;
    }
    case ObsModel::Kind::PoissonCounts: {
      if (int(data.counts.size()) != data.T) throw DimensionMismatch("count table");
      em.h_data.assign(data.T, std::vector<double>(spec.n, 0.0));
      for (int t = 0; t < data.T; ++t)
        for (int j = 0; j < spec.n; ++j) {
          em.site_fns[t][j] = sites::SiteFunction::expcox(0.0, 1.0);
          em.h_data[t][j] = double(data.counts[t][j]);
        }
      break;
    }
    case ObsModel::Kind::Lgcp: {
      if (!spec.mesh || int(spec.eta.size()) != spec.n)
        throw ValidationError("lgcp model needs a mesh and eta weights");
      em.h_data.assign(data.T, std::vector<double>(spec.n, 0.0));
      for (int t = 0; t < data.T; ++t)
        for (int j = 0; j < spec.n; ++j)
          em.site_fns[t][j] = sites::SiteFunction::expcox(0.0, spec.eta[j]);
      for (auto& ev : data.events) {
        if (ev.t < 0 || ev.t >= data.T) throw ValidationError("event time out of range");
        accumulate_event(*spec.mesh, ev.x, ev.y, em.h_data[ev.t]);
      }
      break;
    }
  }
  return em;
}

}  // namespace stamp::models
