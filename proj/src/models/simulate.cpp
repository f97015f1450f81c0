#include "stamp/models/simulate.hpp"

#include <cmath>

#include "stamp/models/builders.hpp"
#include "stamp/sparse/cholesky.hpp"

namespace stamp::models {

Simulation simulate(const ModelSpec& spec, int T, std::uint64_t seed) {
  if (T < 1) throw ValidationError("simulate needs T >= 1");
  int n = spec.n;
  Rng root(seed);

  std::vector<double> m_inf;
  DenseMat v_inf;
  stationary_moments(spec.a, spec.q, m_inf, v_inf);
  DenseMat l_inf = cholesky_lower(v_inf);

  sparse::CholeskyFactor q_factor =
      sparse::numeric_cholesky(spec.q, sparse::amd_order(spec.q));

  Simulation sim;
  sim.path.assign(T, std::vector<double>(n, 0.0));
  {
    Rng rng = root.stream("init", 0);
    std::vector<double> z(n);
    for (auto& v : z) v = rng.normal();
    for (int i = 0; i < n; ++i) {
      double s = m_inf[i];
      for (int k = 0; k <= i; ++k) s += l_inf(i, k) * z[k];
      sim.path[0][i] = s;
    }
  }
  for (int t = 1; t < T; ++t) {
    Rng rng = root.stream("noise", t);
    std::vector<double> eps(n);
    for (auto& v : eps) v = rng.normal();
    auto noise = sparse::solve_triangular(q_factor, eps, sparse::TriangularSide::Upper);
    auto drift = spec.a.matvec(sim.path[t - 1]);
    for (int i = 0; i < n; ++i) sim.path[t][i] = drift[i] + noise[i];
  }

  sim.data.T = T;
  sim.data.kind = spec.obs.kind;
  switch (spec.obs.kind) {
    case ObsModel::Kind::Gaussian: {
      sim.data.gaussian_obs.assign(T, {});
      double sd = std::sqrt(spec.obs.v_obs);
      for (int t = 0; t < T; ++t) {
        Rng rng = root.stream("obs", t);
        for (int j = 0; j < n; ++j) {
          double u = rng.uniform();
          double noise = rng.normal();
          if (u < spec.obs.p_obs)
            sim.data.gaussian_obs[t].push_back({j, sim.path[t][j] + sd * noise});
        }
      }
      break;
    }
    case ObsModel::Kind::PoissonCounts: {
      sim.data.counts.assign(T, std::vector<long>(n, 0));
      for (int t = 0; t < T; ++t) {
        Rng rng = root.stream("obs", t);
        for (int j = 0; j < n; ++j)
          sim.data.counts[t][j] = rng.poisson(std::exp(sim.path[t][j]));
      }
      break;
    }
    case ObsModel::Kind::Lgcp: {
      if (!spec.mesh) throw ValidationError("lgcp simulation needs a mesh");
      const Mesh& mesh = *spec.mesh;
      double area = mesh.total_area();
      // cumulative triangle areas for uniform sampling over the domain
      std::vector<double> cum(mesh.n_triangles());
      double acc = 0.0;
      for (int tr = 0; tr < mesh.n_triangles(); ++tr) {
        acc += mesh.triangle_area(tr);
        cum[tr] = acc;
      }
      for (int t = 0; t < T; ++t) {
        Rng rng = root.stream("events", t);
        double fmax = sim.path[t][0];
        for (int j = 1; j < n; ++j) fmax = std::max(fmax, sim.path[t][j]);
        // the piecewise-linear field attains its maximum at a vertex; the
        // 1.2 factor is a numerical guard
        double lam_max = 1.2 * std::exp(fmax);
        long proposals = rng.poisson(lam_max * area * spec.obs.dt);
        for (long k = 0; k < proposals; ++k) {
          double pick = rng.uniform() * acc;
          int tr = int(std::lower_bound(cum.begin(), cum.end(), pick) - cum.begin());
          tr = std::min(tr, mesh.n_triangles() - 1);
          double b0 = rng.uniform(), b1 = rng.uniform();
          if (b0 + b1 > 1.0) {
            b0 = 1.0 - b0;
            b1 = 1.0 - b1;
          }
          double b2 = 1.0 - b0 - b1;
          auto& tri = mesh.triangles[tr];
          double ex = b0 * mesh.x[tri[0]] + b1 * mesh.x[tri[1]] + b2 * mesh.x[tri[2]];
          double ey = b0 * mesh.y[tri[0]] + b1 * mesh.y[tri[1]] + b2 * mesh.y[tri[2]];
          double field = b0 * sim.path[t][tri[0]] + b1 * sim.path[t][tri[1]] +
                         b2 * sim.path[t][tri[2]];
          double accept = std::exp(field) / lam_max;
          if (rng.uniform() < accept) sim.data.events.push_back({t, ex, ey});
        }
      }
      break;
    }
  }
  return sim;
}

}  // namespace stamp::models
