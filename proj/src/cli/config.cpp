#include "stamp/cli/config.hpp"

#include <fstream>
#include <set>

#include "stamp/models/builders.hpp"
#include "stamp/models/model_io.hpp"
#include "stamp/sparse/matrix_market.hpp"
#include "stamp/util/rng.hpp"

namespace stamp::cli {

namespace {

void reject_unknown(const Json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      throw ValidationError("unknown key '" + it.key() + "' in " + where);
}

double positive(const Json& j, const std::string& key, double fallback) {
  double v = j.value(key, fallback);
  if (!(v > 0.0)) throw ValidationError(key + " must be positive");
  return v;
}

}  // namespace

Config parse_config(const Json& j) {
  Config cfg;
  cfg.raw = j;
  reject_unknown(j, {"model", "inference", "learning", "evaluation", "bench", "output"},
                 "config");

  if (!j.contains("model")) throw ValidationError("config needs a model section");
  const Json& m = j.at("model");
  reject_unknown(m,
                 {"builder", "T", "n", "n_neighb", "eps_a", "v_x", "s", "radius",
                  "n_vertices", "w", "eps_w", "sigma2", "a_file", "q_file",
                  "mesh_vertices", "mesh_triangles", "prior_var", "obs"},
                 "model");
  cfg.builder = m.value("builder", std::string("one_d"));
  if (cfg.builder != "one_d" && cfg.builder != "rotation2d" && cfg.builder != "files")
    throw ValidationError("unknown model builder: " + cfg.builder);
  cfg.T = m.value("T", 0);
  if (cfg.T < 2) throw ValidationError("model.T must be at least 2");
  cfg.n = m.value("n", 0);
  cfg.n_neighb = m.value("n_neighb", 1);
  cfg.eps_a = m.value("eps_a", 0.025);
  cfg.v_x = positive(m, "v_x", 0.25);
  cfg.s = m.value("s", 0.0);
  cfg.radius = positive(m, "radius", 10.0);
  cfg.n_vertices = m.value("n_vertices", 0);
  cfg.w = m.value("w", 0.4);
  cfg.eps_w = m.value("eps_w", 0.05);
  cfg.sigma2 = positive(m, "sigma2", 1.0);
  cfg.a_file = m.value("a_file", std::string());
  cfg.q_file = m.value("q_file", std::string());
  cfg.mesh_vertices = m.value("mesh_vertices", std::string());
  cfg.mesh_triangles = m.value("mesh_triangles", std::string());
  cfg.prior_var_override = m.value("prior_var", 0.0);
  if (m.contains("obs")) {
    const Json& o = m.at("obs");
    reject_unknown(o, {"kind", "v_obs", "p_obs", "dt"}, "model.obs");
    std::string kind = o.value("kind", std::string("gaussian"));
    if (kind == "gaussian")
      cfg.obs.kind = models::ObsModel::Kind::Gaussian;
    else if (kind == "poisson")
      cfg.obs.kind = models::ObsModel::Kind::PoissonCounts;
    else if (kind == "lgcp")
      cfg.obs.kind = models::ObsModel::Kind::Lgcp;
    else
      throw ValidationError("unknown observation kind: " + kind);
    cfg.obs.v_obs = positive(o, "v_obs", 0.0625);
    cfg.obs.p_obs = o.value("p_obs", 0.75);
    if (cfg.obs.p_obs < 0.0 || cfg.obs.p_obs > 1.0)
      throw ValidationError("obs.p_obs must lie in [0,1]");
    cfg.obs.dt = positive(o, "dt", 1.0);
  }

  if (j.contains("inference")) {
    const Json& inf = j.at("inference");
    reject_unknown(inf,
                   {"family", "schedule", "tol", "max_rounds", "inner_iters", "damping",
                    "fraction", "gh_nodes", "ordering"},
                   "inference");
    cfg.family = inf.value("family", std::string("diag"));
    engine::MessageFamily::parse(cfg.family);  // validates the name
    std::string sched = inf.value("schedule", std::string("sequential"));
    if (sched == "sequential")
      cfg.engine.schedule = engine::SchedulePolicy::Sequential;
    else if (sched == "static")
      cfg.engine.schedule = engine::SchedulePolicy::Static;
    else if (sched.rfind("dynamic", 0) == 0) {
      cfg.engine.schedule = engine::SchedulePolicy::Dynamic;
      cfg.engine.dynamic_width =
          sched.size() > 8 ? std::stoi(sched.substr(8)) : 1;
      if (cfg.engine.dynamic_width < 1)
        throw ValidationError("dynamic schedule width must be >= 1");
    } else {
      throw ValidationError("unknown schedule: " + sched);
    }
    cfg.engine.tol = positive(inf, "tol", 1e-8);
    cfg.engine.max_rounds = inf.value("max_rounds", 500);
    cfg.engine.inner_iters = inf.value("inner_iters", 8);
    cfg.engine.site_damping = positive(inf, "damping", 1.0);
    cfg.engine.site_fraction = positive(inf, "fraction", 1.0);
    cfg.engine.gh_nodes = inf.value("gh_nodes", 32);
    if (cfg.engine.gh_nodes < 8) throw ValidationError("gh_nodes must be at least 8");
    std::string ord = inf.value("ordering", std::string("amd"));
    if (ord == "amd")
      cfg.engine.two_slice_order = gauss::OrderingChoice::Amd;
    else if (ord == "rcm")
      cfg.engine.two_slice_order = gauss::OrderingChoice::Rcm;
    else if (ord == "identity")
      cfg.engine.two_slice_order = gauss::OrderingChoice::Identity;
    else
      throw ValidationError("unknown ordering: " + ord);
  }

  if (j.contains("learning")) {
    const Json& l = j.at("learning");
    reject_unknown(l,
                   {"enabled", "p_slab", "v_slab", "gamma_shape", "gamma_rate", "outer_tol",
                    "outer_iters", "learn_q", "structure", "track_evidence"},
                   "learning");
    cfg.learning_enabled = l.value("enabled", true);
    cfg.prior.p_slab = l.value("p_slab", 0.5);
    cfg.prior.v_slab = positive(l, "v_slab", 1.0);
    cfg.prior.gamma_shape = positive(l, "gamma_shape", 2.0);
    cfg.prior.gamma_rate = positive(l, "gamma_rate", 1.0);
    cfg.prior.validate();
    cfg.vb.outer_tol = positive(l, "outer_tol", 1e-6);
    cfg.vb.outer_iters = l.value("outer_iters", 100);
    cfg.vb.learn_q = l.value("learn_q", true);
    cfg.vb.track_evidence = l.value("track_evidence", false);
    cfg.learn_structure = l.value("structure", std::string("model"));
    if (cfg.learn_structure != "model" && cfg.learn_structure != "diag")
      throw ValidationError("learning.structure must be 'model' or 'diag'");
  }

  if (j.contains("evaluation")) {
    const Json& e = j.at("evaluation");
    reject_unknown(e, {"metric", "seeds", "n_msg", "families", "conn_dir", "indep_dir"},
                   "evaluation");
    cfg.metric = e.value("metric", std::string());
    if (e.contains("seeds"))
      for (auto& v : e.at("seeds")) cfg.seeds.push_back(v.get<std::uint64_t>());
    if (e.contains("n_msg"))
      for (auto& v : e.at("n_msg")) cfg.n_msg.push_back(v.get<int>());
    if (e.contains("families"))
      for (auto& v : e.at("families")) cfg.eval_families.push_back(v.get<std::string>());
    cfg.conn_dir = e.value("conn_dir", std::string());
    cfg.indep_dir = e.value("indep_dir", std::string());
  }

  if (j.contains("bench")) {
    const Json& b = j.at("bench");
    reject_unknown(b, {"n_list", "families", "T", "tol", "full_update_budget"}, "bench");
    if (b.contains("n_list"))
      for (auto& v : b.at("n_list")) cfg.bench_n.push_back(v.get<int>());
    if (b.contains("families"))
      for (auto& v : b.at("families")) cfg.bench_families.push_back(v.get<std::string>());
    cfg.bench_T = b.value("T", 200);
    cfg.bench_tol = positive(b, "tol", 1e-4);
    cfg.bench_full_updates = b.value("full_update_budget", 4);
  }

  if (j.contains("output")) {
    const Json& o = j.at("output");
    reject_unknown(o, {"dir"}, "output");
    cfg.out_dir = o.value("dir", std::string("out"));
  }
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  Json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ValidationError(std::string("config parse error: ") + e.what());
  }
  return parse_config(j);
}

std::uint64_t config_hash(const Config& cfg) {
  return Rng::hash_str(cfg.raw.dump());
}

models::ModelSpec build_model(const Config& cfg) {
  models::ModelSpec spec;
  if (cfg.builder == "one_d") {
    if (cfg.n < 2) throw ValidationError("one_d builder needs model.n");
    spec = models::build_1d_model(cfg.n, cfg.n_neighb, cfg.eps_a, cfg.v_x, cfg.s);
  } else if (cfg.builder == "rotation2d") {
    int n = cfg.n_vertices > 0 ? cfg.n_vertices : cfg.n;
    if (n < 4) throw ValidationError("rotation2d builder needs model.n_vertices");
    models::Mesh mesh = models::make_disc_mesh_n(cfg.radius, n);
    spec = models::build_2d_rotation(mesh, cfg.w, cfg.eps_w, cfg.sigma2);
  } else {
    if (cfg.a_file.empty() || cfg.q_file.empty())
      throw ValidationError("files builder needs a_file and q_file");
    spec.a = sparse::read_matrix_market_gen(cfg.a_file);
    spec.q = sparse::read_matrix_market_sym(cfg.q_file);
    spec.n = spec.a.rows;
    if (!cfg.mesh_vertices.empty())
      spec.mesh = models::read_mesh(cfg.mesh_vertices, cfg.mesh_triangles);
    spec.prior_mean.assign(spec.n, 0.0);
    std::vector<double> m_inf;
    DenseMat v_inf;
    models::stationary_moments(spec.a, spec.q, m_inf, v_inf);
    spec.prior_var.resize(spec.n);
    for (int i = 0; i < spec.n; ++i) spec.prior_var[i] = v_inf(i, i);
  }
  spec.obs = cfg.obs;
  if (cfg.obs.kind == models::ObsModel::Kind::Lgcp) {
    if (!spec.mesh) throw ValidationError("lgcp observations need a mesh-based model");
    spec.eta = models::lgcp_discretise(*spec.mesh, cfg.obs.dt);
  }
  if (cfg.prior_var_override > 0.0)
    spec.prior_var.assign(spec.n, cfg.prior_var_override);
  return spec;
}

}  // namespace stamp::cli
