#include "stamp/cli/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "CLI11.hpp"
#include "stamp/engine/checkpoint.hpp"
#include "stamp/eval/metrics.hpp"
#include "stamp/models/builders.hpp"
#include "stamp/models/model_io.hpp"
#include "stamp/models/simulate.hpp"
#include "stamp/sparse/matrix_market.hpp"

namespace stamp::cli {

namespace fs = std::filesystem;

namespace {

bool log_enabled() {
  const char* lvl = std::getenv("STAMP_LOG");
  return !(lvl && std::string(lvl) == "quiet");
}

void log_line(const std::string& msg) {
  if (log_enabled()) std::fprintf(stderr, "[stamp] %s\n", msg.c_str());
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot open for write: " + p.string());
  return out;
}

void write_manifest(const fs::path& dir, const Config& cfg, std::uint64_t seed,
                    const std::string& command, Json extra = Json::object()) {
  Json m;
  m["command"] = command;
  m["seed"] = seed;
  m["config_hash"] = config_hash(cfg);
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  auto out = open_out(dir / "manifest.json");
  out << m.dump(2) << "\n";
}

models::EventData load_data(const Config& cfg, const std::string& data_dir) {
  fs::path file = fs::path(data_dir) / "observations.csv";
  if (!fs::exists(file)) throw IoError("missing data file: " + file.string());
  models::EventData data = models::read_events(cfg.obs.kind, file.string());
  if (data.T > cfg.T)
    throw ValidationError("data covers more time bins than the configured horizon");
  // trailing bins may be empty; the configured horizon wins
  data.T = cfg.T;
  switch (cfg.obs.kind) {
    case models::ObsModel::Kind::Gaussian: data.gaussian_obs.resize(data.T); break;
    case models::ObsModel::Kind::PoissonCounts: {
      data.counts.resize(data.T);
      break;
    }
    case models::ObsModel::Kind::Lgcp: break;
  }
  return data;
}

struct EngineBundle {
  std::unique_ptr<engine::Engine> eng;
  models::ModelSpec spec;
};

EngineBundle make_inference_engine(const Config& cfg, const models::EventData& data,
                                   int threads) {
  EngineBundle b;
  b.spec = build_model(cfg);
  auto em = models::to_engine_model(b.spec, data);
  // poisson counts may be dense; ensure count rows cover every coordinate
  if (cfg.obs.kind == models::ObsModel::Kind::PoissonCounts)
    for (auto& row : em.h_data) row.resize(b.spec.n, 0.0);
  engine::EngineConfig ec = cfg.engine;
  ec.threads = threads;
  b.eng = std::make_unique<engine::Engine>(
      std::move(em), family_edges(b.spec.a, cfg.family), ec);
  return b;
}

void write_marginals(const fs::path& dir, const engine::SmoothedMarginals& marg) {
  auto out = open_out(dir / "marginals.csv");
  out << "t,node,mean,var\n";
  for (int t = 0; t < marg.T; ++t)
    for (int j = 0; j < marg.n; ++j)
      out << t << "," << j << "," << fmt17(marg.mean[t][j]) << "," << fmt17(marg.var[t][j])
          << "\n";
}

void write_convergence(const fs::path& dir, const engine::ConvergenceReport& rep) {
  auto out = open_out(dir / "convergence.csv");
  out << "round,max_update\n";
  for (size_t r = 0; r < rep.round_max_update.size(); ++r)
    out << (r + 1) << "," << fmt17(rep.round_max_update[r]) << "\n";
}

void write_edges(const fs::path& dir, const std::vector<params::RowPosterior>& rows) {
  auto out = open_out(dir / "edges.csv");
  out << "i,j,p_z,e_a\n";
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t k = 0; k < rows[i].support.size(); ++k)
      out << i << "," << rows[i].support[k] << "," << fmt17(rows[i].inclusion[k]) << ","
          << fmt17(rows[i].mean[k]) << "\n";
}

struct LearnedParams {
  sparse::SparseGen e_a;
  std::vector<double> e_q;
};

LearnedParams read_learned(const std::string& dir, int n) {
  LearnedParams lp;
  std::ifstream in(fs::path(dir) / "edges.csv");
  if (!in) throw IoError("missing edges.csv in " + dir);
  std::string line;
  std::getline(in, line);
  std::vector<int> is, js;
  std::vector<double> vs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int i, j;
    double pz, ea;
    if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &i, &j, &pz, &ea) != 4)
      throw IoError("bad edges row in " + dir);
    is.push_back(i);
    js.push_back(j);
    vs.push_back(ea);
  }
  lp.e_a = sparse::gen_from_triplets(n, n, is, js, vs);
  std::ifstream gin(fs::path(dir) / "gamma.csv");
  if (!gin) throw IoError("missing gamma.csv in " + dir);
  std::getline(gin, line);
  lp.e_q.assign(n, 0.0);
  while (std::getline(gin, line)) {
    if (line.empty()) continue;
    int i;
    double shape, rate;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf", &i, &shape, &rate) != 3)
      throw IoError("bad gamma row in " + dir);
    lp.e_q[i] = shape / rate;
  }
  return lp;
}

}  // namespace

sparse::SparseSym family_edges(const sparse::SparseGen& a, const std::string& family) {
  engine::MessageFamily fam = engine::MessageFamily::parse(family);
  sparse::SparseSym s_a = sparse::structure_of(a);
  if (fam.kind == engine::MessageFamily::Kind::Tsp) {
    std::vector<int> is, js;
    std::vector<double> vs;
    for (int i = 0; i < a.rows; ++i)
      for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p)
        if (a.col_idx[p] != i) {
          is.push_back(std::max(i, a.col_idx[p]));
          js.push_back(std::min(i, a.col_idx[p]));
          vs.push_back(std::abs(a.values[p]));
        }
    sparse::SparseSym weights = sparse::sym_from_triplets(a.rows, is, js, vs);
    return engine::build_message_structure(s_a, fam, &weights);
  }
  return engine::build_message_structure(s_a, fam);
}

sparse::SparseGen candidate_structure(const models::ModelSpec& spec,
                                      const std::string& which) {
  std::vector<int> is, js;
  std::vector<double> vs;
  for (int i = 0; i < spec.n; ++i) {
    is.push_back(i);
    js.push_back(i);
    vs.push_back(0.0);
  }
  if (which == "model") {
    sparse::SparseSym grid =
        spec.mesh ? spec.mesh->edge_structure() : sparse::structure_of(spec.a);
    for (int j = 0; j < grid.n; ++j)
      for (int i : grid.col_rows(j)) {
        is.push_back(i);
        js.push_back(j);
        vs.push_back(0.0);
        is.push_back(j);
        js.push_back(i);
        vs.push_back(0.0);
      }
  } else if (which != "diag") {
    throw ValidationError("unknown learning structure: " + which);
  }
  return sparse::gen_from_triplets(spec.n, spec.n, is, js, vs);
}

void cmd_simulate(const Config& cfg, std::uint64_t seed, const std::string& out_dir) {
  fs::create_directories(out_dir);
  models::ModelSpec spec = build_model(cfg);
  log_line("simulate: n=" + std::to_string(spec.n) + " T=" + std::to_string(cfg.T));
  models::Simulation sim = models::simulate(spec, cfg.T, seed);
  fs::path dir(out_dir);
  models::write_path_csv(sim.path, (dir / "path.csv").string());
  models::write_events(sim.data, (dir / "observations.csv").string());
  sparse::write_matrix_market(spec.a, (dir / "a_truth.mtx").string());
  sparse::write_matrix_market(spec.q, (dir / "q.mtx").string());
  Json extra;
  extra["n"] = spec.n;
  extra["T"] = cfg.T;
  if (spec.mesh) {
    models::write_mesh(*spec.mesh, (dir / "mesh_vertices.csv").string(),
                       (dir / "mesh_triangles.csv").string());
    extra["mesh"] = true;
  }
  long long count = 0;
  switch (cfg.obs.kind) {
    case models::ObsModel::Kind::Gaussian:
      for (auto& row : sim.data.gaussian_obs) count += (long long)row.size();
      break;
    case models::ObsModel::Kind::PoissonCounts:
      for (auto& row : sim.data.counts)
        for (long c : row) count += c;
      break;
    case models::ObsModel::Kind::Lgcp: count = (long long)sim.data.events.size(); break;
  }
  extra["observation_count"] = count;
  write_manifest(dir, cfg, seed, "simulate", extra);
}

void cmd_infer(const Config& cfg, std::uint64_t seed, const std::string& out_dir,
               const std::string& data_dir, int threads) {
  fs::create_directories(out_dir);
  models::EventData data = load_data(cfg, data_dir);
  EngineBundle b = make_inference_engine(cfg, data, threads);
  log_line("infer: family=" + cfg.family + " T=" + std::to_string(cfg.T));
  engine::ConvergenceReport rep = b.eng->run();
  engine::SmoothedMarginals marg = b.eng->extract_marginals();
  engine::WeakConsistencyReport wc = b.eng->weak_consistency_report();
  fs::path dir(out_dir);
  write_marginals(dir, marg);
  write_convergence(dir, rep);
  {
    auto out = open_out(dir / "consistency.csv");
    out << "t,residual\n";
    for (size_t t = 0; t < wc.residual.size(); ++t)
      out << t << "," << fmt17(wc.residual[t]) << "\n";
  }
  engine::write_checkpoint((dir / "checkpoint.bin").string(), b.eng->messages(),
                           b.eng->msg_pattern());
  Json extra;
  extra["converged"] = rep.converged;
  extra["rounds"] = rep.rounds;
  extra["max_consistency_residual"] = wc.max_residual;
  if (!rep.converged) extra["partial"] = true;
  write_manifest(dir, cfg, seed, "infer", extra);
}

void cmd_learn(const Config& cfg, std::uint64_t seed, const std::string& out_dir,
               const std::string& data_dir, int threads) {
  fs::create_directories(out_dir);
  models::EventData data = load_data(cfg, data_dir);
  models::ModelSpec spec = build_model(cfg);
  sparse::SparseGen candidate = candidate_structure(spec, cfg.learn_structure);
  log_line("learn: structure=" + cfg.learn_structure + " family=" + cfg.family);

  // engine over the candidate structure, expectations from the prior
  models::ModelSpec cand_spec = spec;
  cand_spec.a = candidate;
  {
    std::vector<int> idx(spec.n);
    std::vector<double> qd(spec.n, cfg.prior.gamma_shape / cfg.prior.gamma_rate);
    for (int i = 0; i < spec.n; ++i) idx[i] = i;
    cand_spec.q = sparse::sym_from_triplets(spec.n, idx, idx, qd);
  }
  auto em = models::to_engine_model(cand_spec, data);
  if (cfg.obs.kind == models::ObsModel::Kind::PoissonCounts)
    for (auto& row : em.h_data) row.resize(spec.n, 0.0);
  std::vector<double> e_q0(spec.n, cfg.prior.gamma_shape / cfg.prior.gamma_rate);
  em.ex = params::prior_expectations(candidate, cfg.prior, e_q0);
  engine::EngineConfig ec = cfg.engine;
  ec.threads = threads;
  engine::Engine eng(std::move(em), family_edges(candidate, cfg.family), ec);

  params::VbResult res = params::vb_outer_loop(eng, candidate, cfg.prior, cfg.vb);

  fs::path dir(out_dir);
  write_edges(dir, res.rows);
  {
    auto out = open_out(dir / "gamma.csv");
    out << "i,shape,rate\n";
    for (size_t i = 0; i < res.gamma.shape.size(); ++i)
      out << i << "," << fmt17(res.gamma.shape[i]) << "," << fmt17(res.gamma.rate[i])
          << "\n";
  }
  {
    Json post;
    post["rows"] = Json::array();
    for (size_t i = 0; i < res.rows.size(); ++i) {
      Json row;
      row["i"] = i;
      row["support"] = res.rows[i].support;
      row["mean"] = res.rows[i].mean;
      row["inclusion"] = res.rows[i].inclusion;
      post["rows"].push_back(row);
    }
    post["gamma"]["shape"] = res.gamma.shape;
    post["gamma"]["rate"] = res.gamma.rate;
    auto out = open_out(dir / "posterior.json");
    out << post.dump(2) << "\n";
  }
  {
    auto out = open_out(dir / "diagnostics.csv");
    out << "cycle,param_change,engine_rounds\n";
    for (size_t c = 0; c < res.diagnostics.param_change.size(); ++c)
      out << (c + 1) << "," << fmt17(res.diagnostics.param_change[c]) << ","
          << res.diagnostics.engine_rounds[c] << "\n";
  }
  write_marginals(dir, res.marginals);
  Json extra;
  extra["outer_iterations"] = res.diagnostics.outer_iterations;
  extra["converged"] = res.diagnostics.converged;
  write_manifest(dir, cfg, seed, "learn", extra);
}

void cmd_evaluate(const Config& cfg, std::uint64_t seed, const std::string& out_dir,
                  const std::string& data_dir, int threads) {
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  if (cfg.metric.empty()) throw ValidationError("evaluation.metric is required");
  log_line("evaluate: metric=" + cfg.metric);

  if (cfg.metric == "kl_grid" || cfg.metric == "qq_grid") {
    bool kl = cfg.metric == "kl_grid";
    if (cfg.seeds.empty() || cfg.n_msg.empty())
      throw ValidationError("grid evaluation needs evaluation.seeds and evaluation.n_msg");
    auto out = open_out(dir / (kl ? "kl_scores.csv" : "qq_scores.csv"));
    out << "seed,n_msg,score\n";
    for (std::uint64_t sd : cfg.seeds) {
      models::ModelSpec spec = build_model(cfg);
      models::Simulation sim = models::simulate(spec, cfg.T, sd);
      std::vector<eval::JointMoments> reference;
      if (kl) {
        auto em = models::to_engine_model(spec, sim.data);
        engine::EngineConfig ec = cfg.engine;
        ec.threads = threads;
        engine::Engine ref(std::move(em), family_edges(spec.a, "full"), ec);
        ref.run();
        reference = eval::collect_pair_moments(ref);
      }
      for (int nm : cfg.n_msg) {
        auto em = models::to_engine_model(spec, sim.data);
        engine::EngineConfig ec = cfg.engine;
        ec.threads = threads;
        std::string fam = nm <= 0 ? "diag" : ("band:" + std::to_string(nm));
        engine::Engine eng(std::move(em), family_edges(spec.a, fam), ec);
        eng.run();
        double score = kl ? eval::kl_accuracy(reference, eval::collect_pair_moments(eng))
                          : eval::qq_deviation(eng, sim.path);
        out << sd << "," << nm << "," << fmt17(score) << "\n";
      }
    }
    write_manifest(dir, cfg, seed, "evaluate");
    return;
  }

  if (cfg.metric == "roc") {
    if (data_dir.empty()) throw ValidationError("roc evaluation needs --data");
    sparse::SparseGen truth =
        sparse::read_matrix_market_gen((fs::path(data_dir) / "a_truth.mtx").string());
    std::ifstream in(fs::path(cfg.conn_dir.empty() ? data_dir : cfg.conn_dir) /
                     "edges.csv");
    if (!in) throw IoError("missing edges.csv for roc evaluation");
    std::string line;
    std::getline(in, line);
    std::vector<double> scores;
    std::vector<bool> labels;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      int i, j;
      double pz, ea;
      if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &i, &j, &pz, &ea) != 4)
        throw IoError("bad edges row");
      if (i == j) continue;  // the self-loop is structural, not a candidate
      scores.push_back(pz);
      labels.push_back(truth.at(i, j) != 0.0);
    }
    eval::RocCurve roc = eval::structure_roc(scores, labels);
    {
      auto out = open_out(dir / "roc.csv");
      out << "threshold,fpr,tpr\n";
      for (size_t k = 0; k < roc.thresholds.size(); ++k)
        out << fmt17(roc.thresholds[k]) << "," << fmt17(roc.fpr[k]) << ","
            << fmt17(roc.tpr[k]) << "\n";
    }
    {
      auto out = open_out(dir / "auc.csv");
      out << "auc\n" << fmt17(roc.auc) << "\n";
    }
    write_manifest(dir, cfg, seed, "evaluate");
    return;
  }

  if (cfg.metric == "predictive") {
    if (cfg.conn_dir.empty() || cfg.indep_dir.empty() || data_dir.empty())
      throw ValidationError("predictive evaluation needs conn_dir, indep_dir and --data");
    models::ModelSpec spec = build_model(cfg);
    models::EventData data = load_data(cfg, data_dir);
    auto run_filter = [&](const std::string& learned_dir) {
      LearnedParams lp = read_learned(learned_dir, spec.n);
      models::ModelSpec sp = spec;
      sp.a = lp.e_a;
      {
        std::vector<int> idx(spec.n);
        for (int i = 0; i < spec.n; ++i) idx[i] = i;
        sp.q = sparse::sym_from_triplets(spec.n, idx, idx, lp.e_q);
      }
      auto em = models::to_engine_model(sp, data);
      if (cfg.obs.kind == models::ObsModel::Kind::PoissonCounts)
        for (auto& row : em.h_data) row.resize(spec.n, 0.0);
      engine::EngineConfig ec = cfg.engine;
      ec.threads = threads;
      engine::Engine eng(std::move(em), family_edges(sp.a, cfg.family), ec);
      return eval::one_step_predictive(eng);
    };
    std::vector<double> conn = run_filter(cfg.conn_dir);
    std::vector<double> indep = run_filter(cfg.indep_dir);
    double total = 0.0;
    auto out = open_out(dir / "predictive.csv");
    out << "t,log_pred_conn,log_pred_indep,log_ratio\n";
    for (size_t t = 0; t < conn.size(); ++t) {
      double ratio = conn[t] - indep[t];
      total += ratio;
      out << (t + 1) << "," << fmt17(conn[t]) << "," << fmt17(indep[t]) << ","
          << fmt17(ratio) << "\n";
    }
    auto sum = open_out(dir / "predictive_summary.csv");
    sum << "total_log_ratio\n" << fmt17(total) << "\n";
    write_manifest(dir, cfg, seed, "evaluate");
    return;
  }
  throw ValidationError("unknown evaluation metric: " + cfg.metric);
}

void cmd_bench(const Config& cfg, std::uint64_t seed, const std::string& out_dir,
               int threads) {
  fs::create_directories(out_dir);
  if (cfg.bench_n.empty() || cfg.bench_families.empty())
    throw ValidationError("bench needs bench.n_list and bench.families");
  fs::path dir(out_dir);
  auto out = open_out(dir / "timings.csv");
  out << "n,family,rounds,updates,converged,projection_s,linalg_s,sites_s,overhead_s,total_"
         "s,per_update_s\n";
  for (int n : cfg.bench_n) {
    models::Mesh mesh = models::make_disc_mesh_n(cfg.radius, n);
    models::ModelSpec spec = models::build_2d_rotation(mesh, cfg.w, cfg.eps_w, cfg.sigma2);
    spec.obs = cfg.obs;
    if (cfg.obs.kind == models::ObsModel::Kind::Lgcp)
      spec.eta = models::lgcp_discretise(mesh, cfg.obs.dt);
    log_line("bench: simulating n=" + std::to_string(n));
    models::Simulation sim = models::simulate(spec, cfg.bench_T, seed);
    for (const std::string& fam : cfg.bench_families) {
      auto em = models::to_engine_model(spec, sim.data);
      if (cfg.obs.kind == models::ObsModel::Kind::PoissonCounts)
        for (auto& row : em.h_data) row.resize(spec.n, 0.0);
      engine::EngineConfig ec = cfg.engine;
      ec.threads = threads;
      ec.tol = cfg.bench_tol;
      if (fam == "full" && cfg.bench_full_updates > 0)
        ec.max_updates = cfg.bench_full_updates;
      engine::Engine eng(std::move(em), family_edges(spec.a, fam), ec);
      log_line("bench: n=" + std::to_string(n) + " family=" + fam);
      engine::ConvergenceReport rep = eng.run();
      const engine::PhaseTimers& tm = eng.timers();
      double per_update = rep.updates > 0 ? tm.total() / double(rep.updates) : 0.0;
      out << n << "," << fam << "," << rep.rounds << "," << rep.updates << ","
          << (rep.converged ? 1 : 0) << "," << fmt17(tm.projection) << ","
          << fmt17(tm.linalg) << "," << fmt17(tm.sites) << "," << fmt17(tm.overhead) << ","
          << fmt17(tm.total()) << "," << fmt17(per_update) << "\n";
    }
  }
  write_manifest(dir, cfg, seed, "bench");
}

int run_cli(int argc, char** argv) {
  CLI::App app{"spatio-temporal latent Gaussian inference toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  bool single_core = false;

  auto add_common = [&](CLI::App* sub, bool needs_data) {
    sub->add_option("--config", config_path, "configuration file")->required();
    sub->add_option("--seed", seed, "random seed");
    sub->add_option("--out", out_dir, "output directory (defaults to config output.dir)");
    if (needs_data) sub->add_option("--data", data_dir, "input artifact directory");
    sub->add_option("--threads", threads, "worker threads");
    sub->add_flag("--single-core", single_core, "force single-threaded execution");
  };
  CLI::App* sim = app.add_subcommand("simulate", "draw a model realisation");
  add_common(sim, false);
  CLI::App* inf = app.add_subcommand("infer", "state-space inference on data");
  add_common(inf, true);
  CLI::App* lrn = app.add_subcommand("learn", "joint state and transition learning");
  add_common(lrn, true);
  CLI::App* evl = app.add_subcommand("evaluate", "metrics and comparisons");
  add_common(evl, true);
  CLI::App* bch = app.add_subcommand("bench", "timing grid");
  add_common(bch, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : int(ErrorKind::Validation);
  }

  try {
    Config cfg = load_config(config_path);
    if (out_dir.empty()) out_dir = cfg.out_dir;
    if (single_core) threads = 1;
    if (sim->parsed()) cmd_simulate(cfg, seed, out_dir);
    if (inf->parsed()) cmd_infer(cfg, seed, out_dir, data_dir.empty() ? out_dir : data_dir, threads);
    if (lrn->parsed()) cmd_learn(cfg, seed, out_dir, data_dir.empty() ? out_dir : data_dir, threads);
    if (evl->parsed()) cmd_evaluate(cfg, seed, out_dir, data_dir, threads);
    if (bch->parsed()) cmd_bench(cfg, seed, out_dir, threads);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return int(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return int(ErrorKind::Io);
  }
  return 0;
}

}  // namespace stamp::cli
