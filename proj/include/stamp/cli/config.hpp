#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "stamp/engine/engine.hpp"
#include "stamp/models/model_spec.hpp"
#include "stamp/params/params.hpp"

namespace stamp::cli {

using Json = nlohmann::json;

// Schema-validated experiment configuration. Unknown keys are rejected and
// every tolerance must be positive.
struct Config {
  Json raw;

  // model
  std::string builder;  // "one_d" | "rotation2d" | "files"
  int T = 0;
  // one_d parameters
  int n = 0, n_neighb = 1;
  double eps_a = 0.025, v_x = 0.25, s = 0.0;
  // rotation parameters
  double radius = 10.0;
  int n_vertices = 0;
  double w = 0.4, eps_w = 0.05, sigma2 = 1.0;
  // files
  std::string a_file, q_file, mesh_vertices, mesh_triangles;
  double prior_var_override = 0.0;  // 0: stationary diagonal
  models::ObsModel obs;

  // inference
  std::string family = "diag";
  engine::EngineConfig engine;

  // learning
  bool learning_enabled = false;
  params::PriorSpec prior;
  params::VbConfig vb;
  std::string learn_structure = "model";  // "model" | "diag"

  // evaluation
  std::string metric;  // kl_grid | qq_grid | roc | predictive
  std::vector<std::uint64_t> seeds;
  std::vector<int> n_msg;
  std::vector<std::string> eval_families;
  std::string conn_dir, indep_dir;

  // bench
  std::vector<int> bench_n;
  std::vector<std::string> bench_families;
  int bench_T = 200;
  double bench_tol = 1e-4;
  long long bench_full_updates = 4;

  std::string out_dir = "out";
};

Config load_config(const std::string& path);
Config parse_config(const Json& j);

// Stable content hash of the canonical serialisation.
std::uint64_t config_hash(const Config& cfg);

// Model construction per the config's builder section.
models::ModelSpec build_model(const Config& cfg);

}  // namespace stamp::cli
