#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "stamp/cli/commands.hpp"
#include "stamp/sparse/matrix_market.hpp"

using namespace stamp;
using namespace stamp::cli;
namespace fs = std::filesystem;

namespace {

Json base_config() {
  Json j;
  j["model"] = {{"builder", "one_d"}, {"n", 6},      {"n_neighb", 1}, {"T", 5},
                {"eps_a", 0.025},     {"v_x", 0.25}, {"s", 0.0},
                {"obs", Json{{"kind", "gaussian"}, {"v_obs", 0.0625}, {"p_obs", 0.75}}}};
  j["inference"] = {{"family", "band:1"}, {"schedule", "sequential"}, {"tol", 1e-8}};
  j["output"] = {{"dir", "unused"}};
  return j;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "stamp_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config: unknown keys and invalid tolerances are rejected") {
  Json j = base_config();
  CHECK_NOTHROW(parse_config(j));
  Json bad = j;
  bad["model"]["typo_key"] = 1;
  CHECK_THROWS_AS(parse_config(bad), ValidationError);
  bad = j;
  bad["inference"]["tol"] = -1.0;
  CHECK_THROWS_AS(parse_config(bad), ValidationError);
  bad = j;
  bad["inference"]["family"] = "hexagonal";
  CHECK_THROWS_AS(parse_config(bad), ValidationError);
}

TEST_CASE("config: serialise-parse round trip is the identity") {
  Json j = base_config();
  Config a = parse_config(j);
  Json again = Json::parse(a.raw.dump());
  Config b = parse_config(again);
  CHECK(a.raw == b.raw);
  CHECK(config_hash(a) == config_hash(b));
}

TEST_CASE("simulate is byte-deterministic and infer consumes its output") {
  Config cfg = parse_config(base_config());
  auto d1 = fresh_dir("sim1");
  auto d2 = fresh_dir("sim2");
  cmd_simulate(cfg, 7, d1.string());
  cmd_simulate(cfg, 7, d2.string());
  for (const char* f : {"path.csv", "observations.csv", "a_truth.mtx", "manifest.json"})
    CHECK(slurp(d1 / f) == slurp(d2 / f));

  auto inf1 = fresh_dir("inf1");
  auto inf2 = fresh_dir("inf2");
  cmd_infer(cfg, 7, inf1.string(), d1.string(), 1);
  cmd_infer(cfg, 7, inf2.string(), d1.string(), 1);
  for (const char* f : {"marginals.csv", "consistency.csv", "convergence.csv"})
    CHECK(slurp(inf1 / f) == slurp(inf2 / f));
  CHECK(slurp(inf1 / "checkpoint.bin") == slurp(inf2 / "checkpoint.bin"));
  CHECK(fs::exists(inf1 / "manifest.json"));
}

TEST_CASE("infer reports a clean error on a missing data file") {
  Config cfg = parse_config(base_config());
  auto empty = fresh_dir("no_data");
  auto out = fresh_dir("inf_fail");
  CHECK_THROWS_AS(cmd_infer(cfg, 1, out.string(), empty.string(), 1), IoError);
}

TEST_CASE("learn emits an edge list covering every candidate edge") {
  Json j = base_config();
  j["model"]["obs"] = {{"kind", "poisson"}};
  j["model"]["T"] = 6;
  j["learning"] = {{"enabled", true}, {"p_slab", 0.5},      {"v_slab", 1.0},
                   {"gamma_shape", 2.0}, {"gamma_rate", 0.5}, {"outer_iters", 3},
                   {"outer_tol", 1e-4}};
  Config cfg = parse_config(j);
  auto data = fresh_dir("learn_data");
  cmd_simulate(cfg, 3, data.string());
  auto out1 = fresh_dir("learn_out1");
  auto out2 = fresh_dir("learn_out2");
  cmd_learn(cfg, 3, out1.string(), data.string(), 1);
  cmd_learn(cfg, 99, out2.string(), data.string(), 1);  // seed does not enter learning
  CHECK(slurp(out1 / "edges.csv") == slurp(out2 / "edges.csv"));
  // candidate support: diagonal plus both directions of each band edge
  std::ifstream in(out1 / "edges.csv");
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 6 + 2 * 5);
  CHECK(fs::exists(out1 / "posterior.json"));
  CHECK(fs::exists(out1 / "gamma.csv"));
}

TEST_CASE("learn with p_slab = 1 reports certain inclusion") {
  Json j = base_config();
  j["model"]["obs"] = {{"kind", "poisson"}};
  j["learning"] = {{"enabled", true}, {"p_slab", 1.0},      {"v_slab", 1.0},
                   {"gamma_shape", 2.0}, {"gamma_rate", 0.5}, {"outer_iters", 2},
                   {"outer_tol", 1e-4}};
  Config cfg = parse_config(j);
  auto data = fresh_dir("learn_p1_data");
  cmd_simulate(cfg, 5, data.string());
  auto out = fresh_dir("learn_p1_out");
  cmd_learn(cfg, 5, out.string(), data.string(), 1);
  std::ifstream in(out / "edges.csv");
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int i, jcol;
    double pz, ea;
    REQUIRE(std::sscanf(line.c_str(), "%d,%d,%lf,%lf", &i, &jcol, &pz, &ea) == 4);
    CHECK(pz == doctest::Approx(1.0));
  }
}

TEST_CASE("evaluate roc produces a curve from learn output") {
  Json j = base_config();
  j["model"]["obs"] = {{"kind", "poisson"}};
  j["learning"] = {{"enabled", true}, {"p_slab", 0.5},      {"v_slab", 1.0},
                   {"gamma_shape", 2.0}, {"gamma_rate", 0.5}, {"outer_iters", 2},
                   {"outer_tol", 1e-4}};
  j["evaluation"] = {{"metric", "roc"}};
  Config cfg = parse_config(j);
  auto data = fresh_dir("roc_data");
  cmd_simulate(cfg, 11, data.string());
  auto learned = fresh_dir("roc_learned");
  cmd_learn(cfg, 11, learned.string(), data.string(), 1);
  // make the truth discriminative: knock an edge out of the truth matrix
  // (the 1d generator keeps every band edge, which would be degenerate)
  {
    auto a = sparse::read_matrix_market_gen((data / "a_truth.mtx").string());
    std::vector<int> is, js;
    std::vector<double> vs;
    for (int i = 0; i < a.rows; ++i)
      for (int p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
        if (i == 2 && a.col_idx[p] == 3) continue;
        if (i == 3 && a.col_idx[p] == 2) continue;
        is.push_back(i);
        js.push_back(a.col_idx[p]);
        vs.push_back(a.values[p]);
      }
    sparse::write_matrix_market(sparse::gen_from_triplets(a.rows, a.cols, is, js, vs),
                                (data / "a_truth.mtx").string());
  }
  Json je = j;
  je["evaluation"]["conn_dir"] = learned.string();
  Config ecfg = parse_config(je);
  auto out = fresh_dir("roc_out");
  cmd_evaluate(ecfg, 11, out.string(), data.string(), 1);
  CHECK(fs::exists(out / "roc.csv"));
  std::ifstream in(out / "auc.csv");
  std::string header, value;
  std::getline(in, header);
  std::getline(in, value);
  double auc = std::stod(value);
  CHECK(auc >= 0.0);
  CHECK(auc <= 1.0);
}

TEST_CASE("evaluate rejects an empty artifact directory") {
  Json j = base_config();
  j["evaluation"] = {{"metric", "roc"}};
  Config cfg = parse_config(j);
  auto out = fresh_dir("roc_fail_out");
  auto empty = fresh_dir("roc_fail_data");
  CHECK_THROWS_AS(cmd_evaluate(cfg, 1, out.string(), empty.string(), 1), IoError);
}

TEST_CASE("bench writes the per-phase timing table") {
  Json j;
  j["model"] = {{"builder", "rotation2d"}, {"n_vertices", 24},   {"T", 4},
                {"radius", 3.0},           {"w", 0.4},           {"eps_w", 0.05},
                {"sigma2", 1.0},
                {"obs", Json{{"kind", "lgcp"}, {"dt", 0.2}}},    {"prior_var", 5.0}};
  j["inference"] = {{"family", "diag"}, {"tol", 1e-4}, {"max_rounds", 50}};
  j["bench"] = {{"n_list", Json::array({24})},
                {"families", Json::array({"diag", "tsp", "full"})},
                {"T", 4},
                {"tol", 1e-4},
                {"full_update_budget", 2}};
  Config cfg = parse_config(j);
  auto out = fresh_dir("bench_out");
  cmd_bench(cfg, 2, out.string(), 1);
  std::ifstream in(out / "timings.csv");
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
}
