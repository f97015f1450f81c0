#pragma once

#include <cstdint>
#include <string>

#include "stamp/cli/config.hpp"

namespace stamp::cli {

// Batch commands; each writes its artifacts plus a manifest.json into
// `out_dir` and is byte-deterministic given (config, seed). `data_dir` points
// at material from an earlier command (usually simulate).
void cmd_simulate(const Config& cfg, std::uint64_t seed, const std::string& out_dir);
void cmd_infer(const Config& cfg, std::uint64_t seed, const std::string& out_dir,
               const std::string& data_dir, int threads);
void cmd_learn(const Config& cfg, std::uint64_t seed, const std::string& out_dir,
               const std::string& data_dir, int threads);
void cmd_evaluate(const Config& cfg, std::uint64_t seed, const std::string& out_dir,
                  const std::string& data_dir, int threads);
void cmd_bench(const Config& cfg, std::uint64_t seed, const std::string& out_dir,
               int threads);

// G(f) edge structure for a model and family name (handles tsp weights).
sparse::SparseSym family_edges(const sparse::SparseGen& a, const std::string& family);

// Candidate support for transition learning: the model's symmetric grid
// structure plus the diagonal, or the diagonal alone.
sparse::SparseGen candidate_structure(const models::ModelSpec& spec,
                                      const std::string& which);

int run_cli(int argc, char** argv);

}  // namespace stamp::cli
