#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "stamp/engine/structure.hpp"
#include "stamp/gauss/project.hpp"
#include "stamp/gauss/two_slice.hpp"
#include "stamp/sites/site.hpp"

namespace stamp::engine {

// Inference-side view of the model: expected transition blocks, diagonal
// initial-state prior, per-time sites and data linear terms. Sites at t = 0
// attach to the first slice of the initial pair; all others to the second
// slice of their pair.
struct EngineModel {
  int n = 0;
  int T = 0;
  gauss::TransitionExpectations ex;
  std::vector<double> prior_mean;                     // size n
  std::vector<double> prior_var;                      // size n, diagonal prior
  std::vector<std::vector<sites::SiteFunction>> site_fns;  // T x n (may be empty)
  std::vector<std::vector<double>> h_data;            // T x n linear data terms (may be empty)
  std::vector<std::vector<double>> h_control;         // (T-1) x n transition offsets (may be empty)

  void validate() const;
};

enum class SchedulePolicy { Static, Sequential, Dynamic };

struct EngineConfig {
  SchedulePolicy schedule = SchedulePolicy::Sequential;
  int dynamic_width = 1;        // k concurrent receiver-source pairs
  double tol = 1e-8;
  int max_rounds = 500;
  long long max_updates = 0;    // 0 = unlimited; caps total pair visits
  int inner_iters = 8;          // site/marginal fixed-point steps per visit
  double site_damping = 1.0;    // lowered to 0.9 after a factorisation failure
  double temporal_damping = 1.0;  // blend factor for alpha/beta updates
  bool auto_stabilise = true;     // lower temporal damping on oscillation
  double site_fraction = 1.0;   // power-EP fraction, 1 = plain EP
  int gh_nodes = 32;
  double pivot_rel_tol = 1e-12;
  gauss::OrderingChoice two_slice_order = gauss::OrderingChoice::Amd;
  int threads = 1;
};

struct ConvergenceReport {
  bool converged = false;
  int rounds = 0;
  long long updates = 0;
  double final_max_update = 0.0;
  std::vector<double> round_max_update;
};

struct PhaseTimers {
  double projection = 0.0;  // chordal moment matching
  double linalg = 0.0;      // factorisation, solves, selected inversion
  double sites = 0.0;       // univariate quadrature updates
  double overhead = 0.0;    // everything else inside the run
  double total() const { return projection + linalg + sites + overhead; }
};

struct SmoothedMarginals {
  int n = 0, T = 0;
  std::vector<std::vector<double>> mean;  // T x n
  std::vector<std::vector<double>> var;   // T x n
  std::vector<std::vector<double>> tilted_mean, tilted_var;  // T x n
};

// Accumulated second moments feeding the parameter updates.
struct SufficientStats {
  int n = 0;
  int transitions = 0;
  sparse::SparseSym sum_xx_first;    // Σ_t E[x_t x_t'] on the required pattern
  sparse::SparseGen sum_cross;       // (i,j): Σ_t E[x_{t+1}^i x_t^j] on S(A)
  std::vector<double> sum_sq_second; // Σ_t E[(x_{t+1}^i)^2]
  std::vector<double> sum_x_first, sum_x_second;
};

struct WeakConsistencyReport {
  // residual[t] for interior t (1..T-2): canonical-parameter gap between the
  // two projections of the time-t marginal; 0 at the ends.
  std::vector<double> residual;
  double max_residual = 0.0;
};

// Expectation-constrained message passing over the pair marginals
// q(x_t, x_{t+1}) with temporal messages restricted to G(f).
class Engine {
 public:
  Engine(EngineModel model, sparse::SparseSym g_edges, EngineConfig config);

  // Replaces the expected transition blocks (outer parameter-learning loop);
  // sparsity patterns must be unchanged. Messages keep their values.
  void update_expectations(gauss::TransitionExpectations ex,
                           std::vector<std::vector<double>> h_control = {});

  void reset_messages();

  ConvergenceReport run();

  // Single forward filtering sweep (beta frozen at zero) accumulating the
  // one-step-ahead evidence approximation; returns per-transition log
  // predictive values log p(Y_{t+1} | Y_{1:t}).
  std::vector<double> filter_evidence();

  SmoothedMarginals extract_marginals();
  SufficientStats extract_sufficient_stats();
  WeakConsistencyReport weak_consistency_report();

  // Evidence-style proxy at the current state: filtering evidence under the
  // current expectations (exact log-likelihood for Gaussian models).
  double evidence_proxy();

  const sparse::SparseSym& g_edges() const { return g_edges_; }
  const sparse::SparseSym& msg_pattern() const { return msg_pattern_; }
  const sparse::CliqueDecomposition& cliques() const { return cliques_; }
  const PhaseTimers& timers() const { return timers_; }
  const EngineModel& model() const { return model_; }
  const EngineConfig& config() const { return config_; }

  // Message access for checkpointing and the consistency suite.
  struct Messages {
    std::vector<gauss::CanonicalGaussian> alpha, beta;        // T each
    std::vector<std::vector<sites::SiteMessagePair>> sites;   // T x n
  };
  const Messages& messages() const { return msgs_; }
  void set_messages(Messages msgs);

  // Per-pair joint canonical parameters at the current messages (assembled on
  // demand); used by the evaluation metrics.
  gauss::CanonicalGaussian pair_joint(int pair);

  // log det of the assembled pair precision at the current messages.
  double pair_precision_logdet(int pair);

  // Dense covariance of one slice of a pair marginal; requires the factor
  // pattern to cover the full slice block (the `full` family guarantees it).
  DenseMat slice_cov_dense(int pair, bool second);

 private:
  struct VisitResult {
    double message_change = 0.0;
    double site_change = 0.0;
    bool skipped = false;
    bool pd_failure = false;
  };
  struct VisitOpts {
    bool update_alpha = true;
    bool update_beta = true;
    bool update_sites = true;
    int inner_iters = 0;  // 0: take the configured value
  };

  void assemble_pair(gauss::TwoSliceAssembler& a, int pair, bool with_sites = true,
                     bool with_data = true) const;
  VisitResult visit(gauss::TwoSliceAssembler& a, PhaseTimers& tm, int pair,
                    const VisitOpts& opts);
  double site_pass(int pair, std::span<const double> marg_mean,
                   std::span<const double> marg_var, bool first_slice, PhaseTimers& tm);
  void seed_exact_sites();
  void snapshot_pair(int pair);
  bool recover_pair(gauss::TwoSliceAssembler& a, int pair);
  void bump_neighbours(int pair);
  void maybe_stabilise(const std::vector<double>& trace);
  ConvergenceReport run_sequential();
  ConvergenceReport run_static();
  ConvergenceReport run_dynamic();
  sites::SiteFunction full_site(int t, int j) const;
  gauss::CanonicalGaussian project_slice(gauss::TwoSliceAssembler& a, bool second) const;

  EngineModel model_;
  sparse::SparseSym g_edges_;
  EngineConfig config_;

  sparse::SparseSym msg_pattern_;  // diag + G(f)
  sparse::CliqueDecomposition cliques_;
  std::unique_ptr<gauss::ChordalProjector> projector_;
  std::unique_ptr<gauss::TwoSliceAssembler> asm_;

  // Gather plans from the factor pattern.
  std::vector<int> gf_first_pos_, gf_second_pos_;  // msg-pattern entries
  std::vector<int> diag_first_pos_, diag_second_pos_;
  std::vector<int> cross_pos_;                     // S(A) entries (i+n, j)
  std::vector<int> stats_pos_;                     // stats pattern in slice 1
  sparse::SparseSym stats_pattern_;
  sparse::SparseGen cross_pattern_;                // S(A) as CSR without values
  std::vector<std::vector<int>> clique_pos_first_, clique_pos_second_;

  Messages msgs_;
  std::vector<double> mag_alpha_, mag_beta_;  // last-update magnitudes per time
  std::vector<double> pending_;               // per-pair scheduling priority
  bool filter_mode_ = false;

  // last successfully factored messages per pair, for the back-off path
  struct PairSnapshot {
    gauss::CanonicalGaussian alpha, beta;
    std::vector<sites::SiteMessagePair> sites_second, sites_first;
    bool valid = false;
  };
  std::vector<PairSnapshot> snapshots_;
  std::vector<std::unique_ptr<gauss::TwoSliceAssembler>> pool_;  // dynamic(k) workers

  double current_site_damping_ = 1.0;
  double current_temporal_damping_ = 1.0;
  PhaseTimers timers_;
};

}  // namespace stamp::engine
