#pragma once

#include <vector>

#include "stamp/engine/engine.hpp"
#include "stamp/util/dense.hpp"

namespace stamp::params {

struct PriorSpec {
  double v_slab = 1.0;      // slab variance of transition coefficients
  double p_slab = 0.5;      // prior inclusion probability; 1 = plain Gaussian
  double gamma_shape = 2.0; // shape k of the q_ii prior
  double gamma_rate = 1.0;  // rate tau
  double v_b = 1.0;         // prior variance of covariate coefficients

  void validate() const;
};

// Natural parameters of the Gaussian evidence for one transition row,
// restricted to its structural support.
struct RowGaussian {
  std::vector<int> support;  // I_i, ascending
  std::vector<double> h;     // |I_i|
  DenseMat q;                // |I_i| x |I_i|
};

// Exact posterior of (a_{i,I_i}, z_{i,I_i}) from enumerating the 2^{|I_i|}
// spike/slab configurations.
struct RowPosterior {
  std::vector<int> support;
  std::vector<double> mean;        // E[a_j]
  DenseMat second_moment;          // E[a_j a_k]
  std::vector<double> inclusion;   // p(z_j = 1)
  double log_normaliser = 0.0;
};

struct GammaPosterior {
  std::vector<double> shape, rate;
  double mean(int i) const { return shape[i] / rate[i]; }
};

struct BPosterior {
  int n = 0, m = 0;              // coefficient matrix is n x m
  std::vector<double> mean;      // column-stacked vec(B)
  DenseMat cov;                  // (n*m) x (n*m)
};

// Row evidence from the accumulated smoother moments:
//   Q = E[q_ii] * sum_t E[x_{t,I} x_{t,I}'],  h = E[q_ii] * sum_t E[x_{t+1}^i x_{t,I}].
// The optional control adjustment subtracts
//   E[q_ii] * sum_t (E[B] u_t)_i E[x_{t,I}] from h.
RowGaussian assemble_row_gaussian(int row, const engine::SufficientStats& stats,
                                  double e_q_ii,
                                  std::span<const double> control_x_sum = {});

// Hard cap on the enumerable support size.
inline constexpr int kMaxSupport = 25;

RowPosterior row_spike_slab_exact(const RowGaussian& row, const PriorSpec& prior);

// Per-coordinate Gamma update. `control_terms`, when present, adds the
// covariate contribution to the quadratic residual statistic.
GammaPosterior update_q_gamma(const engine::SufficientStats& stats,
                              const std::vector<RowPosterior>& rows,
                              const PriorSpec& prior,
                              std::span<const double> control_terms = {});

// Conjugate Gaussian update of vec(B) with N(0, v_b) priors:
//   precision = sum_t u_t u_t' (x) E[Q] + I / v_b.
// `means` are the smoothed state means (T x n); `u` holds u_t for each
// transition (T-1 rows).
BPosterior update_b_gaussian(const std::vector<std::vector<double>>& means,
                             const sparse::SparseGen& e_a,
                             std::span<const double> e_q_diag,
                             const std::vector<std::vector<double>>& u, double v_b);

// Expected transition blocks from the row posteriors and E[q]:
//   E[A], E[Q]E[A] and E[A'QA]_{jk} = sum_i E[q_ii] E[a_ij a_ik]
// (within-row second moments kept exactly; rows are independent).
gauss::TransitionExpectations expected_transition_products(
    const std::vector<RowPosterior>& rows, std::span<const double> e_q_diag, int n);

// Prior-moment expectations used to initialise the outer loop (zero mean,
// within-row second moment p_slab * v_slab on the diagonal).
gauss::TransitionExpectations prior_expectations(const sparse::SparseGen& a_structure,
                                                 const PriorSpec& prior,
                                                 std::span<const double> e_q_diag);

// Exact variational free energy of the conjugate configuration (diagonal Q,
// Gaussian observations, p_slab = 1, `full` message family): the quantity the
// coordinate ascent monotonically increases. Marginals/stats/rows/gamma must
// all be consistent with the engine's current expectations.
double conjugate_elbo(engine::Engine& eng, const engine::SufficientStats& stats,
                      const engine::SmoothedMarginals& marg,
                      const std::vector<RowPosterior>& rows, const GammaPosterior& gamma,
                      const PriorSpec& prior);

struct VbConfig {
  double outer_tol = 1e-6;
  int outer_iters = 100;
  bool learn_q = true;
  bool track_evidence = false;  // evidence proxy per cycle (extra filter pass)
};

struct VbDiagnostics {
  int outer_iterations = 0;
  bool converged = false;
  std::vector<double> param_change;     // per cycle
  std::vector<int> engine_rounds;       // per cycle
  std::vector<double> evidence;         // per cycle when tracked
};

struct VbResult {
  std::vector<RowPosterior> rows;
  GammaPosterior gamma;
  engine::SmoothedMarginals marginals;
  engine::ConvergenceReport last_engine_report;
  VbDiagnostics diagnostics;
};

// Coordinate-ascent cycle q_X -> q_AZ -> q_Q until the expected parameters
// stabilise. The engine must be built with G(f) and the structural pattern of
// `a_structure`; its expectations are replaced each cycle.
VbResult vb_outer_loop(engine::Engine& eng, const sparse::SparseGen& a_structure,
                       const PriorSpec& prior, const VbConfig& config);

}  // namespace stamp::params
