#pragma once

#include <vector>

#include "stamp/engine/engine.hpp"

namespace stamp::eval {

struct JointMoments {
  std::vector<double> mean;
  DenseMat cov;
};

// Dense moments of every pair marginal at the engine's current messages.
std::vector<JointMoments> collect_pair_moments(engine::Engine& eng);

// Mean symmetric KL divergence between matched pair marginals:
//   S = 1/(2 (T-1)) * sum_t [ KL(q||p) + KL(p||q) ].
double kl_accuracy(const std::vector<JointMoments>& exact,
                   const std::vector<JointMoments>& approx);

// Standard-normal quantile function (Newton-refined to ~1e-14).
double normal_quantile(double p);

// Whitened out-of-sample residuals L' (x - m) pooled over all pair blocks,
// compared to standard-normal quantiles at `bins` equispaced levels; returns
// the mean absolute deviation.
double qq_deviation(engine::Engine& eng, const std::vector<std::vector<double>>& truth_path,
                    int bins = 50);

struct RocCurve {
  std::vector<double> thresholds, fpr, tpr;
  double auc = 0.0;
};

// Threshold sweep over inclusion scores against boolean truth labels.
RocCurve structure_roc(std::span<const double> scores, const std::vector<bool>& truth);

// One-step-ahead evidence approximation from a filtering pass:
// log p(Y_{t+1} | Y_{1:t}) per transition.
std::vector<double> one_step_predictive(engine::Engine& eng);

}  // namespace stamp::eval
