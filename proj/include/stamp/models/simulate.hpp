#pragma once

#include "stamp/models/model_spec.hpp"
#include "stamp/util/rng.hpp"

namespace stamp::models {

struct Simulation {
  std::vector<std::vector<double>> path;  // T x n latent states
  EventData data;
};

// Samples x_1 from the stationary law, runs the linear recursion, and draws
// observations per the observation model (uniformly thinned Gaussian reads,
// Poisson counts, or point events by thinning the piecewise-linear
// intensity). Deterministic per seed; draws use sub-streams keyed by
// (purpose, t) so consumers never perturb one another.
Simulation simulate(const ModelSpec& spec, int T, std::uint64_t seed);

}  // namespace stamp::models
