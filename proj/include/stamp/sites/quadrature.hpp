#pragma once

#include <vector>

namespace stamp::sites {

// Gauss-Hermite rule for integrals against exp(-t^2); nodes and weights are
// found by Newton iteration on the orthonormal Hermite recurrence and cached
// per node count.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;

  static const GaussHermite& get(int n);
};

}  // namespace stamp::sites
