#pragma once

#include "stamp/models/model_spec.hpp"
#include "stamp/util/dense.hpp"

namespace stamp::models {

// 1D diffusion testbed: symmetric banded transition with row sums 1 - eps_a
// (boundary rows rescaled), and a noise precision built from the first-order
// intrinsic field,
//   R(s) = I + 10^s R_1,
//   Q(v_x, s) = v_x^{-1} sqrt(diag(R^{-1})) R sqrt(diag(R^{-1})),
// so every implied noise marginal variance equals v_x.
ModelSpec build_1d_model(int n, int n_neighb, double eps_a, double v_x, double s);

// 2D rotation testbed on a circular mesh: incoming edges whose edge vector
// forms a strictly negative cross product with the radius at the receiving
// node are removed; surviving off-diagonals share (1 - eps_w - w) uniformly
// and the diagonal is w, so every complete row sums to 1 - eps_w. The noise
// covariance is sigma2 * I. Returns the spec and the count of rows left with
// only their self-loop.
ModelSpec build_2d_rotation(const Mesh& mesh, double w, double eps_w, double sigma2,
                            int* empty_rows = nullptr);

// Stationary moments of x_{t+1} = A x_t + eps, eps ~ N(0, Q^{-1}):
// m solves m = A m (zero under stability), V solves V = A V A' + Q^{-1} by
// fixed-point iteration to 1e-12 in the max norm. Throws NotStable.
void stationary_moments(const sparse::SparseGen& a, const sparse::SparseSym& q,
                        std::vector<double>& m, DenseMat& v);

// Vertex-based discretisation of the intensity integral: eta_j = dt * basis
// volume of vertex j; event rows are barycentric coordinates.
std::vector<double> lgcp_discretise(const Mesh& mesh, double dt);

// Barycentric event row accumulated onto the per-vertex linear data term.
void accumulate_event(const Mesh& mesh, double ex, double ey, std::span<double> h_row);

}  // namespace stamp::models
