#pragma once

#include <memory>
#include <optional>

#include "stamp/gauss/canonical.hpp"
#include "stamp/sparse/cholesky.hpp"

namespace stamp::gauss {

// Expected transition-model blocks entering the two-slice precision:
//   [[ E[A'QA] + Q_alpha + diag(lam0_1)   -E[A]'E[Q]               ]
//    [ -E[Q]E[A]                          E[Q] + Q_beta + diag(lam0_2) ]]
// (site precisions on the first slice only occur for the initial pair,
// where the prior travels inside the alpha message).
struct TransitionExpectations {
  sparse::SparseSym eatqa;  // E[A'QA], lower
  sparse::SparseGen eqa;    // E[Q]E[A]
  sparse::SparseSym eq;     // E[Q], lower
};

enum class OrderingChoice { Amd, Rcm, Identity };

// Reusable assembler/factoriser for the joint over (x_t, x_{t+1}). The
// sparsity pattern and its symbolic factorisation are computed once; every
// call then only refreshes numeric values.
class TwoSliceAssembler {
 public:
  TwoSliceAssembler(TransitionExpectations ex, const sparse::SparseSym& msg_pattern,
                    OrderingChoice ordering = OrderingChoice::Amd);

  int n() const { return n_; }
  const sparse::SparseSym& pattern() const { return pattern_; }
  const sparse::SymbolicFactor& symbolic() const { return *sym_; }
  std::shared_ptr<const sparse::SymbolicFactor> symbolic_ptr() const { return sym_; }

  // New expectations must share the pattern of the originals.
  void update_expectations(TransitionExpectations ex);
  const TransitionExpectations& expectations() const { return ex_; }

  struct Sides {
    const CanonicalGaussian* alpha = nullptr;  // slice-1 message, msg pattern
    const CanonicalGaussian* beta = nullptr;   // slice-2 message, msg pattern
    std::span<const double> lam0_h_first, lam0_q_first;    // may be empty
    std::span<const double> lam0_h_second, lam0_q_second;  // may be empty
    std::span<const double> h_data_first, h_data_second;   // may be empty
    std::span<const double> h_control_first;               // may be empty
  };

  // Fills the canonical parameters of the two-slice joint.
  void assemble(const Sides& s);

  std::span<const double> values() const { return values_; }
  std::span<const double> h() const { return h_; }

  // Numeric factorisation of the assembled precision (NotPositiveDefinite on
  // failure) followed by the mean solve and the selected inverse.
  void factor(double pivot_rel_tol = 1e-12);
  const std::vector<double>& mean();
  const std::vector<double>& selected_cov_values();
  const sparse::CholeskyFactor& factorisation() const { return chol_; }

  double log_det() const { return chol_.log_det(); }

 private:
  int n_ = 0;
  TransitionExpectations ex_;
  sparse::SparseSym msg_pattern_;
  sparse::SparseSym pattern_;  // 2n joint pattern, lower
  std::shared_ptr<const sparse::SymbolicFactor> sym_;
  sparse::CholeskyFactor chol_;
  sparse::CholWorkspace ws_;

  std::vector<int> map_eatqa_, map_msg_tl_, map_msg_br_, map_cross_, map_eq_;
  std::vector<int> diag_tl_, diag_br_;

  std::vector<double> values_, h_;
  std::vector<double> mean_, zvals_;
  bool factored_ = false, mean_ok_ = false, z_ok_ = false;
};

// The spec-level two-slice marginal: canonical parameters with cached factor
// products, produced by a one-shot assembly.
struct TwoSliceMarginal {
  CanonicalGaussian joint;                      // over 2n variables
  std::shared_ptr<TwoSliceAssembler> assembler; // owns factor + selected cov
};

// For the initial pair the prior travels inside `alpha` in canonical form.
TwoSliceMarginal assemble_two_slice(const TransitionExpectations& ex,
                                    const sparse::SparseSym& msg_pattern,
                                    const CanonicalGaussian& alpha,
                                    const CanonicalGaussian& beta,
                                    std::span<const double> lam0_h_second,
                                    std::span<const double> lam0_q_second,
                                    std::span<const double> h_data_second,
                                    std::span<const double> h_control_first = {});

// Mean via triangular solves plus selected covariance entries on the
// symmetrised factor pattern (covers every nonzero of the joint precision).
MomentGaussian selected_moments(const TwoSliceMarginal& ts);

}  // namespace stamp::gauss
