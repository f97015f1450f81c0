#include "stamp/gauss/two_slice.hpp"

#include <algorithm>

namespace stamp::gauss {

namespace {

void check_expectations(const TransitionExpectations& ex) {
  int n = ex.eq.n;
  if (ex.eatqa.n != n || ex.eqa.rows != n || ex.eqa.cols != n)
    throw DimensionMismatch("transition expectation blocks");
}

}  // namespace

TwoSliceAssembler::TwoSliceAssembler(TransitionExpectations ex,
                                     const sparse::SparseSym& msg_pattern,
                                     OrderingChoice ordering)
    : ex_(std::move(ex)), msg_pattern_(sparse::pattern_with_diagonal(msg_pattern)) {
  check_expectations(ex_);
  n_ = ex_.eq.n;
  if (msg_pattern_.n != n_) throw DimensionMismatch("message pattern size");
  int n = n_;

  std::vector<int> is, js;
  auto add_lower = [&](const sparse::SparseSym& s, int off) {
    for (int j = 0; j < s.n; ++j)
      for (int i : s.col_rows(j)) {
        is.push_back(i + off);
        js.push_back(j + off);
      }
  };
  add_lower(ex_.eatqa, 0);
  add_lower(msg_pattern_, 0);
  add_lower(ex_.eq, n);
  add_lower(msg_pattern_, n);
  for (int j = 0; j < n; ++j) {
    is.push_back(j);
    js.push_back(j);
    is.push_back(j + n);
    js.push_back(j + n);
  }
  for (int i = 0; i < n; ++i)
    for (int j : ex_.eqa.row_cols(i)) {
      is.push_back(i + n);
      js.push_back(j);
    }
  pattern_ = sparse::sym_from_triplets(2 * n, is, js, {}, false);

  auto map_sym = [&](const sparse::SparseSym& s, int off, std::vector<int>& map) {
    map.reserve(s.nnz());
    for (int j = 0; j < s.n; ++j)
      for (int i : s.col_rows(j)) map.push_back(pattern_.find(i + off, j + off));
  };
  map_sym(ex_.eatqa, 0, map_eatqa_);
  map_sym(msg_pattern_, 0, map_msg_tl_);
  map_sym(msg_pattern_, n, map_msg_br_);
  map_sym(ex_.eq, n, map_eq_);
  map_cross_.reserve(ex_.eqa.nnz());
  for (int i = 0; i < n; ++i)
    for (int j : ex_.eqa.row_cols(i)) map_cross_.push_back(pattern_.find(i + n, j));
  diag_tl_.resize(n);
  diag_br_.resize(n);
  for (int j = 0; j < n; ++j) {
    diag_tl_[j] = pattern_.find(j, j);
    diag_br_[j] = pattern_.find(j + n, j + n);
  }

  sparse::Permutation perm;
  switch (ordering) {
    case OrderingChoice::Amd: perm = sparse::amd_order(pattern_); break;
    case OrderingChoice::Rcm: perm = sparse::rcm_order(pattern_); break;
    case OrderingChoice::Identity: perm = sparse::Permutation::identity(2 * n); break;
  }
  sym_ = std::make_shared<sparse::SymbolicFactor>(sparse::symbolic_cholesky(pattern_, perm));
  chol_ = sparse::CholeskyFactor(sym_);

  values_.assign(pattern_.nnz(), 0.0);
  h_.assign(2 * n, 0.0);
}

void TwoSliceAssembler::update_expectations(TransitionExpectations ex) {
  check_expectations(ex);
  if (!sparse::same_pattern(ex.eatqa, ex_.eatqa) || !sparse::same_pattern(ex.eq, ex_.eq) ||
      ex.eqa.row_ptr != ex_.eqa.row_ptr || ex.eqa.col_idx != ex_.eqa.col_idx)
    throw ValidationError("expectation update changed the sparsity pattern");
  ex_ = std::move(ex);
}

void TwoSliceAssembler::assemble(const Sides& s) {
  int n = n_;
  if (!s.alpha || !s.beta) throw ValidationError("assemble needs alpha and beta");
  if (!sparse::same_pattern(s.alpha->Q, msg_pattern_) ||
      !sparse::same_pattern(s.beta->Q, msg_pattern_))
    throw ValidationError("message pattern mismatch in assembly");

  std::fill(values_.begin(), values_.end(), 0.0);
  for (size_t p = 0; p < map_eatqa_.size(); ++p) values_[map_eatqa_[p]] += ex_.eatqa.values[p];
  for (size_t p = 0; p < map_msg_tl_.size(); ++p)
    values_[map_msg_tl_[p]] += s.alpha->Q.values[p];
  for (size_t p = 0; p < map_msg_br_.size(); ++p)
    values_[map_msg_br_[p]] += s.beta->Q.values[p];
  for (size_t p = 0; p < map_eq_.size(); ++p) values_[map_eq_[p]] += ex_.eq.values[p];
  for (size_t p = 0; p < map_cross_.size(); ++p) values_[map_cross_[p]] = -ex_.eqa.values[p];
  if (!s.lam0_q_first.empty())
    for (int j = 0; j < n; ++j) values_[diag_tl_[j]] += s.lam0_q_first[j];
  if (!s.lam0_q_second.empty())
    for (int j = 0; j < n; ++j) values_[diag_br_[j]] += s.lam0_q_second[j];

  for (int j = 0; j < n; ++j) {
    double v = s.alpha->h[j];
    if (!s.lam0_h_first.empty()) v += s.lam0_h_first[j];
    if (!s.h_data_first.empty()) v += s.h_data_first[j];
    if (!s.h_control_first.empty()) v += s.h_control_first[j];
    h_[j] = v;
    double w = s.beta->h[j];
    if (!s.lam0_h_second.empty()) w += s.lam0_h_second[j];
    if (!s.h_data_second.empty()) w += s.h_data_second[j];
    h_[n + j] = w;
  }
  factored_ = mean_ok_ = z_ok_ = false;
}

void TwoSliceAssembler::factor(double pivot_rel_tol) {
  chol_.refactor_values(values_, ws_, pivot_rel_tol);
  factored_ = true;
}

const std::vector<double>& TwoSliceAssembler::mean() {
  if (!factored_) factor();
  if (!mean_ok_) {
    mean_ = chol_.solve(h_);
    mean_ok_ = true;
  }
  return mean_;
}

const std::vector<double>& TwoSliceAssembler::selected_cov_values() {
  if (!factored_) factor();
  if (!z_ok_) {
    chol_.selected_inverse_values(ws_, zvals_);
    z_ok_ = true;
  }
  return zvals_;
}

TwoSliceMarginal assemble_two_slice(const TransitionExpectations& ex,
                                    const sparse::SparseSym& msg_pattern,
                                    const CanonicalGaussian& alpha,
                                    const CanonicalGaussian& beta,
                                    std::span<const double> lam0_h_second,
                                    std::span<const double> lam0_q_second,
                                    std::span<const double> h_data_second,
                                    std::span<const double> h_control_first) {
  auto asmb = std::make_shared<TwoSliceAssembler>(ex, msg_pattern);
  TwoSliceAssembler::Sides sides;
  sides.alpha = &alpha;
  sides.beta = &beta;
  sides.lam0_h_second = lam0_h_second;
  sides.lam0_q_second = lam0_q_second;
  sides.h_data_second = h_data_second;
  sides.h_control_first = h_control_first;
  asmb->assemble(sides);
  TwoSliceMarginal ts;
  ts.joint.h.assign(asmb->h().begin(), asmb->h().end());
  ts.joint.Q = asmb->pattern();
  ts.joint.Q.values.assign(asmb->values().begin(), asmb->values().end());
  ts.assembler = std::move(asmb);
  return ts;
}

MomentGaussian selected_moments(const TwoSliceMarginal& ts) {
  auto& a = *ts.assembler;
  MomentGaussian mom;
  mom.mean = a.mean();
  const auto& z = a.selected_cov_values();
  const auto& sym = a.symbolic();
  std::vector<int> is, js;
  std::vector<double> vs;
  is.reserve(z.size());
  js.reserve(z.size());
  vs.reserve(z.size());
  for (int c = 0; c < sym.n; ++c)
    for (int p = sym.l_col_ptr[c]; p < sym.l_col_ptr[c + 1]; ++p) {
      is.push_back(sym.perm.forward[sym.l_rows[p]]);
      js.push_back(sym.perm.forward[c]);
      vs.push_back(z[p]);
    }
  mom.V = sparse::sym_from_triplets(sym.n, is, js, vs);
  return mom;
}

}  // namespace stamp::gauss
