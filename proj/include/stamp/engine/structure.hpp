#pragma once

#include <string>

#include "stamp/sparse/chordal.hpp"

namespace stamp::engine {

// Precision-structure family of the temporal messages. `Band` is the banded
// special case used by the 1D studies (band 0 == diag); `Chordal` completes
// the transition structure under a fill-reducing ordering.
struct MessageFamily {
  enum class Kind { Diag, Tsp, Chordal, Full, Band } kind = Kind::Diag;
  enum class Order { Amd, Rcm, None } order = Order::Amd;  // chordal only
  int bandwidth = 0;                                       // band only

  static MessageFamily diag() { return {}; }
  static MessageFamily tsp() { return {Kind::Tsp, Order::Amd, 0}; }
  static MessageFamily full() { return {Kind::Full, Order::Amd, 0}; }
  static MessageFamily chordal(Order o) { return {Kind::Chordal, o, 0}; }
  static MessageFamily band(int k) { return {Kind::Band, Order::Amd, k}; }

  // "diag" | "tsp" | "chordal:amd" | "chordal:rcm" | "chordal:none" |
  // "full" | "band:<k>"
  static MessageFamily parse(const std::string& name);
  std::string name() const;
};

// Builds the message graph G(f) as a strictly-lower edge structure over the
// n state coordinates. `weights` (|a_ij| accumulated symmetrically) is
// required for the maximum-weight spanning tree family.
sparse::SparseSym build_message_structure(const sparse::SparseSym& s_a,
                                          const MessageFamily& family,
                                          const sparse::SparseSym* weights = nullptr);

// Maximum-weight spanning forest of a weighted edge structure (Kruskal with
// deterministic tie-breaking by edge index).
sparse::SparseSym max_weight_spanning_tree(const sparse::SparseSym& weighted_edges);

}  // namespace stamp::engine
