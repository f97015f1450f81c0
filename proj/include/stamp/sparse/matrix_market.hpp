#pragma once

#include <string>

#include "stamp/sparse/sparse_sym.hpp"

namespace stamp::sparse {

// MatrixMarket coordinate I/O. Symmetric matrices are written as the stored
// lower triangle, general matrices row by row; values use %.17g so a
// write/read cycle is exact and a read/write cycle of our own files is
// byte-identical.
void write_matrix_market(const SparseSym& s, const std::string& path);
SparseSym read_matrix_market_sym(const std::string& path);

void write_matrix_market(const SparseGen& g, const std::string& path);
SparseGen read_matrix_market_gen(const std::string& path);

}  // namespace stamp::sparse
