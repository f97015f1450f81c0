#include "stamp/sparse/matrix_market.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace stamp::sparse {

namespace {

std::string fmt_val(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Header {
  bool symmetric = false;
  int rows = 0, cols = 0;
  long long nnz = 0;
};

Header read_header(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file: " + path);
  Header h;
  if (line.rfind("%%MatrixMarket", 0) != 0)
    throw IoError("not a MatrixMarket file: " + path);
  if (line.find("coordinate") == std::string::npos || line.find("real") == std::string::npos)
    throw IoError("unsupported MatrixMarket flavour in " + path);
  h.symmetric = line.find("symmetric") != std::string::npos;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] == '%') continue;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    if (!(ss >> h.rows >> h.cols >> h.nnz)) throw IoError("bad size line in " + path);
    return h;
  }
  throw IoError("missing size line in " + path);
}

}  // namespace

void write_matrix_market(const SparseSym& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << s.n << " " << s.n << " " << s.nnz() << "\n";
  for (int j = 0; j < s.n; ++j)
    for (int p = s.col_ptr[j]; p < s.col_ptr[j + 1]; ++p)
      out << (s.row_idx[p] + 1) << " " << (j + 1) << " "
          << fmt_val(s.values.empty() ? 0.0 : s.values[p]) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

SparseSym read_matrix_market_sym(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  Header h = read_header(in, path);
  if (!h.symmetric) throw IoError("expected symmetric matrix in " + path);
  if (h.rows != h.cols) throw IoError("symmetric matrix must be square: " + path);
  std::vector<int> is, js;
  std::vector<double> vs;
  is.reserve(h.nnz);
  js.reserve(h.nnz);
  vs.reserve(h.nnz);
  int i, j;
  double v;
  while (in >> i >> j >> v) {
    is.push_back(i - 1);
    js.push_back(j - 1);
    vs.push_back(v);
  }
  if ((long long)is.size() != h.nnz) throw IoError("entry count mismatch in " + path);
  return sym_from_triplets(h.rows, is, js, vs);
}

void write_matrix_market(const SparseGen& g, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for write: " + path);
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << g.rows << " " << g.cols << " " << g.nnz() << "\n";
  for (int i = 0; i < g.rows; ++i)
    for (int p = g.row_ptr[i]; p < g.row_ptr[i + 1]; ++p)
      out << (i + 1) << " " << (g.col_idx[p] + 1) << " " << fmt_val(g.values[p]) << "\n";
  if (!out) throw IoError("write failed: " + path);
}

SparseGen read_matrix_market_gen(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  Header h = read_header(in, path);
  if (h.symmetric) throw IoError("expected general matrix in " + path);
  std::vector<int> is, js;
  std::vector<double> vs;
  int i, j;
  double v;
  while (in >> i >> j >> v) {
    is.push_back(i - 1);
    js.push_back(j - 1);
    vs.push_back(v);
  }
  if ((long long)is.size() != h.nnz) throw IoError("entry count mismatch in " + path);
  return gen_from_triplets(h.rows, h.cols, is, js, vs);
}

}  // namespace stamp::sparse
