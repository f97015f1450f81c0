#include "stamp/engine/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace stamp::engine {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'M', 'P', 'C', 'K', '0', '1'};
enum RecordKind : std::uint8_t { kAlpha = 0, kBeta = 1, kSite = 2 };

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); }
void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<char*>(&v), 8); }

std::uint32_t get_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

double get_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

}  // namespace

void write_checkpoint(const std::string& path, const Engine::Messages& msgs,
                      const sparse::SparseSym& msg_pattern) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open checkpoint for write: " + path);
  out.write(kMagic, 8);
  int T = int(msgs.alpha.size());
  int n = msg_pattern.n;
  int nnz = msg_pattern.nnz();
  put_u32(out, std::uint32_t(T));
  put_u32(out, std::uint32_t(n));
  put_u32(out, std::uint32_t(nnz));
  for (int j = 0; j <= n; ++j) put_u32(out, std::uint32_t(msg_pattern.col_ptr[j]));
  for (int p = 0; p < nnz; ++p) put_u32(out, std::uint32_t(msg_pattern.row_idx[p]));

  auto put_record_header = [&](std::uint32_t t, RecordKind kind, std::uint32_t j) {
    put_u32(out, t);
    out.put(char(kind));
    put_u32(out, j);
  };
  for (int t = 0; t < T; ++t) {
    put_record_header(t, kAlpha, 0);
    for (double v : msgs.alpha[t].h) put_f64(out, v);
    for (double v : msgs.alpha[t].Q.values) put_f64(out, v);
    put_record_header(t, kBeta, 0);
    for (double v : msgs.beta[t].h) put_f64(out, v);
    for (double v : msgs.beta[t].Q.values) put_f64(out, v);
    for (int j = 0; j < n; ++j) {
      put_record_header(t, kSite, j);
      const auto& s = msgs.sites[t][j];
      put_f64(out, s.lam0.h);
      put_f64(out, s.lam0.q);
      put_f64(out, s.laml.h);
      put_f64(out, s.laml.q);
      put_f64(out, s.last_update_magnitude);
    }
  }
  if (!out) throw IoError("checkpoint write failed: " + path);
}

Engine::Messages read_checkpoint(const std::string& path, sparse::SparseSym* pattern_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("bad checkpoint magic in " + path);
  int T = int(get_u32(in));
  int n = int(get_u32(in));
  int nnz = int(get_u32(in));
  sparse::SparseSym pattern(n);
  pattern.col_ptr.resize(n + 1);
  for (int j = 0; j <= n; ++j) pattern.col_ptr[j] = int(get_u32(in));
  pattern.row_idx.resize(nnz);
  for (int p = 0; p < nnz; ++p) pattern.row_idx[p] = int(get_u32(in));

  Engine::Messages msgs;
  msgs.alpha.assign(T, gauss::zero_message(pattern));
  msgs.beta.assign(T, gauss::zero_message(pattern));
  msgs.sites.assign(T, std::vector<sites::SiteMessagePair>(n));
  auto read_record_header = [&](std::uint32_t expect_t, RecordKind expect_kind,
                                std::uint32_t expect_j) {
    std::uint32_t t = get_u32(in);
    int kind = in.get();
    std::uint32_t j = get_u32(in);
    if (!in || t != expect_t || kind != expect_kind || j != expect_j)
      throw IoError("checkpoint record index mismatch in " + path);
  };
  for (int t = 0; t < T; ++t) {
    read_record_header(t, kAlpha, 0);
    for (double& v : msgs.alpha[t].h) v = get_f64(in);
    for (double& v : msgs.alpha[t].Q.values) v = get_f64(in);
    read_record_header(t, kBeta, 0);
    for (double& v : msgs.beta[t].h) v = get_f64(in);
    for (double& v : msgs.beta[t].Q.values) v = get_f64(in);
    for (int j = 0; j < n; ++j) {
      read_record_header(t, kSite, j);
      auto& s = msgs.sites[t][j];
      s.lam0.h = get_f64(in);
      s.lam0.q = get_f64(in);
      s.laml.h = get_f64(in);
      s.laml.q = get_f64(in);
      s.last_update_magnitude = get_f64(in);
    }
  }
  if (!in) throw IoError("truncated checkpoint: " + path);
  if (pattern_out) *pattern_out = pattern;
  return msgs;
}

}  // namespace stamp::engine
