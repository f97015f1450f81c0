#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace stamp {

// Counter-based deterministic generator. Each (seed, purpose, index) triple
// opens an independent stream, so adding a consumer never perturbs the draws
// of another. splitmix64 is used both for stream keying and for advancing.
class Rng {
 public:
  Rng() : state_(0x9e3779b97f4a7c15ull) {}
  explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  static std::uint64_t hash_str(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return h;
  }

  // Sub-stream keyed by purpose label and index (typically a time bin).
  Rng stream(std::string_view purpose, std::uint64_t index) const {
    Rng r;
    r.state_ = mix(state_ ^ mix(hash_str(purpose)) ^ mix(index * 0xbf58476d1ce4e5b9ull + 1));
    return r;
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in (0, 1); safe for log().
  double uniform_pos() {
    double u = uniform();
    return u > 0.0 ? u : 0x1.0p-53;
  }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Knuth product method, split for large means so the loop count stays
  // proportional to lambda.
  long poisson(double lambda) {
    long total = 0;
    while (lambda > 30.0) {
      total += poisson_small(30.0);
      lambda -= 30.0;
    }
    return total + poisson_small(lambda);
  }

  int uniform_int(int n) { return int(next_u64() % std::uint64_t(n)); }

 private:
  long poisson_small(double lambda) {
    if (lambda <= 0.0) return 0;
    double limit = std::exp(-lambda);
    double prod = 1.0;
    long k = -1;
    do {
      ++k;
      prod *= uniform_pos();
    } while (prod > limit);
    return k;
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace stamp
