#pragma once

#include <cmath>
#include <cstdint>
#include <string>

namespace sarw {

/// Deterministic, platform-independent PRNG (xoshiro256**) with explicit
/// stream derivation. Standard-library distributions are not reproducible
/// across implementations, so sampling routines live here as well.
class Rng {
 public:
  explicit Rng(uint64_t seed) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t x = seed;
    for (auto& word : s_) word = splitmix64(x);
    have_gauss_ = false;
  }

  /// Derives an independent stream from (seed, stream tag, index).
  static Rng fork(uint64_t seed, uint64_t stream, uint64_t index) {
    uint64_t x = seed;
    uint64_t a = splitmix64(x);
    x ^= stream * 0x9e3779b97f4a7c15ull;
    uint64_t b = splitmix64(x);
    x ^= index * 0xbf58476d1ce4e5b9ull;
    uint64_t c = splitmix64(x);
    return Rng(a ^ (b + 0x94d049bb133111ebull * c));
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  uint64_t uniform_index(uint64_t n) {
    // Rejection sampling avoids modulo bias.
    const uint64_t threshold = (~n + 1) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  /// Standard normal via Box-Muller (fixed consumption of two uniforms).
  double gaussian() {
    if (have_gauss_) {
      have_gauss_ = false;
      return cached_gauss_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_gauss_ = r * std::sin(theta);
    have_gauss_ = true;
    return r * std::cos(theta);
  }

  /// Gamma(shape, scale) via Marsaglia-Tsang; shape > 0.
  double gamma(double shape, double scale) {
    if (shape < 1.0) {
      // Boost to shape + 1 and correct with a power of a uniform.
      const double u = std::max(uniform(), 1e-300);
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = gaussian();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  /// Truncated normal on [-2, 2] sigma, scaled; used for parameter init.
  double trunc_normal(double stddev) {
    for (;;) {
      const double g = gaussian();
      if (g >= -2.0 && g <= 2.0) return g * stddev;
    }
  }

  /// Raw state access for checkpointing.
  const uint64_t* state() const { return s_; }
  void set_state(const uint64_t st[4]) {
    for (int i = 0; i < 4; ++i) s_[i] = st[i];
    have_gauss_ = false;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t s_[4] = {};
  bool have_gauss_ = false;
  double cached_gauss_ = 0.0;
};

// Stream tags used to derive independent substreams from one run seed.
namespace rng_stream {
constexpr uint64_t kInit = 1;
constexpr uint64_t kShuffle = 2;
constexpr uint64_t kMask = 3;
constexpr uint64_t kScene = 4;
constexpr uint64_t kHead = 5;
}  // namespace rng_stream

}  // namespace sarw
