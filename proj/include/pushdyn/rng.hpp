#pragma once

#include <cmath>
#include <cstdint>

namespace pushdyn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// PCG32 with explicit state. All randomness in the project flows through
// instances of this generator so that runs are reproducible bit-for-bit on
// a given platform regardless of the standard library in use.
class Pcg32 {
 public:
  explicit Pcg32(std::uint64_t seed, std::uint64_t stream = 0x14057b7ef767814fULL) {
    state_ = 0u;
    inc_ = (stream << 1u) | 1u;
    next_u32();
    state_ += splitmix64(seed);
    next_u32();
  }

  std::uint32_t next_u32() {
    std::uint64_t old = state_;
    state_ = old * 6364136223846793005ULL + inc_;
    std::uint32_t xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
    std::uint32_t rot = static_cast<std::uint32_t>(old >> 59u);
    return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    std::uint64_t hi = next_u32();
    std::uint64_t lo = next_u32();
    return static_cast<double>(((hi << 32) | lo) >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Uniform integer in [0, n), n > 0. Bounded rejection to avoid modulo bias.
  int uniform_int(int n) {
    std::uint32_t bound = static_cast<std::uint32_t>(n);
    std::uint32_t threshold = (-bound) % bound;
    for (;;) {
      std::uint32_t r = next_u32();
      if (r >= threshold) return static_cast<int>(r % bound);
    }
  }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Derives an independent generator; used to hand sub-streams to workers
  // and stages without sharing mutable state.
  Pcg32 fork(std::uint64_t key) const {
    std::uint64_t s = splitmix64(state_ ^ splitmix64(key));
    return Pcg32(s, splitmix64(s ^ inc_) | 1u);
  }

 private:
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Stable seed derivation for named stages: seed -> stage -> substream.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(a)) ^ splitmix64(b + 0x51ed270b9f9f2b4dULL));
}

}  // namespace pushdyn
