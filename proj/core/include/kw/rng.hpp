#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace kw {

// Deterministic pseudo-random generator with a fixed algorithm
// (splitmix64-seeded xoshiro256++, Box-Muller for gaussians).
//
// The standard <random> distributions are implementation-defined, which would
// make datasets, initializations, and therefore checkpoints differ between
// toolchains. Everything random in this library flows through this generator
// so that a (seed, config) pair pins results bit for bit.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    // splitmix64 stream expands the seed into the four xoshiro words.
    uint64_t x = seed;
    for (auto& word : s_) {
      word = splitmix64(x);
    }
  }

  uint64_t next_u64() {
    // xoshiro256++
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the spare value is cached.
  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);  // log(0) guard
    const double u2 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, bound) without modulo bias (rejection sampling).
  uint64_t next_below(uint64_t bound) {
    if (bound <= 1) return 0;
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % bound;
  }

  // Derives a child seed for an independent stream, e.g. per layer or group.
  static uint64_t mix(uint64_t seed, std::string_view tag) {
    uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    for (const char ch : tag) {
      h ^= static_cast<uint64_t>(static_cast<unsigned char>(ch));
      h = splitmix64(h);
    }
    return h;
  }

 private:
  static uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t s_[4] = {};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace kw
