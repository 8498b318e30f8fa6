#pragma once

// Counter-keyed pseudo-random streams.
//
// Every stochastic routine in the library takes an explicit Rng. Parallel
// sections derive one independent substream per work unit (observation,
// replication, chain) from a (seed, tag, a, b, c) key, so results do not
// depend on the number of threads.

#include <cmath>
#include <cstdint>

#include "mirt/normal.hpp"

namespace mirt {

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// xoshiro256++ with splitmix64 seeding.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0x853c49e6748fea9bULL) { reseed(seed); }

  void reseed(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = detail::splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on (0, 1); never returns an exact endpoint.
  double uniform() {
    const std::uint64_t bits = next_u64() >> 11;  // 53 random bits
    double u = (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_inv_cdf(uniform()); }

  double exponential() { return -std::log(uniform()); }

  // Marsaglia-Tsang; boosts shape < 1 through the power trick.
  double gamma(double shape, double rate = 1.0) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  double inverse_gamma(double shape, double rate) { return rate / gamma(shape, 1.0) * 1.0; }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Substream derivation: mixes the key into a fresh engine. Streams with
  // distinct keys are treated as independent.
  Rng substream(std::uint64_t tag, std::uint64_t a = 0, std::uint64_t b = 0,
                std::uint64_t c = 0) const {
    std::uint64_t sm = state_[0] ^ rotl(state_[1], 13);
    sm ^= 0x2545f4914f6cdd1dULL * (tag + 1);
    sm = detail::splitmix64(sm) ^ (0x9e3779b97f4a7c15ULL * (a + 1));
    sm = detail::splitmix64(sm) ^ (0xc2b2ae3d27d4eb4fULL * (b + 1));
    sm = detail::splitmix64(sm) ^ (0x165667b19e3779f9ULL * (c + 1));
    Rng out(0);
    std::uint64_t seed = detail::splitmix64(sm);
    out.reseed(seed);
    return out;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

}  // namespace mirt
