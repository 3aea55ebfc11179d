#pragma once

#include <cstdint>

namespace framer {

// Counter-style PRNG (splitmix64). The whole state is a single 64-bit word,
// so stream positions can be snapshotted and replayed cheaply, and results
// do not depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform in [0, n). Lemire multiply-shift; bias is O(2^-64).
  std::uint64_t below(std::uint64_t n);

  // Inclusive integer range.
  long uniform_int(long lo, long hi);

  // Standard normal via Box-Muller; consumes exactly two raw draws per call.
  double normal();

  // Poisson draw: Knuth multiplication for small lambda, Gaussian
  // approximation for large counts.
  long poisson(double lambda);

  std::uint64_t state() const { return state_; }
  void set_state(std::uint64_t s) { state_ = s; }

 private:
  std::uint64_t state_;
};

// Derives independent stream seeds from a base seed and up to three indices.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                          std::uint64_t b = 0, std::uint64_t c = 0);

}  // namespace framer
