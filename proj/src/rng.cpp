#include "framer/rng.hpp"

#include <cmath>

namespace framer {

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
  return static_cast<std::uint64_t>(m >> 64);
}

long Rng::uniform_int(long lo, long hi) {
  if (hi <= lo) return lo;
  std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<long>(below(span));
}

double Rng::normal() {
  double u1 = uniform();
  double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  constexpr double two_pi = 6.283185307179586476925286766559;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

long Rng::poisson(double lambda) {
  if (!(lambda > 0.0)) return 0;
  if (lambda < 30.0) {
    const double limit = std::exp(-lambda);
    long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > limit);
    return k - 1;
  }
  double approx = lambda + std::sqrt(lambda) * normal();
  long k = std::lround(approx);
  return k < 0 ? 0 : k;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  std::uint64_t s = mix(base + 0x9e3779b97f4a7c15ull);
  s = mix(s ^ (a + 0xd1b54a32d192ed03ull));
  s = mix(s ^ (b + 0x8cb92ba72f3d8dd7ull));
  s = mix(s ^ (c + 0xda942042e4dd58b5ull));
  return s;
}

}  // namespace framer
