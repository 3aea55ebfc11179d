#include "framer/fft.hpp"

#include <cmath>
#include <stdexcept>

namespace framer {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft_radix2(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * kPi / static_cast<double>(len);
    const cdouble wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (std::size_t j = 0; j < len / 2; ++j) {
        const cdouble u = a[i + j];
        const cdouble v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Chirp-z transform: expresses an arbitrary-length DFT as a convolution,
// evaluated with a power-of-two FFT.
void fft_bluestein(std::vector<cdouble>& a, bool inverse) {
  const std::size_t n = a.size();
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<cdouble> chirp(n);
  for (std::size_t i = 0; i < n; ++i) {
    // i^2 mod 2n keeps the phase argument small.
    const std::size_t sq = static_cast<std::size_t>(
        (static_cast<unsigned long long>(i) * i) % (2 * n));
    const double ang = sign * kPi * static_cast<double>(sq) / static_cast<double>(n);
    chirp[i] = cdouble(std::cos(ang), std::sin(ang));
  }
  const std::size_t m = next_pow2(2 * n - 1);
  std::vector<cdouble> fa(m, cdouble(0, 0)), fb(m, cdouble(0, 0));
  for (std::size_t i = 0; i < n; ++i) fa[i] = a[i] * chirp[i];
  fb[0] = std::conj(chirp[0]);
  for (std::size_t i = 1; i < n; ++i) {
    fb[i] = fb[m - i] = std::conj(chirp[i]);
  }
  fft_radix2(fa, false);
  fft_radix2(fb, false);
  for (std::size_t i = 0; i < m; ++i) fa[i] *= fb[i];
  fft_radix2(fa, true);
  const double scale = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < n; ++i) a[i] = fa[i] * scale * chirp[i];
}

void fft_cols(std::vector<cdouble>& grid, std::size_t h, std::size_t w,
              bool inverse) {
  std::vector<cdouble> col(h);
  for (std::size_t x = 0; x < w; ++x) {
    for (std::size_t y = 0; y < h; ++y) col[y] = grid[y * w + x];
    fft1d(col, inverse);
    for (std::size_t y = 0; y < h; ++y) grid[y * w + x] = col[y];
  }
}

}  // namespace

void fft1d(std::vector<cdouble>& data, bool inverse) {
  if (data.empty()) throw std::invalid_argument("fft1d: empty input");
  if (data.size() == 1) return;
  if (is_pow2(data.size())) {
    fft_radix2(data, inverse);
  } else {
    fft_bluestein(data, inverse);
  }
}

std::vector<cdouble> fft2(const std::vector<cdouble>& x, std::size_t h,
                          std::size_t w) {
  if (h == 0 || w == 0 || x.size() != h * w) {
    throw std::invalid_argument("fft2: bad grid dimensions");
  }
  std::vector<cdouble> grid = x;
  std::vector<cdouble> row(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t i = 0; i < w; ++i) row[i] = grid[y * w + i];
    fft1d(row, false);
    for (std::size_t i = 0; i < w; ++i) grid[y * w + i] = row[i];
  }
  fft_cols(grid, h, w, false);
  return grid;
}

std::vector<cdouble> fft2(const std::vector<double>& x, std::size_t h,
                          std::size_t w) {
  std::vector<cdouble> grid(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) grid[i] = cdouble(x[i], 0.0);
  return fft2(grid, h, w);
}

std::vector<cdouble> ifft2(const std::vector<cdouble>& f, std::size_t h,
                           std::size_t w) {
  if (h == 0 || w == 0 || f.size() != h * w) {
    throw std::invalid_argument("ifft2: bad grid dimensions");
  }
  std::vector<cdouble> grid = f;
  std::vector<cdouble> row(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t i = 0; i < w; ++i) row[i] = grid[y * w + i];
    fft1d(row, true);
    for (std::size_t i = 0; i < w; ++i) grid[y * w + i] = row[i];
  }
  fft_cols(grid, h, w, true);
  const double scale = 1.0 / (static_cast<double>(h) * static_cast<double>(w));
  for (auto& v : grid) v *= scale;
  return grid;
}

}  // namespace framer
