#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace framer {

using cdouble = std::complex<double>;

// In-place 1D DFT, unnormalized forward. Radix-2 for power-of-two lengths,
// Bluestein otherwise, so any H,W >= 1 works.
void fft1d(std::vector<cdouble>& data, bool inverse);

// Unnormalized forward 2D DFT of a row-major H x W grid.
std::vector<cdouble> fft2(const std::vector<double>& x, std::size_t h,
                          std::size_t w);
std::vector<cdouble> fft2(const std::vector<cdouble>& x, std::size_t h,
                          std::size_t w);

// Inverse with the 1/(H*W) factor; ifft2(fft2(x)) == x.
std::vector<cdouble> ifft2(const std::vector<cdouble>& f, std::size_t h,
                           std::size_t w);

}  // namespace framer
