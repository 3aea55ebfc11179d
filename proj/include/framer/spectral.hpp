#pragma once

#include <string>
#include <vector>

#include "framer/fft.hpp"
#include "framer/tensor.hpp"

namespace framer {

enum class Band { Low, High };

// Complementary binary masks over the DC-centered spectrum of an H x W
// grid. A bin belongs to the low band iff its distance from the centered
// DC bin, normalized by the half-diagonal of the centered grid, is <= the
// radius fraction. The two masks partition every bin exactly.
struct BandMasks {
  std::size_t height = 0;
  std::size_t width = 0;
  double radius_fraction = 0.0;
  std::vector<std::uint8_t> m_lf;  // 1 where low band
  std::vector<std::uint8_t> m_hf;  // 1 where high band

  std::size_t count(Band b) const;
  // Mask value for the *unshifted* spectrum bin (u, v).
  bool low_at(std::size_t u, std::size_t v) const;
};

BandMasks make_band_masks(std::size_t h, std::size_t w, double radius_fraction);

// Masked spectra of one 2D slice plus the magnitude grid.
struct BandPair {
  std::vector<cdouble> lf_spectrum;  // unshifted layout
  std::vector<cdouble> hf_spectrum;
  std::vector<double> magnitude;  // |F|, unshifted layout

  std::vector<double> lf_spatial(std::size_t h, std::size_t w) const;
  std::vector<double> hf_spatial(std::size_t h, std::size_t w) const;
};

// FFT + band masking of one real H x W slice.
BandPair decompose(const std::vector<double>& slice, const BandMasks& masks);

// Per-frequency average masked magnitude, Sum(|F| .* M) / (Sum M + eps),
// pooled over all leading channels of a [..., H, W] array (the mask count
// scales with the channel count so the value stays a mean).
struct BandEnergy {
  double lf = 0.0;
  double hf = 0.0;
};
BandEnergy band_energy(std::span<const double> feature, std::size_t channels,
                       const BandMasks& masks);

constexpr double kBandEnergyEps = 1e-9;

// Shared-bin histogram of log(1 + |F|) per band over a set of arrays.
// Densities are normalized bin masses: each band's bins sum to 1.
struct BandHistogram {
  std::vector<double> bin_left;
  std::vector<double> bin_right;
  std::vector<double> lf_mean, lf_std;
  std::vector<double> hf_mean, hf_std;
  double lf_value_mean = 0.0;  // mean of log(1+|F|) over all LF bins/samples
  double hf_value_mean = 0.0;
};

// Each input is a flat [channels, H, W] array. Bin edges are shared across
// all inputs and both bands; clip_percentile < 100 clips the top tail when
// choosing edges (display aid only).
BandHistogram band_histogram(const std::vector<std::vector<double>>& features,
                             std::size_t channels, const BandMasks& masks,
                             std::size_t bins, double clip_percentile = 100.0);

void write_band_histogram_csv(const BandHistogram& h, const std::string& path);

// Differentiable band-pass of a [..., H, W] tensor: per-channel FFT, binary
// mask, inverse FFT, real part. The operator is an orthogonal projection,
// hence self-adjoint; backward applies the same filter to the gradient.
Tensor band_filter(const Tensor& x, const BandMasks& masks, Band band);

}  // namespace framer
