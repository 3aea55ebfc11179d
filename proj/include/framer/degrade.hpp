#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "framer/image.hpp"
#include "framer/rng.hpp"

namespace framer {

enum class KernelKind {
  Iso,
  Aniso,
  GeneralizedIso,
  GeneralizedAniso,
  PlateauIso,
  PlateauAniso,
};

struct Kernel2d {
  int size = 0;
  std::vector<double> weights;  // size*size, sums to 1
  double at(int y, int x) const { return weights[y * size + x]; }
};

// Gaussian-family blur kernels on an odd grid, normalized to sum 1.
// Anisotropic kinds use two sigmas plus a rotation; generalized kinds raise
// the quadratic form to the shape exponent beta; plateau kinds use
// 1 / (quad^beta + 1).
Kernel2d make_blur_kernel(KernelKind kind, int size, double sigma_x,
                          double sigma_y, double theta, double beta);

// Circular low-pass (jinc) kernel, windowed to the grid and normalized.
Kernel2d make_sinc_kernel(int size, double cutoff);

// Same-size convolution with replicate padding.
Image convolve(const Image& img, const Kernel2d& k);

// One degradation stage. Fixed order of operations and rng consumption:
//   1. blur roll, then sinc-vs-blur roll, kernel parameter draws, blur
//   2. resize mode roll (up/down/keep), scale draw, kernel choice draw
//   3. noise roll, gaussian-vs-poisson roll, strength draw, per-pixel draws
//      in channel-major pixel order
//   4. jpeg roll, quality draw
// Output is clamped to [0,1].
struct StageConfig {
  int kernel_size = 21;
  double blur_prob = 1.0;
  double blur_sigma_lo = 0.2, blur_sigma_hi = 3.0;
  std::vector<KernelKind> kernel_kinds{
      KernelKind::Iso,            KernelKind::Aniso,
      KernelKind::GeneralizedIso, KernelKind::GeneralizedAniso,
      KernelKind::PlateauIso,     KernelKind::PlateauAniso};
  double sinc_prob = 0.1;
  double betag_lo = 0.5, betag_hi = 4.0;  // generalized shape exponent
  double betap_lo = 1.0, betap_hi = 2.0;  // plateau shape exponent
  double resize_lo = 0.15, resize_hi = 1.5;
  double up_prob = 1.0 / 3.0, down_prob = 1.0 / 3.0;  // keep = remainder
  double noise_prob = 1.0;
  double gauss_prob = 0.5;  // else poisson
  double gauss_sigma_lo = 1.0, gauss_sigma_hi = 30.0;  // on the 0..255 scale
  double poisson_lo = 0.05, poisson_hi = 3.0;
  double jpeg_prob = 1.0;
  int jpeg_lo = 30, jpeg_hi = 95;

  static StageConfig first_stage();
  static StageConfig second_stage();
  // All stochastic branches off, resize pinned to 1.0, jpeg disabled.
  static StageConfig neutral();
};

struct DegradationConfig {
  StageConfig stage1 = StageConfig::first_stage();
  StageConfig stage2 = StageConfig::second_stage();
  double final_sinc_prob = 0.8;
  int final_sinc_kernel_size = 21;
  std::size_t crop = 512;
  std::size_t scale = 4;
  ResizeKernel final_downscale = ResizeKernel::Area;
  ResizeKernel lr_upscale = ResizeKernel::Bicubic;

  void validate() const;
};

Image apply_stage(const Image& img, const StageConfig& stage, Rng& rng);

// Block-DCT compression distortion: 8x8 DCT, standard luminance table
// scaled by quality, quantize, inverse. Applied per channel, no chroma
// subsampling, no entropy coding.
Image jpeg_like(const Image& img, int quality);
std::array<int, 64> jpeg_quant_table(int quality);
Image jpeg_with_table(const Image& img, const std::array<int, 64>& table);

struct PairSample {
  Image hr;          // cropped HR, [3,S,S]
  Image lr;          // degraded, [3,S/scale,S/scale]
  Image lr_resized;  // lr upsampled back to S
  std::uint64_t seed = 0;
};

// Random crop -> stage1 -> stage2 -> final sinc (with prob) -> downscale to
// 1/scale. Fully replayable from (seed, config).
PairSample make_pair(const Image& hr, const DegradationConfig& cfg,
                     std::uint64_t seed);

}  // namespace framer
