#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "framer/tensor.hpp"

namespace framer {

// Planar CHW image with values nominally in [0,1].
struct Image {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  Image() = default;
  Image(std::size_t c, std::size_t h, std::size_t w)
      : channels(c), height(h), width(w), data(c * h * w, 0.0) {}

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data[(c * height + y) * width + x];
  }
  std::size_t plane() const { return height * width; }
};

enum class ResizeKernel { Bilinear, Bicubic, Area };

// Half-pixel-center resampling with edge clamping. Bicubic uses the Keys
// kernel (a = -0.5); area averages the covered source box.
Image resize(const Image& img, std::size_t oh, std::size_t ow, ResizeKernel k);

Image clamp01(Image img);

Image crop(const Image& img, std::size_t y0, std::size_t x0, std::size_t h,
           std::size_t w);

// Binary PPM (P6, 3-channel) and PGM (P5, 1-channel), 8-bit.
void write_ppm(const Image& img, const std::string& path);
Image read_ppm(const std::string& path);

// Image <-> tensor plumbing. Tensors are [C,H,W]; stack makes [B,C,H,W].
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t);
Tensor stack_images(const std::vector<Image>& imgs);

double mse_between(const Image& a, const Image& b);
double max_abs_diff(const Image& a, const Image& b);

}  // namespace framer
