#include "framer/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace framer {

Image make_pink_field(std::size_t h, std::size_t w, Rng& rng,
                      double octave_gain) {
  Image acc(1, h, w);
  double amp = 1.0;
  double total = 0.0;
  for (std::size_t cell = std::max(h, w); cell >= 1; cell /= 2) {
    const std::size_t gh = (h + cell - 1) / cell + 1;
    const std::size_t gw = (w + cell - 1) / cell + 1;
    Image noise(1, gh, gw);
    for (double& v : noise.data) v = rng.uniform();
    Image up = resize(noise, h, w, ResizeKernel::Bilinear);
    for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += amp * up.data[i];
    total += amp;
    amp *= octave_gain;
    if (cell == 1) break;
  }
  for (double& v : acc.data) v /= total;
  // Stretch to the unit range for a consistent contrast.
  const auto [mn, mx] = std::minmax_element(acc.data.begin(), acc.data.end());
  const double lo = *mn, span = std::max(1e-12, *mx - lo);
  for (double& v : acc.data) v = (v - lo) / span;
  return acc;
}

Image make_synthetic_image(std::size_t h, std::size_t w, Rng& rng) {
  Image base = make_pink_field(h, w, rng);
  Image img(3, h, w);
  // Random color ramp over the field.
  double c0[3], c1[3];
  for (int c = 0; c < 3; ++c) {
    c0[c] = rng.uniform(0.0, 0.45);
    c1[c] = rng.uniform(0.55, 1.0);
  }
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < base.data.size(); ++i) {
      img.data[c * base.data.size() + i] =
          c0[c] + (c1[c] - c0[c]) * base.data[i];
    }
  }

  const std::size_t shapes = 2 + rng.below(4);
  for (std::size_t s = 0; s < shapes; ++s) {
    const bool ellipse = rng.uniform() < 0.5;
    const double cy = rng.uniform(0.1, 0.9) * static_cast<double>(h);
    const double cx = rng.uniform(0.1, 0.9) * static_cast<double>(w);
    const double ry = rng.uniform(0.05, 0.3) * static_cast<double>(h);
    const double rx = rng.uniform(0.05, 0.3) * static_cast<double>(w);
    double col[3];
    for (int c = 0; c < 3; ++c) col[c] = rng.uniform();
    const double alpha = rng.uniform(0.6, 1.0);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = (static_cast<double>(y) - cy) / ry;
        const double dx = (static_cast<double>(x) - cx) / rx;
        const bool inside = ellipse ? dy * dy + dx * dx <= 1.0
                                    : std::abs(dy) <= 1.0 && std::abs(dx) <= 1.0;
        if (!inside) continue;
        for (std::size_t c = 0; c < 3; ++c) {
          double& v = img.at(c, y, x);
          v = (1.0 - alpha) * v + alpha * col[c];
        }
      }
    }
  }
  return clamp01(std::move(img));
}

DataSource::DataSource(std::size_t image_size, std::uint64_t seed)
    : image_size_(image_size), seed_(seed) {}

DataSource::DataSource(const std::string& dir, std::size_t image_size,
                       std::uint64_t seed)
    : image_size_(image_size), seed_(seed) {
  namespace fs = std::filesystem;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") {
      files_.push_back(entry.path().string());
    }
  }
  std::sort(files_.begin(), files_.end());
  if (files_.empty()) {
    throw std::runtime_error("data source: no .ppm/.pgm images in " + dir);
  }
}

Image DataSource::image(std::size_t index) const {
  if (files_.empty()) {
    Rng rng(derive_seed(seed_, 0x5948u, index));
    return make_synthetic_image(image_size_, image_size_, rng);
  }
  Image img = read_ppm(files_[index % files_.size()]);
  if (img.channels == 1) {
    Image rgb(3, img.height, img.width);
    for (std::size_t c = 0; c < 3; ++c) {
      std::copy(img.data.begin(), img.data.end(),
                rgb.data.begin() + c * img.plane());
    }
    img = std::move(rgb);
  }
  if (img.height != image_size_ || img.width != image_size_) {
    img = resize(img, image_size_, image_size_, ResizeKernel::Bicubic);
  }
  return clamp01(std::move(img));
}

std::size_t DataSource::size_hint() const { return files_.size(); }

}  // namespace framer
