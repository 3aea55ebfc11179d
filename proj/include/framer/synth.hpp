#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "framer/image.hpp"
#include "framer/rng.hpp"

namespace framer {

// 1/f-style fractal field in [0,1]: sum of bilinearly upsampled white-noise
// octaves with halving amplitude.
Image make_pink_field(std::size_t h, std::size_t w, Rng& rng,
                      double octave_gain = 0.5);

// Natural-image-like RGB sample: colorized 1/f base plus a few random
// rectangles and ellipses for edges and high-frequency content.
Image make_synthetic_image(std::size_t h, std::size_t w, Rng& rng);

// Deterministic image source: either a directory of .ppm/.pgm files or the
// synthetic generator. image(i) is reproducible from (seed, i) alone.
class DataSource {
 public:
  // Synthetic source.
  DataSource(std::size_t image_size, std::uint64_t seed);
  // Directory source; files are sorted by name and cropped/resized to size.
  DataSource(const std::string& dir, std::size_t image_size, std::uint64_t seed);

  Image image(std::size_t index) const;
  std::size_t size_hint() const;  // 0 means unbounded (synthetic)

 private:
  std::size_t image_size_;
  std::uint64_t seed_;
  std::vector<std::string> files_;
};

}  // namespace framer
