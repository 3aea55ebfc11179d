#include "framer/degrade.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace framer {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;

void normalize_kernel(Kernel2d& k) {
  double s = 0.0;
  for (double v : k.weights) s += v;
  if (s == 0.0) throw std::runtime_error("kernel normalization: zero sum");
  for (double& v : k.weights) v /= s;
}

// JPEG Annex K luminance quantization table.
constexpr std::array<int, 64> kLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

struct Dct8 {
  double c[8][8];  // c[u][y] = a(u) cos((2y+1) u pi / 16)
  Dct8() {
    for (int u = 0; u < 8; ++u) {
      const double a = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int y = 0; y < 8; ++y) {
        c[u][y] = a * std::cos((2.0 * y + 1.0) * u * kPi / 16.0);
      }
    }
  }
};

const Dct8& dct_tables() {
  static const Dct8 t;
  return t;
}

void dct2_8x8(const double in[64], double out[64]) {
  const auto& t = dct_tables();
  double tmp[64];
  for (int u = 0; u < 8; ++u)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int y = 0; y < 8; ++y) s += t.c[u][y] * in[y * 8 + x];
      tmp[u * 8 + x] = s;
    }
  for (int u = 0; u < 8; ++u)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int x = 0; x < 8; ++x) s += t.c[v][x] * tmp[u * 8 + x];
      out[u * 8 + v] = s;
    }
}

void idct2_8x8(const double in[64], double out[64]) {
  const auto& t = dct_tables();
  double tmp[64];
  for (int y = 0; y < 8; ++y)
    for (int v = 0; v < 8; ++v) {
      double s = 0.0;
      for (int u = 0; u < 8; ++u) s += t.c[u][y] * in[u * 8 + v];
      tmp[y * 8 + v] = s;
    }
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      double s = 0.0;
      for (int v = 0; v < 8; ++v) s += t.c[v][x] * tmp[y * 8 + v];
      out[y * 8 + x] = s;
    }
}

ResizeKernel pick_resize_kernel(Rng& rng) {
  switch (rng.below(3)) {
    case 0:
      return ResizeKernel::Bilinear;
    case 1:
      return ResizeKernel::Bicubic;
    default:
      return ResizeKernel::Area;
  }
}

}  // namespace

Kernel2d make_blur_kernel(KernelKind kind, int size, double sigma_x,
                          double sigma_y, double theta, double beta) {
  if (size < 1 || size % 2 == 0) {
    throw std::invalid_argument("make_blur_kernel: size must be odd");
  }
  if (sigma_x <= 0.0 || sigma_y <= 0.0) {
    throw std::invalid_argument("make_blur_kernel: sigma must be positive");
  }
  const bool iso_shape = kind == KernelKind::Iso ||
                         kind == KernelKind::GeneralizedIso ||
                         kind == KernelKind::PlateauIso;
  if (iso_shape) {
    sigma_y = sigma_x;
    theta = 0.0;
  }
  // Inverse covariance of R diag(sx^2, sy^2) R^T.
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ix = 1.0 / (sigma_x * sigma_x), iy = 1.0 / (sigma_y * sigma_y);
  const double a = ct * ct * ix + st * st * iy;
  const double b = ct * st * (ix - iy);
  const double d = st * st * ix + ct * ct * iy;

  Kernel2d k;
  k.size = size;
  k.weights.resize(static_cast<std::size_t>(size) * size);
  const int c = size / 2;
  for (int y = -c; y <= c; ++y) {
    for (int x = -c; x <= c; ++x) {
      const double quad = a * x * x + 2.0 * b * x * y + d * y * y;
      double v;
      switch (kind) {
        case KernelKind::Iso:
        case KernelKind::Aniso:
          v = std::exp(-0.5 * quad);
          break;
        case KernelKind::GeneralizedIso:
        case KernelKind::GeneralizedAniso:
          v = std::exp(-0.5 * std::pow(quad, beta));
          break;
        case KernelKind::PlateauIso:
        case KernelKind::PlateauAniso:
          v = 1.0 / (std::pow(quad, beta) + 1.0);
          break;
        default:
          throw std::invalid_argument("make_blur_kernel: invalid kind");
      }
      k.weights[(y + c) * size + (x + c)] = v;
    }
  }
  normalize_kernel(k);
  return k;
}

Kernel2d make_sinc_kernel(int size, double cutoff) {
  if (size < 1 || size % 2 == 0) {
    throw std::invalid_argument("make_sinc_kernel: size must be odd");
  }
  Kernel2d k;
  k.size = size;
  k.weights.resize(static_cast<std::size_t>(size) * size);
  const int c = size / 2;
  for (int y = -c; y <= c; ++y) {
    for (int x = -c; x <= c; ++x) {
      const double r = std::hypot(static_cast<double>(x), static_cast<double>(y));
      double v;
      if (r == 0.0) {
        v = cutoff * cutoff / (4.0 * kPi);
      } else {
        v = cutoff / (2.0 * kPi * r) * std::cyl_bessel_j(1.0, cutoff * r);
      }
      k.weights[(y + c) * size + (x + c)] = v;
    }
  }
  normalize_kernel(k);
  return k;
}

Image convolve(const Image& img, const Kernel2d& k) {
  Image out(img.channels, img.height, img.width);
  const int c = k.size / 2;
  const long H = static_cast<long>(img.height), W = static_cast<long>(img.width);
  for (std::size_t ch = 0; ch < img.channels; ++ch) {
    for (long y = 0; y < H; ++y) {
      for (long x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int ky = -c; ky <= c; ++ky) {
          const long sy = std::clamp(y + ky, 0L, H - 1);
          for (int kx = -c; kx <= c; ++kx) {
            const long sx = std::clamp(x + kx, 0L, W - 1);
            acc += k.at(ky + c, kx + c) *
                   img.at(ch, static_cast<std::size_t>(sy),
                          static_cast<std::size_t>(sx));
          }
        }
        out.at(ch, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
      }
    }
  }
  return out;
}

StageConfig StageConfig::first_stage() { return StageConfig{}; }

StageConfig StageConfig::second_stage() {
  StageConfig s;
  s.kernel_size = 11;
  s.blur_sigma_lo = 0.2;
  s.blur_sigma_hi = 1.5;
  s.resize_lo = 0.3;
  s.resize_hi = 1.2;
  s.gauss_sigma_lo = 1.0;
  s.gauss_sigma_hi = 25.0;
  s.poisson_lo = 0.05;
  s.poisson_hi = 2.5;
  return s;
}

StageConfig StageConfig::neutral() {
  StageConfig s;
  s.blur_prob = 0.0;
  s.sinc_prob = 0.0;
  s.resize_lo = 1.0;
  s.resize_hi = 1.0;
  s.up_prob = 0.0;
  s.down_prob = 0.0;
  s.noise_prob = 0.0;
  s.jpeg_prob = 0.0;
  s.jpeg_lo = 100;
  s.jpeg_hi = 100;
  return s;
}

void DegradationConfig::validate() const {
  auto check_stage = [](const StageConfig& s, const char* which) {
    auto ordered = [&](double lo, double hi, const char* what) {
      if (lo > hi) {
        throw std::invalid_argument(std::string("degradation config: ") + which +
                                    " " + what + " range not ordered");
      }
    };
    ordered(s.blur_sigma_lo, s.blur_sigma_hi, "blur sigma");
    ordered(s.resize_lo, s.resize_hi, "resize");
    ordered(s.gauss_sigma_lo, s.gauss_sigma_hi, "gaussian sigma");
    ordered(s.poisson_lo, s.poisson_hi, "poisson scale");
    ordered(static_cast<double>(s.jpeg_lo), static_cast<double>(s.jpeg_hi), "jpeg quality");
    ordered(s.betag_lo, s.betag_hi, "generalized beta");
    ordered(s.betap_lo, s.betap_hi, "plateau beta");
    for (double p : {s.blur_prob, s.sinc_prob, s.noise_prob, s.gauss_prob,
                     s.jpeg_prob, s.up_prob, s.down_prob}) {
      if (p < 0.0 || p > 1.0) {
        throw std::invalid_argument(std::string("degradation config: ") + which +
                                    " probability outside [0,1]");
      }
    }
    if (s.up_prob + s.down_prob > 1.0 + 1e-12) {
      throw std::invalid_argument("degradation config: resize mode probs exceed 1");
    }
    if (s.kernel_size < 1 || s.kernel_size % 2 == 0) {
      throw std::invalid_argument("degradation config: kernel size must be odd");
    }
    if (s.kernel_kinds.empty()) {
      throw std::invalid_argument("degradation config: no kernel kinds");
    }
  };
  check_stage(stage1, "stage1");
  check_stage(stage2, "stage2");
  if (final_sinc_prob < 0.0 || final_sinc_prob > 1.0) {
    throw std::invalid_argument("degradation config: final sinc prob outside [0,1]");
  }
  if (final_sinc_kernel_size < 1 || final_sinc_kernel_size % 2 == 0) {
    throw std::invalid_argument("degradation config: final sinc kernel must be odd");
  }
  if (scale == 0 || crop == 0 || crop % scale != 0) {
    throw std::invalid_argument("degradation config: crop must be divisible by scale");
  }
}

Image apply_stage(const Image& img, const StageConfig& stage, Rng& rng) {
  Image cur = img;

  // 1. blur
  if (rng.uniform() < stage.blur_prob) {
    Kernel2d kernel;
    if (rng.uniform() < stage.sinc_prob) {
      const double cutoff = rng.uniform(kPi / 3.0, kPi);
      kernel = make_sinc_kernel(stage.kernel_size, cutoff);
    } else {
      const KernelKind kind =
          stage.kernel_kinds[rng.below(stage.kernel_kinds.size())];
      const double sx = rng.uniform(stage.blur_sigma_lo, stage.blur_sigma_hi);
      double sy = sx, theta = 0.0, beta = 1.0;
      if (kind == KernelKind::Aniso || kind == KernelKind::GeneralizedAniso ||
          kind == KernelKind::PlateauAniso) {
        sy = rng.uniform(stage.blur_sigma_lo, stage.blur_sigma_hi);
        theta = rng.uniform(-kPi, kPi);
      }
      if (kind == KernelKind::GeneralizedIso ||
          kind == KernelKind::GeneralizedAniso) {
        beta = rng.uniform(stage.betag_lo, stage.betag_hi);
      } else if (kind == KernelKind::PlateauIso ||
                 kind == KernelKind::PlateauAniso) {
        beta = rng.uniform(stage.betap_lo, stage.betap_hi);
      }
      kernel = make_blur_kernel(kind, stage.kernel_size, sx, sy, theta, beta);
    }
    cur = convolve(cur, kernel);
  }

  // 2. resize
  {
    const double mode = rng.uniform();
    double scale = 1.0;
    if (mode < stage.up_prob) {
      scale = rng.uniform(std::max(1.0, stage.resize_lo), std::max(1.0, stage.resize_hi));
    } else if (mode < stage.up_prob + stage.down_prob) {
      scale = rng.uniform(std::min(1.0, stage.resize_lo), std::min(1.0, stage.resize_hi));
    }
    if (scale != 1.0) {
      const ResizeKernel kern = pick_resize_kernel(rng);
      const auto oh = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(cur.height * scale)));
      const auto ow = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::lround(cur.width * scale)));
      cur = resize(cur, oh, ow, kern);
    }
  }

  // 3. noise
  if (rng.uniform() < stage.noise_prob) {
    if (rng.uniform() < stage.gauss_prob) {
      const double sigma =
          rng.uniform(stage.gauss_sigma_lo, stage.gauss_sigma_hi) / 255.0;
      for (double& v : cur.data) v += sigma * rng.normal();
    } else {
      const double scale = rng.uniform(stage.poisson_lo, stage.poisson_hi);
      for (double& v : cur.data) {
        const double lam = std::max(0.0, v) * 255.0;
        const double shot = static_cast<double>(rng.poisson(lam)) / 255.0;
        v += (shot - v) * scale;
      }
    }
  }
  cur = clamp01(std::move(cur));

  // 4. jpeg
  if (rng.uniform() < stage.jpeg_prob) {
    const int q = static_cast<int>(rng.uniform_int(stage.jpeg_lo, stage.jpeg_hi));
    cur = jpeg_like(cur, q);
  }
  return clamp01(std::move(cur));
}

std::array<int, 64> jpeg_quant_table(int quality) {
  quality = std::clamp(quality, 1, 100);
  const int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  std::array<int, 64> t{};
  for (int i = 0; i < 64; ++i) {
    t[i] = std::clamp((kLumaTable[i] * scale + 50) / 100, 1, 255);
  }
  return t;
}

Image jpeg_with_table(const Image& img, const std::array<int, 64>& table) {
  const std::size_t ph = (img.height + 7) / 8 * 8;
  const std::size_t pw = (img.width + 7) / 8 * 8;
  Image out(img.channels, img.height, img.width);
  double block[64], coef[64], rec[64];
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t by = 0; by < ph; by += 8) {
      for (std::size_t bx = 0; bx < pw; bx += 8) {
        for (std::size_t y = 0; y < 8; ++y) {
          const std::size_t sy = std::min(by + y, img.height - 1);
          for (std::size_t x = 0; x < 8; ++x) {
            const std::size_t sx = std::min(bx + x, img.width - 1);
            block[y * 8 + x] = img.at(c, sy, sx) * 255.0 - 128.0;
          }
        }
        dct2_8x8(block, coef);
        for (int i = 0; i < 64; ++i) {
          coef[i] = std::round(coef[i] / table[i]) * table[i];
        }
        idct2_8x8(coef, rec);
        for (std::size_t y = 0; y < 8 && by + y < img.height; ++y) {
          for (std::size_t x = 0; x < 8 && bx + x < img.width; ++x) {
            out.at(c, by + y, bx + x) = (rec[y * 8 + x] + 128.0) / 255.0;
          }
        }
      }
    }
  }
  return out;
}

Image jpeg_like(const Image& img, int quality) {
  return jpeg_with_table(img, jpeg_quant_table(quality));
}

PairSample make_pair(const Image& hr, const DegradationConfig& cfg,
                     std::uint64_t seed) {
  cfg.validate();
  if (hr.height < cfg.crop || hr.width < cfg.crop) {
    throw std::invalid_argument("make_pair: image " + std::to_string(hr.width) +
                                "x" + std::to_string(hr.height) +
                                " smaller than crop " + std::to_string(cfg.crop));
  }
  Rng rng(seed);
  PairSample pair;
  pair.seed = seed;

  std::size_t y0 = 0, x0 = 0;
  if (hr.height > cfg.crop) y0 = rng.below(hr.height - cfg.crop + 1);
  if (hr.width > cfg.crop) x0 = rng.below(hr.width - cfg.crop + 1);
  pair.hr = crop(hr, y0, x0, cfg.crop, cfg.crop);

  Image cur = apply_stage(pair.hr, cfg.stage1, rng);
  cur = apply_stage(cur, cfg.stage2, rng);

  if (rng.uniform() < cfg.final_sinc_prob) {
    const double cutoff = rng.uniform(kPi / 3.0, kPi);
    cur = clamp01(convolve(cur, make_sinc_kernel(cfg.final_sinc_kernel_size, cutoff)));
  }

  const std::size_t lr_size = cfg.crop / cfg.scale;
  pair.lr = clamp01(resize(cur, lr_size, lr_size, cfg.final_downscale));
  pair.lr_resized = clamp01(resize(pair.lr, cfg.crop, cfg.crop, cfg.lr_upscale));
  return pair;
}

}  // namespace framer
