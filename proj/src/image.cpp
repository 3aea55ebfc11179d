#include "framer/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace framer {

namespace {

double cubic_keys(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

std::size_t clamp_idx(long i, std::size_t n) {
  if (i < 0) return 0;
  if (i >= static_cast<long>(n)) return n - 1;
  return static_cast<std::size_t>(i);
}

Image resize_separable(const Image& img, std::size_t oh, std::size_t ow,
                       bool bicubic) {
  const std::size_t taps = bicubic ? 4 : 2;
  auto weights_for = [&](std::size_t out_n, std::size_t in_n) {
    struct Row {
      long first;
      double w[4];
    };
    std::vector<Row> rows(out_n);
    const double scale = static_cast<double>(in_n) / static_cast<double>(out_n);
    for (std::size_t o = 0; o < out_n; ++o) {
      const double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      const double fl = std::floor(src);
      Row r{};
      if (bicubic) {
        r.first = static_cast<long>(fl) - 1;
        double sum = 0.0;
        for (std::size_t t = 0; t < 4; ++t) {
          r.w[t] = cubic_keys(src - (fl - 1.0 + static_cast<double>(t)));
          sum += r.w[t];
        }
        for (std::size_t t = 0; t < 4; ++t) r.w[t] /= sum;
      } else {
        r.first = static_cast<long>(fl);
        const double f = src - fl;
        r.w[0] = 1.0 - f;
        r.w[1] = f;
      }
      rows[o] = r;
    }
    return rows;
  };

  const auto wy = weights_for(oh, img.height);
  const auto wx = weights_for(ow, img.width);
  Image tmp(img.channels, oh, img.width);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        double acc = 0.0;
        for (std::size_t t = 0; t < taps; ++t) {
          acc += wy[y].w[t] * img.at(c, clamp_idx(wy[y].first + static_cast<long>(t), img.height), x);
        }
        tmp.at(c, y, x) = acc;
      }
    }
  }
  Image out(img.channels, oh, ow);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        double acc = 0.0;
        for (std::size_t t = 0; t < taps; ++t) {
          acc += wx[x].w[t] * tmp.at(c, y, clamp_idx(wx[x].first + static_cast<long>(t), img.width));
        }
        out.at(c, y, x) = acc;
      }
    }
  }
  return out;
}

Image resize_area(const Image& img, std::size_t oh, std::size_t ow) {
  Image out(img.channels, oh, ow);
  const double sy = static_cast<double>(img.height) / static_cast<double>(oh);
  const double sx = static_cast<double>(img.width) / static_cast<double>(ow);
  for (std::size_t c = 0; c < img.channels; ++c) {
    for (std::size_t y = 0; y < oh; ++y) {
      const double y0 = y * sy, y1 = (y + 1) * sy;
      for (std::size_t x = 0; x < ow; ++x) {
        const double x0 = x * sx, x1 = (x + 1) * sx;
        double acc = 0.0, area = 0.0;
        for (long iy = static_cast<long>(std::floor(y0)); iy < static_cast<long>(std::ceil(y1)); ++iy) {
          const double hy = std::min(y1, static_cast<double>(iy + 1)) -
                            std::max(y0, static_cast<double>(iy));
          if (hy <= 0.0) continue;
          for (long ix = static_cast<long>(std::floor(x0)); ix < static_cast<long>(std::ceil(x1)); ++ix) {
            const double hx = std::min(x1, static_cast<double>(ix + 1)) -
                              std::max(x0, static_cast<double>(ix));
            if (hx <= 0.0) continue;
            acc += hy * hx * img.at(c, clamp_idx(iy, img.height), clamp_idx(ix, img.width));
            area += hy * hx;
          }
        }
        out.at(c, y, x) = acc / area;
      }
    }
  }
  return out;
}

}  // namespace

Image resize(const Image& img, std::size_t oh, std::size_t ow, ResizeKernel k) {
  if (oh == 0 || ow == 0) throw std::invalid_argument("resize: zero extent");
  if (oh == img.height && ow == img.width) return img;
  switch (k) {
    case ResizeKernel::Bilinear:
      return resize_separable(img, oh, ow, false);
    case ResizeKernel::Bicubic:
      return resize_separable(img, oh, ow, true);
    case ResizeKernel::Area:
      return resize_area(img, oh, ow);
  }
  throw std::invalid_argument("resize: unknown kernel");
}

Image clamp01(Image img) {
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

Image crop(const Image& img, std::size_t y0, std::size_t x0, std::size_t h,
           std::size_t w) {
  if (y0 + h > img.height || x0 + w > img.width) {
    throw std::invalid_argument("crop: window exceeds image");
  }
  Image out(img.channels, h, w);
  for (std::size_t c = 0; c < img.channels; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        out.at(c, y, x) = img.at(c, y0 + y, x0 + x);
  return out;
}

void write_ppm(const Image& img, const std::string& path) {
  if (img.channels != 3 && img.channels != 1) {
    throw std::invalid_argument("write_ppm: needs 1 or 3 channels");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << (img.channels == 3 ? "P6\n" : "P5\n")
     << img.width << ' ' << img.height << "\n255\n";
  std::vector<unsigned char> row(img.width * img.channels);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
        row[x * img.channels + c] =
            static_cast<unsigned char>(std::lround(v * 255.0));
      }
    }
    os.write(reinterpret_cast<const char*>(row.data()),
             static_cast<std::streamsize>(row.size()));
  }
}

Image read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string magic;
  is >> magic;
  if (magic != "P6" && magic != "P5") {
    throw std::runtime_error(path + ": unsupported format " + magic);
  }
  auto next_int = [&is, &path]() {
    // Skips whitespace and '#' comments.
    for (;;) {
      int ch = is.peek();
      if (ch == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(ch)) {
        is.get();
      } else {
        break;
      }
    }
    long v = -1;
    is >> v;
    if (v < 0) throw std::runtime_error(path + ": malformed header");
    return static_cast<std::size_t>(v);
  };
  const std::size_t w = next_int();
  const std::size_t h = next_int();
  const std::size_t maxv = next_int();
  if (maxv == 0 || maxv > 255) {
    throw std::runtime_error(path + ": unsupported max value");
  }
  is.get();  // single whitespace before payload
  const std::size_t channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> raw(w * h * channels);
  is.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(is.gcount()) != raw.size()) {
    throw std::runtime_error(path + ": truncated payload");
  }
  Image img(channels, h, w);
  const double inv = 1.0 / static_cast<double>(maxv);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < channels; ++c)
        img.at(c, y, x) = raw[(y * w + x) * channels + c] * inv;
  return img;
}

Tensor image_to_tensor(const Image& img) {
  return Tensor::from({img.channels, img.height, img.width}, img.data);
}

Image tensor_to_image(const Tensor& t) {
  if (t.rank() != 3) throw std::invalid_argument("tensor_to_image: want [C,H,W]");
  Image img(t.shape()[0], t.shape()[1], t.shape()[2]);
  auto v = t.values();
  img.data.assign(v.begin(), v.end());
  return img;
}

Tensor stack_images(const std::vector<Image>& imgs) {
  if (imgs.empty()) throw std::invalid_argument("stack_images: empty batch");
  const std::size_t c = imgs[0].channels, h = imgs[0].height, w = imgs[0].width;
  std::vector<double> data;
  data.reserve(imgs.size() * c * h * w);
  for (const Image& img : imgs) {
    if (img.channels != c || img.height != h || img.width != w) {
      throw std::invalid_argument("stack_images: mixed shapes");
    }
    data.insert(data.end(), img.data.begin(), img.data.end());
  }
  return Tensor::from({imgs.size(), c, h, w}, std::move(data));
}

double mse_between(const Image& a, const Image& b) {
  if (a.data.size() != b.data.size()) {
    throw std::invalid_argument("mse_between: size mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    s += d * d;
  }
  return s / static_cast<double>(a.data.size());
}

double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::abs(a.data[i] - b.data[i]));
  }
  return m;
}

}  // namespace framer
