#include "framer/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace framer {

namespace {

double plain_cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::vector<double> band_values(std::span<const double> feature,
                                std::size_t channels, const BandMasks& masks,
                                Band band) {
  const std::size_t plane = masks.height * masks.width;
  std::vector<double> out(feature.size());
  std::vector<double> slice(plane);
  for (std::size_t c = 0; c < channels; ++c) {
    std::copy_n(feature.data() + c * plane, plane, slice.data());
    BandPair pair = decompose(slice, masks);
    auto rec = band == Band::Low ? pair.lf_spatial(masks.height, masks.width)
                                 : pair.hf_spatial(masks.height, masks.width);
    std::copy(rec.begin(), rec.end(), out.begin() + c * plane);
  }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
  if (a.data.size() != b.data.size()) {
    throw std::invalid_argument("psnr: shape mismatch");
  }
  const double mse = mse_between(a, b);
  if (mse == 0.0) return 100.0;
  return std::min(100.0, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& a, const Image& b, double peak) {
  if (a.channels != b.channels || a.height != b.height || a.width != b.width) {
    throw std::invalid_argument("ssim: shape mismatch");
  }
  std::size_t win = std::min<std::size_t>({11, a.height, a.width});
  if (win % 2 == 0) --win;
  const long r = static_cast<long>(win / 2);
  std::vector<double> g(win);
  {
    double s = 0.0;
    const double sigma = 1.5;
    for (std::size_t i = 0; i < win; ++i) {
      const double d = static_cast<double>(i) - static_cast<double>(r);
      g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
      s += g[i];
    }
    for (double& v : g) v /= s;
  }
  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);

  double total = 0.0;
  for (std::size_t ch = 0; ch < a.channels; ++ch) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t y = r; y + r < a.height; ++y) {
      for (std::size_t x = r; x + r < a.width; ++x) {
        double mx = 0.0, my = 0.0;
        for (std::size_t wy = 0; wy < win; ++wy) {
          for (std::size_t wx = 0; wx < win; ++wx) {
            const double wgt = g[wy] * g[wx];
            mx += wgt * a.at(ch, y + wy - r, x + wx - r);
            my += wgt * b.at(ch, y + wy - r, x + wx - r);
          }
        }
        double vx = 0.0, vy = 0.0, cov = 0.0;
        for (std::size_t wy = 0; wy < win; ++wy) {
          for (std::size_t wx = 0; wx < win; ++wx) {
            const double wgt = g[wy] * g[wx];
            const double da = a.at(ch, y + wy - r, x + wx - r) - mx;
            const double db = b.at(ch, y + wy - r, x + wx - r) - my;
            vx += wgt * da * da;
            vy += wgt * db * db;
            cov += wgt * da * db;
          }
        }
        const double num = (2.0 * mx * my + c1) * (2.0 * cov + c2);
        const double den = (mx * mx + my * my + c1) * (vx + vy + c2);
        acc += num / den;
        ++count;
      }
    }
    if (count == 0) throw std::invalid_argument("ssim: image smaller than window");
    total += acc / static_cast<double>(count);
  }
  return total / static_cast<double>(a.channels);
}

std::vector<LayerCosineRow> layer_cosine_curve(const std::vector<Tensor>& adapted,
                                               std::size_t teacher_index,
                                               const BandMasks& masks) {
  if (adapted.empty()) throw std::invalid_argument("layer_cosine_curve: no taps");
  if (teacher_index < 1 || teacher_index > adapted.size()) {
    throw std::invalid_argument("layer_cosine_curve: bad teacher index");
  }
  const std::size_t n = adapted.size();
  const Tensor& teacher = adapted[teacher_index - 1];
  const std::size_t B = teacher.shape()[0];
  const std::size_t C = teacher.shape()[1];
  const std::size_t per = teacher.numel() / B;

  std::vector<std::vector<double>> t_lf(B), t_hf(B);
  for (std::size_t b = 0; b < B; ++b) {
    std::span<const double> feat(teacher.values().data() + b * per, per);
    t_lf[b] = band_values(feat, C, masks, Band::Low);
    t_hf[b] = band_values(feat, C, masks, Band::High);
  }

  std::vector<LayerCosineRow> rows;
  rows.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    LayerCosineRow row;
    row.layer = i;
    row.depth = static_cast<double>(i) / static_cast<double>(n);
    if (i == teacher_index) {
      // Reference row: self-similarity by definition.
      row.cos_lf = 1.0;
      row.cos_hf = 1.0;
    } else {
      const Tensor& tap = adapted[i - 1];
      if (tap.shape() != teacher.shape()) {
        throw std::invalid_argument("layer_cosine_curve: tap " +
                                    std::to_string(i) + " not adapted");
      }
      double lf = 0.0, hf = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        std::span<const double> feat(tap.values().data() + b * per, per);
        auto s_lf = band_values(feat, C, masks, Band::Low);
        auto s_hf = band_values(feat, C, masks, Band::High);
        lf += plain_cosine(s_lf, t_lf[b]);
        hf += plain_cosine(s_hf, t_hf[b]);
      }
      row.cos_lf = lf / static_cast<double>(B);
      row.cos_hf = hf / static_cast<double>(B);
    }
    rows.push_back(row);
  }
  return rows;
}

std::vector<LayerCosineRow> layer_cosine_curve(const Backbone& model,
                                               const AdapterSet& adapters,
                                               const std::vector<Image>& hr_batch,
                                               const std::vector<Image>& lr_up_batch,
                                               const NoiseSchedule& sched,
                                               const LayerCurveRequest& req,
                                               const BandMasks& masks) {
  if (hr_batch.empty() || hr_batch.size() != lr_up_batch.size()) {
    throw std::invalid_argument("layer_cosine_curve: empty or ragged batch");
  }
  NoGradGuard guard;
  const std::size_t B = hr_batch.size();

  auto to_signal = [](const std::vector<Image>& imgs) {
    Tensor t = stack_images(imgs);
    std::vector<double> v(t.values().begin(), t.values().end());
    for (double& x : v) x = 2.0 * x - 1.0;
    return Tensor::from(t.shape(), std::move(v));
  };
  Tensor z0 = to_signal(hr_batch);
  Tensor lr_cond = to_signal(lr_up_batch);

  Rng rng(req.noise_seed);
  Tensor noise = Tensor::randn(z0.shape(), rng);
  Tensor z_t = q_sample(z0, static_cast<std::size_t>(req.t), noise, sched);

  ForwardResult fr = model.forward(z_t, std::vector<int>(B, req.t), lr_cond,
                                   std::vector<std::size_t>(B, req.class_id),
                                   true);
  std::vector<Tensor> adapted;
  adapted.reserve(fr.taps.size());
  for (const FeatureTap& tap : fr.taps) adapted.push_back(adapters.adapt(tap));
  return layer_cosine_curve(adapted, model.teacher_index(), masks);
}

std::vector<double> cross_sample_matrix(const Tensor& features,
                                        const BandMasks& masks, Band band) {
  if (features.rank() != 4) {
    throw std::invalid_argument("cross_sample_matrix: want [B,C,H,W]");
  }
  const std::size_t B = features.shape()[0];
  if (B < 2) {
    throw std::invalid_argument("cross_sample_matrix: need at least 2 samples");
  }
  const std::size_t C = features.shape()[1];
  const std::size_t per = features.numel() / B;
  std::vector<std::vector<double>> bands(B);
  for (std::size_t b = 0; b < B; ++b) {
    std::span<const double> feat(features.values().data() + b * per, per);
    bands[b] = band_values(feat, C, masks, band);
  }
  std::vector<double> m(B * B, 1.0);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = i + 1; j < B; ++j) {
      const double c = plain_cosine(bands[i], bands[j]);
      m[i * B + j] = c;
      m[j * B + i] = c;
    }
  }
  return m;
}

void write_layer_curves_csv(
    const std::string& path,
    const std::vector<std::pair<int, std::vector<LayerCosineRow>>>& curves) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.precision(12);
  os << "t,depth,cos_lf,cos_hf\n";
  for (const auto& [t, rows] : curves) {
    for (const auto& r : rows) {
      os << t << ',' << r.depth << ',' << r.cos_lf << ',' << r.cos_hf << '\n';
    }
  }
}

void write_simmatrix_csv(const std::string& path, std::size_t batch,
                         const std::vector<double>& lf_matrix,
                         const std::vector<double>& hf_matrix) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.precision(12);
  os << "band,i,j,cos\n";
  auto dump = [&](const char* band, const std::vector<double>& m) {
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t j = 0; j < batch; ++j) {
        os << band << ',' << i << ',' << j << ',' << m[i * batch + j] << '\n';
      }
    }
  };
  dump("lf", lf_matrix);
  dump("hf", hf_matrix);
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.precision(12);
  os << "image_id,psnr,ssim\n";
  for (const auto& r : rows) {
    os << r.id << ',' << r.psnr << ',' << r.ssim << '\n';
  }
}

}  // namespace framer
