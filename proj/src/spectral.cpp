#include "framer/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace framer {

namespace {

// Signed frequency of an unshifted bin; |f| equals the distance from the
// centered DC bin after an fftshift.
long freq_of(std::size_t u, std::size_t n) {
  return u <= n / 2 ? static_cast<long>(u)
                    : static_cast<long>(u) - static_cast<long>(n);
}

double half_diagonal(std::size_t h, std::size_t w) {
  const double my = h % 2 == 0 ? static_cast<double>(h) / 2.0
                               : static_cast<double>(h - 1) / 2.0;
  const double mx = w % 2 == 0 ? static_cast<double>(w) / 2.0
                               : static_cast<double>(w - 1) / 2.0;
  return std::hypot(my, mx);
}

}  // namespace

std::size_t BandMasks::count(Band b) const {
  const auto& m = b == Band::Low ? m_lf : m_hf;
  std::size_t c = 0;
  for (auto v : m) c += v;
  return c;
}

bool BandMasks::low_at(std::size_t u, std::size_t v) const {
  return m_lf[u * width + v] != 0;
}

BandMasks make_band_masks(std::size_t h, std::size_t w, double radius_fraction) {
  if (h == 0 || w == 0) throw std::invalid_argument("make_band_masks: empty grid");
  if (!(radius_fraction > 0.0 && radius_fraction < 1.0)) {
    throw std::invalid_argument("make_band_masks: radius fraction " +
                                std::to_string(radius_fraction) +
                                " outside (0,1)");
  }
  BandMasks masks;
  masks.height = h;
  masks.width = w;
  masks.radius_fraction = radius_fraction;
  masks.m_lf.assign(h * w, 0);
  masks.m_hf.assign(h * w, 0);
  const double diag = half_diagonal(h, w);
  for (std::size_t u = 0; u < h; ++u) {
    const double fy = static_cast<double>(freq_of(u, h));
    for (std::size_t v = 0; v < w; ++v) {
      const double fx = static_cast<double>(freq_of(v, w));
      const double dist = std::hypot(fy, fx);
      const bool low = diag == 0.0 ? true : dist / diag <= radius_fraction;
      masks.m_lf[u * w + v] = low ? 1 : 0;
      masks.m_hf[u * w + v] = low ? 0 : 1;
    }
  }
  return masks;
}

std::vector<double> BandPair::lf_spatial(std::size_t h, std::size_t w) const {
  auto rec = ifft2(lf_spectrum, h, w);
  std::vector<double> out(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) out[i] = rec[i].real();
  return out;
}

std::vector<double> BandPair::hf_spatial(std::size_t h, std::size_t w) const {
  auto rec = ifft2(hf_spectrum, h, w);
  std::vector<double> out(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) out[i] = rec[i].real();
  return out;
}

BandPair decompose(const std::vector<double>& slice, const BandMasks& masks) {
  if (slice.size() != masks.height * masks.width) {
    throw std::invalid_argument("decompose: slice size " +
                                std::to_string(slice.size()) +
                                " does not match masks " +
                                std::to_string(masks.height) + "x" +
                                std::to_string(masks.width));
  }
  BandPair pair;
  auto spec = fft2(slice, masks.height, masks.width);
  pair.lf_spectrum.resize(spec.size());
  pair.hf_spectrum.resize(spec.size());
  pair.magnitude.resize(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    pair.magnitude[i] = std::abs(spec[i]);
    if (masks.m_lf[i]) {
      pair.lf_spectrum[i] = spec[i];
    } else {
      pair.hf_spectrum[i] = spec[i];
    }
  }
  return pair;
}

BandEnergy band_energy(std::span<const double> feature, std::size_t channels,
                       const BandMasks& masks) {
  const std::size_t plane = masks.height * masks.width;
  if (channels == 0 || feature.size() != channels * plane) {
    throw std::invalid_argument("band_energy: feature size does not match");
  }
  double lf_sum = 0.0, hf_sum = 0.0;
  std::vector<double> slice(plane);
  for (std::size_t c = 0; c < channels; ++c) {
    std::copy_n(feature.data() + c * plane, plane, slice.data());
    auto spec = fft2(slice, masks.height, masks.width);
    for (std::size_t i = 0; i < plane; ++i) {
      const double mag = std::abs(spec[i]);
      if (masks.m_lf[i]) {
        lf_sum += mag;
      } else {
        hf_sum += mag;
      }
    }
  }
  const double nc = static_cast<double>(channels);
  BandEnergy e;
  e.lf = lf_sum / (nc * static_cast<double>(masks.count(Band::Low)) + kBandEnergyEps);
  e.hf = hf_sum / (nc * static_cast<double>(masks.count(Band::High)) + kBandEnergyEps);
  return e;
}

BandHistogram band_histogram(const std::vector<std::vector<double>>& features,
                             std::size_t channels, const BandMasks& masks,
                             std::size_t bins, double clip_percentile) {
  if (features.empty()) {
    throw std::invalid_argument("band_histogram: empty feature set");
  }
  if (bins == 0) throw std::invalid_argument("band_histogram: zero bins");
  const std::size_t plane = masks.height * masks.width;

  // Pass 1: collect log(1+|F|) per band per input.
  std::vector<std::vector<double>> lf_vals(features.size()), hf_vals(features.size());
  std::vector<double> slice(plane);
  for (std::size_t fi = 0; fi < features.size(); ++fi) {
    const auto& feat = features[fi];
    if (feat.size() != channels * plane) {
      throw std::invalid_argument("band_histogram: feature size mismatch");
    }
    for (std::size_t c = 0; c < channels; ++c) {
      std::copy_n(feat.data() + c * plane, plane, slice.data());
      auto spec = fft2(slice, masks.height, masks.width);
      for (std::size_t i = 0; i < plane; ++i) {
        const double v = std::log1p(std::abs(spec[i]));
        if (masks.m_lf[i]) {
          lf_vals[fi].push_back(v);
        } else {
          hf_vals[fi].push_back(v);
        }
      }
    }
  }

  // Shared edges over the pooled values of both bands.
  std::vector<double> pooled;
  for (std::size_t fi = 0; fi < features.size(); ++fi) {
    pooled.insert(pooled.end(), lf_vals[fi].begin(), lf_vals[fi].end());
    pooled.insert(pooled.end(), hf_vals[fi].begin(), hf_vals[fi].end());
  }
  double hi = 0.0;
  if (clip_percentile >= 100.0) {
    for (double v : pooled) hi = std::max(hi, v);
  } else {
    std::sort(pooled.begin(), pooled.end());
    const double q = std::clamp(clip_percentile / 100.0, 0.0, 1.0);
    const std::size_t idx = std::min(
        pooled.size() - 1,
        static_cast<std::size_t>(q * static_cast<double>(pooled.size() - 1)));
    hi = pooled[idx];
  }
  if (hi <= 0.0) hi = 1.0;
  const double width = hi / static_cast<double>(bins);

  BandHistogram out;
  out.bin_left.resize(bins);
  out.bin_right.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out.bin_left[b] = width * static_cast<double>(b);
    out.bin_right[b] = width * static_cast<double>(b + 1);
  }

  auto accumulate = [&](const std::vector<std::vector<double>>& vals,
                        std::vector<double>& mean, std::vector<double>& stdev,
                        double& value_mean) {
    std::vector<std::vector<double>> dens(vals.size(),
                                          std::vector<double>(bins, 0.0));
    double vsum = 0.0;
    std::size_t vcount = 0;
    for (std::size_t fi = 0; fi < vals.size(); ++fi) {
      for (double v : vals[fi]) {
        auto b = static_cast<std::size_t>(
            std::min(static_cast<double>(bins - 1), std::max(0.0, v / width)));
        dens[fi][b] += 1.0;
        vsum += v;
      }
      vcount += vals[fi].size();
      if (!vals[fi].empty()) {
        const double inv = 1.0 / static_cast<double>(vals[fi].size());
        for (double& d : dens[fi]) d *= inv;
      }
    }
    value_mean = vcount == 0 ? 0.0 : vsum / static_cast<double>(vcount);
    mean.assign(bins, 0.0);
    stdev.assign(bins, 0.0);
    const double invn = 1.0 / static_cast<double>(vals.size());
    for (std::size_t b = 0; b < bins; ++b) {
      for (std::size_t fi = 0; fi < vals.size(); ++fi) mean[b] += dens[fi][b];
      mean[b] *= invn;
      double var = 0.0;
      for (std::size_t fi = 0; fi < vals.size(); ++fi) {
        const double d = dens[fi][b] - mean[b];
        var += d * d;
      }
      stdev[b] = std::sqrt(var * invn);
    }
  };
  accumulate(lf_vals, out.lf_mean, out.lf_std, out.lf_value_mean);
  accumulate(hf_vals, out.hf_mean, out.hf_std, out.hf_value_mean);
  return out;
}

void write_band_histogram_csv(const BandHistogram& h, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "bin_left,bin_right,lf_density_mean,lf_density_std,hf_density_mean,hf_density_std\n";
  os.precision(12);
  for (std::size_t b = 0; b < h.bin_left.size(); ++b) {
    os << h.bin_left[b] << ',' << h.bin_right[b] << ',' << h.lf_mean[b] << ','
       << h.lf_std[b] << ',' << h.hf_mean[b] << ',' << h.hf_std[b] << '\n';
  }
}

Tensor band_filter(const Tensor& x, const BandMasks& masks, Band band) {
  if (x.rank() < 2 || x.shape()[x.rank() - 2] != masks.height ||
      x.shape()[x.rank() - 1] != masks.width) {
    throw std::invalid_argument("band_filter: tensor " + shape_str(x.shape()) +
                                " does not end in " +
                                std::to_string(masks.height) + "x" +
                                std::to_string(masks.width));
  }
  const std::size_t plane = masks.height * masks.width;
  const std::size_t planes = x.numel() / plane;

  auto apply = [masks, band, plane, planes](std::span<const double> in,
                                            std::vector<double>& out) {
    std::vector<double> slice(plane);
    const auto& keep = band == Band::Low ? masks.m_lf : masks.m_hf;
    for (std::size_t p = 0; p < planes; ++p) {
      std::copy_n(in.data() + p * plane, plane, slice.data());
      auto spec = fft2(slice, masks.height, masks.width);
      for (std::size_t i = 0; i < plane; ++i) {
        if (!keep[i]) spec[i] = cdouble(0.0, 0.0);
      }
      auto rec = ifft2(spec, masks.height, masks.width);
      for (std::size_t i = 0; i < plane; ++i) out[p * plane + i] = rec[i].real();
    }
  };

  std::vector<double> out(x.numel());
  apply(x.values(), out);
  Tensor xt = x;
  return Tensor::make(x.shape(), std::move(out), "band_filter", {x},
                      [xt, apply](Node& node) {
                        std::vector<double> gfilt(node.grad.size());
                        apply(node.grad, gfilt);
                        auto& dx = xt.node()->grad_buf();
                        for (std::size_t i = 0; i < gfilt.size(); ++i)
                          dx[i] += gfilt[i];
                      });
}

}  // namespace framer
