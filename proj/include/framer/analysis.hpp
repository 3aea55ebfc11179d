#pragma once

#include <string>
#include <utility>
#include <vector>

#include "framer/backbone.hpp"
#include "framer/diffusion.hpp"
#include "framer/image.hpp"
#include "framer/spectral.hpp"

namespace framer {

// 10*log10(peak^2 / MSE), capped at 100 dB.
double psnr(const Image& a, const Image& b, double peak = 1.0);

// Standard Gaussian-window SSIM (sigma 1.5, C1=(0.01 peak)^2,
// C2=(0.03 peak)^2), averaged over channels. The 11x11 window shrinks to
// fit images smaller than 11 pixels.
double ssim(const Image& a, const Image& b, double peak = 1.0);

struct LayerCosineRow {
  std::size_t layer = 0;
  double depth = 0.0;
  double cos_lf = 0.0;
  double cos_hf = 0.0;
};

// Per-layer cosine similarity between each tap's band reconstructions and
// the reference tap's, per sample, averaged over the batch. Inputs are
// already shape-adapted [B,C,H,W] tensors in tap order (1-based teacher
// index). The reference row is the self-similarity, exactly 1.
std::vector<LayerCosineRow> layer_cosine_curve(const std::vector<Tensor>& adapted,
                                               std::size_t teacher_index,
                                               const BandMasks& masks);

struct LayerCurveRequest {
  int t = 300;
  std::uint64_t noise_seed = 0;
  std::size_t class_id = 0;
};

// Forwards a batch at noise level t and measures the curve on the taps.
std::vector<LayerCosineRow> layer_cosine_curve(const Backbone& model,
                                               const AdapterSet& adapters,
                                               const std::vector<Image>& hr_batch,
                                               const std::vector<Image>& lr_up_batch,
                                               const NoiseSchedule& sched,
                                               const LayerCurveRequest& req,
                                               const BandMasks& masks);

// Cross-sample cosine matrix of one band at one layer: row-major [B,B],
// symmetric with unit diagonal. features is [B,C,H,W].
std::vector<double> cross_sample_matrix(const Tensor& features,
                                        const BandMasks& masks, Band band);

void write_layer_curves_csv(
    const std::string& path,
    const std::vector<std::pair<int, std::vector<LayerCosineRow>>>& curves);

void write_simmatrix_csv(const std::string& path, std::size_t batch,
                         const std::vector<double>& lf_matrix,
                         const std::vector<double>& hf_matrix);

struct MetricRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
};
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows);

}  // namespace framer
