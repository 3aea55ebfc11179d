#pragma once

#include <cstdint>
#include <vector>

#include "framer/backbone.hpp"
#include "framer/image.hpp"
#include "framer/tensor.hpp"

namespace framer {

// Variance schedule with strictly increasing betas in (0,1). alpha_bar[t]
// is the cumulative product over steps 1..t, alpha_bar[0] == 1.
struct NoiseSchedule {
  std::size_t T = 1000;
  std::vector<double> betas;      // [T], 1-based via betas[t-1]
  std::vector<double> alphas;     // [T]
  std::vector<double> alpha_bar;  // [T+1], alpha_bar[0] = 1

  static NoiseSchedule linear(std::size_t T = 1000, double beta_start = 1e-4,
                              double beta_end = 2e-2);
  double beta(std::size_t t) const { return betas.at(t - 1); }
  double bar(std::size_t t) const { return alpha_bar.at(t); }
};

// z_t = sqrt(ab) z0 + sqrt(1-ab) noise with ab = alpha_bar[t].
Tensor q_sample(const Tensor& z0, std::size_t t, const Tensor& noise,
                const NoiseSchedule& sched);
Tensor q_sample_from_alpha_bar(const Tensor& z0, double alpha_bar,
                               const Tensor& noise);

// Per-sample timesteps over a [B,...] batch. Constant output (training
// inputs are data, not differentiation targets).
Tensor q_sample_batch(const Tensor& z0, const std::vector<std::size_t>& t,
                      const Tensor& noise, const NoiseSchedule& sched);

// Mean squared error between predicted and injected noise.
Tensor noise_loss(const Tensor& eps_pred, const Tensor& noise);

enum class SamplerKind { Ddpm, Ddim };

struct SampleOptions {
  SamplerKind sampler = SamplerKind::Ddim;  // Ddim is deterministic (eta = 0)
  std::size_t steps = 50;
  std::uint64_t seed = 0;
  std::size_t class_id = 0;
};

// Reverse process from pure noise at the target size, conditioned on the LR
// image (resized to the target size internally). Returns pixels in [0,1].
// This path touches only the backbone and the schedule; the distillation
// machinery plays no part in it.
Image sample(const Backbone& model, const Image& lr_image,
             const NoiseSchedule& sched, const SampleOptions& opt);

}  // namespace framer
