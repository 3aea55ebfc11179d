#include "framer/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace framer {

NoiseSchedule NoiseSchedule::linear(std::size_t T, double beta_start,
                                    double beta_end) {
  if (T == 0) throw std::invalid_argument("schedule: T must be positive");
  if (!(beta_start > 0.0 && beta_end < 1.0 && beta_start <= beta_end)) {
    throw std::invalid_argument("schedule: betas must satisfy 0 < start <= end < 1");
  }
  NoiseSchedule s;
  s.T = T;
  s.betas.resize(T);
  s.alphas.resize(T);
  s.alpha_bar.resize(T + 1);
  s.alpha_bar[0] = 1.0;
  for (std::size_t i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0
                               : static_cast<double>(i) /
                                     static_cast<double>(T - 1);
    s.betas[i] = beta_start + (beta_end - beta_start) * frac;
    s.alphas[i] = 1.0 - s.betas[i];
    s.alpha_bar[i + 1] = s.alpha_bar[i] * s.alphas[i];
  }
  return s;
}

Tensor q_sample_from_alpha_bar(const Tensor& z0, double alpha_bar,
                               const Tensor& noise) {
  if (z0.shape() != noise.shape()) {
    throw std::invalid_argument("q_sample: noise shape " +
                                shape_str(noise.shape()) + " != z0 " +
                                shape_str(z0.shape()));
  }
  const double a = std::sqrt(alpha_bar);
  const double b = std::sqrt(1.0 - alpha_bar);
  return add(mul_scalar(z0, a), mul_scalar(noise, b));
}

Tensor q_sample(const Tensor& z0, std::size_t t, const Tensor& noise,
                const NoiseSchedule& sched) {
  if (t < 1 || t > sched.T) {
    throw std::invalid_argument("q_sample: t=" + std::to_string(t) +
                                " outside [1," + std::to_string(sched.T) + "]");
  }
  return q_sample_from_alpha_bar(z0, sched.bar(t), noise);
}

Tensor q_sample_batch(const Tensor& z0, const std::vector<std::size_t>& t,
                      const Tensor& noise, const NoiseSchedule& sched) {
  if (z0.shape() != noise.shape() || z0.rank() < 1 ||
      t.size() != z0.shape()[0]) {
    throw std::invalid_argument("q_sample_batch: inconsistent inputs");
  }
  const std::size_t per = z0.numel() / t.size();
  std::vector<double> out(z0.numel());
  auto zv = z0.values();
  auto nv = noise.values();
  for (std::size_t b = 0; b < t.size(); ++b) {
    if (t[b] < 1 || t[b] > sched.T) {
      throw std::invalid_argument("q_sample_batch: t out of range");
    }
    const double ab = sched.bar(t[b]);
    const double sa = std::sqrt(ab), sb = std::sqrt(1.0 - ab);
    for (std::size_t i = 0; i < per; ++i) {
      out[b * per + i] = sa * zv[b * per + i] + sb * nv[b * per + i];
    }
  }
  return Tensor::from(z0.shape(), std::move(out));
}

Tensor noise_loss(const Tensor& eps_pred, const Tensor& noise) {
  if (eps_pred.shape() != noise.shape()) {
    throw std::invalid_argument("noise_loss: shape mismatch " +
                                shape_str(eps_pred.shape()) + " vs " +
                                shape_str(noise.shape()));
  }
  Tensor d = sub(eps_pred, noise);
  return mean_all(mul(d, d));
}

Image sample(const Backbone& model, const Image& lr_image,
             const NoiseSchedule& sched, const SampleOptions& opt) {
  if (opt.steps == 0 || opt.steps > sched.T) {
    throw std::invalid_argument("sample: steps outside [1,T]");
  }
  NoGradGuard guard;
  const auto& cfg = model.config();
  const std::size_t S = cfg.image_size;

  Image lr_up = resize(lr_image, S, S, ResizeKernel::Bicubic);
  std::vector<double> cond(lr_up.data.size());
  for (std::size_t i = 0; i < cond.size(); ++i) cond[i] = 2.0 * lr_up.data[i] - 1.0;
  Tensor lr_cond = Tensor::from({1, cfg.in_channels, S, S}, std::move(cond));

  Rng rng(opt.seed);
  Tensor z = Tensor::randn({1, cfg.in_channels, S, S}, rng);

  // Evenly spaced timestep subsequence from 1 up to T.
  std::vector<std::size_t> ts;
  if (opt.steps == 1) {
    ts.push_back(sched.T);
  } else {
    for (std::size_t i = 0; i < opt.steps; ++i) {
      ts.push_back(1 + ((sched.T - 1) * i) / (opt.steps - 1));
    }
  }
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  for (std::size_t k = ts.size(); k-- > 0;) {
    const std::size_t t = ts[k];
    const std::size_t t_prev = k == 0 ? 0 : ts[k - 1];
    ForwardResult fr = model.forward(z, {static_cast<int>(t)}, lr_cond,
                                     {opt.class_id}, false);
    const double ab_t = sched.bar(t);
    const double ab_prev = sched.bar(t_prev);

    if (opt.sampler == SamplerKind::Ddim) {
      // Deterministic update (eta = 0): move to the predicted clean image,
      // then re-noise analytically to the previous level.
      std::vector<double> next(z.numel());
      auto zv = z.values();
      auto ev = fr.eps.values();
      const double sa = std::sqrt(ab_t), sb = std::sqrt(1.0 - ab_t);
      const double pa = std::sqrt(ab_prev), pb = std::sqrt(1.0 - ab_prev);
      for (std::size_t i = 0; i < next.size(); ++i) {
        const double x0 = (zv[i] - sb * ev[i]) / sa;
        next[i] = pa * x0 + pb * ev[i];
      }
      z = Tensor::from(z.shape(), std::move(next));
    } else {
      const double beta = sched.beta(t);
      const double alpha = 1.0 - beta;
      const double coef = beta / std::sqrt(1.0 - ab_t);
      const double inv_sqrt_alpha = 1.0 / std::sqrt(alpha);
      const double sigma = t_prev == 0 ? 0.0
                                       : std::sqrt(beta * (1.0 - ab_prev) /
                                                   (1.0 - ab_t));
      std::vector<double> next(z.numel());
      auto zv = z.values();
      auto ev = fr.eps.values();
      for (std::size_t i = 0; i < next.size(); ++i) {
        next[i] = inv_sqrt_alpha * (zv[i] - coef * ev[i]);
        if (sigma > 0.0) next[i] += sigma * rng.normal();
      }
      z = Tensor::from(z.shape(), std::move(next));
    }
  }

  // Pixel-space decode: invert the [-1,1] mapping.
  Image out(cfg.in_channels, S, S);
  auto zv = z.values();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = std::clamp((zv[i] + 1.0) * 0.5, 0.0, 1.0);
  }
  return out;
}

}  // namespace framer
