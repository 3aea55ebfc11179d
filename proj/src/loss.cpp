#include "framer/loss.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace framer {

namespace {

std::atomic<bool> g_warned_zero_norm{false};

void warn_zero_norm() {
  if (!g_warned_zero_norm.exchange(true)) {
    std::fprintf(stderr,
                 "framer: cosine_sim saw a zero-norm operand; similarity "
                 "defined as 0\n");
  }
}

double plain_cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    warn_zero_norm();
    return 0.0;
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Tensor mse(const Tensor& a, const Tensor& b) {
  Tensor d = sub(a, b);
  return mean_all(mul(d, d));
}

}  // namespace

Tensor cosine_sim(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("cosine_sim: shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  double na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    na += a.at(i) * a.at(i);
    nb += b.at(i) * b.at(i);
  }
  if (na == 0.0 || nb == 0.0) {
    warn_zero_norm();
    return Tensor::scalar(0.0);
  }
  Tensor dot = sum_all(mul(a, b));
  Tensor norm = mul(sqrt(sum_all(mul(a, a))), sqrt(sum_all(mul(b, b))));
  return div(dot, norm);
}

Tensor intra_cl(const Tensor& student, const Tensor& teacher,
                const Tensor& negative) {
  Tensor s_plus = cosine_sim(student, teacher);
  Tensor s_minus = cosine_sim(student, negative);
  return sub(log_sum_exp({s_plus, s_minus}), s_plus);
}

Tensor inter_cl(const Tensor& student, const Tensor& teacher,
                const Tensor& negative,
                const std::vector<Tensor>& batch_negatives) {
  Tensor s_plus = cosine_sim(student, teacher);
  std::vector<Tensor> terms{s_plus, cosine_sim(student, negative)};
  terms.reserve(2 + batch_negatives.size());
  for (const Tensor& x : batch_negatives) {
    terms.push_back(cosine_sim(student, x));
  }
  return sub(log_sum_exp(terms), s_plus);
}

NegativeDraw draw_negative_layer(std::size_t i, std::size_t n, Rng& rng) {
  return draw_negative_layer(i, n, n, rng);
}

NegativeDraw draw_negative_layer(std::size_t i, std::size_t n,
                                 std::size_t teacher, Rng& rng) {
  std::vector<std::size_t> candidates;
  candidates.reserve(n);
  for (std::size_t j = 1; j <= n; ++j) {
    if (j != i && j != teacher) candidates.push_back(j);
  }
  if (candidates.empty()) {
    throw std::invalid_argument(
        "draw_negative_layer: insufficient layers for random-layer negative "
        "(n=" + std::to_string(n) + ")");
  }
  NegativeDraw draw;
  draw.student = i;
  draw.rng_state_before = rng.state();
  draw.negative = candidates[rng.below(candidates.size())];
  return draw;
}

FawResult faw_from_energies(const BandEnergy& student,
                            const BandEnergy& teacher) {
  FawResult r;
  r.delta_lf = std::abs(teacher.lf - student.lf) / (student.lf + kBandEnergyEps);
  r.delta_hf = std::abs(teacher.hf - student.hf) / (student.hf + kBandEnergyEps);
  const double m = std::max(r.delta_lf, r.delta_hf);
  const double el = std::exp(r.delta_lf - m);
  const double eh = std::exp(r.delta_hf - m);
  r.w_lf = el / (el + eh);
  r.w_hf = eh / (el + eh);
  return r;
}

FawResult faw_weights(std::span<const double> student_feature,
                      std::span<const double> teacher_feature,
                      std::size_t channels, const BandMasks& masks) {
  return faw_from_energies(band_energy(student_feature, channels, masks),
                           band_energy(teacher_feature, channels, masks));
}

FamResult fam_gates(std::span<const double> student_lf,
                    std::span<const double> teacher_lf,
                    std::span<const double> student_hf,
                    std::span<const double> teacher_hf) {
  FamResult r;
  r.a_lf = std::max(0.0, plain_cosine(student_lf, teacher_lf));
  r.a_hf = std::max(0.0, plain_cosine(student_hf, teacher_hf));
  return r;
}

LayerModulation compute_modulation(std::size_t layer,
                                   std::span<const double> student_raw,
                                   std::span<const double> teacher_raw,
                                   std::size_t channels,
                                   std::span<const double> student_lf,
                                   std::span<const double> teacher_lf,
                                   std::span<const double> student_hf,
                                   std::span<const double> teacher_hf,
                                   const BandMasks& masks,
                                   const LossConfig& cfg) {
  LayerModulation mod;
  mod.layer = layer;
  if (cfg.use_faw) {
    FawResult faw = faw_weights(student_raw, teacher_raw, channels, masks);
    mod.w_lf = faw.w_lf;
    mod.w_hf = faw.w_hf;
    mod.delta_lf = faw.delta_lf;
    mod.delta_hf = faw.delta_hf;
  }
  if (cfg.use_fam) {
    FamResult fam = fam_gates(student_lf, teacher_lf, student_hf, teacher_hf);
    mod.a_lf = fam.a_lf;
    mod.a_hf = fam.a_hf;
  }
  mod.gated_lf = mod.w_lf * mod.a_lf;
  mod.gated_hf = mod.w_hf * mod.a_hf;
  return mod;
}

LayerLossResult layer_framer_loss(const LayerLossInputs& in,
                                  const BandMasks& masks,
                                  const LossConfig& cfg) {
  const std::size_t batch = in.student.size();
  if (batch == 0 || in.teacher.size() != batch) {
    throw std::invalid_argument("layer_framer_loss: empty or ragged batch");
  }
  const bool needs_negative = cfg.objective == DistillObjective::ClFreq;
  if (needs_negative && in.negative.size() != batch) {
    throw std::invalid_argument("layer_framer_loss: missing negatives");
  }

  LayerLossResult out;
  out.record.layer = in.layer;

  if (cfg.objective == DistillObjective::None) {
    out.loss = Tensor::scalar(0.0);
    return out;
  }

  if (cfg.objective == DistillObjective::Mse) {
    Tensor acc;
    for (std::size_t b = 0; b < batch; ++b) {
      Tensor t = cfg.detach_teacher ? in.teacher[b].detach() : in.teacher[b];
      Tensor l = mse(in.student[b], t);
      acc = b == 0 ? l : add(acc, l);
    }
    out.loss = mul_scalar(acc, 1.0 / static_cast<double>(batch));
    out.record.framer = out.loss.value();
    return out;
  }

  // Band decompositions, shared across branches and in-batch negatives.
  std::vector<Tensor> lf_s(batch), hf_s(batch), lf_t(batch), hf_t(batch);
  std::vector<Tensor> lf_n(batch), hf_n(batch), lf_n2(batch), hf_n2(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor t = cfg.detach_teacher ? in.teacher[b].detach() : in.teacher[b];
    lf_s[b] = band_filter(in.student[b], masks, Band::Low);
    hf_s[b] = band_filter(in.student[b], masks, Band::High);
    lf_t[b] = band_filter(t, masks, Band::Low);
    hf_t[b] = band_filter(t, masks, Band::High);
    if (needs_negative) {
      lf_n[b] = band_filter(in.negative[b], masks, Band::Low);
      hf_n[b] = band_filter(in.negative[b], masks, Band::High);
      if (cfg.redraw_per_branch && in.negative_redraw.size() == batch) {
        lf_n2[b] = band_filter(in.negative_redraw[b], masks, Band::Low);
        hf_n2[b] = band_filter(in.negative_redraw[b], masks, Band::High);
      }
    }
  }

  auto branch = [&](BranchKind kind, const std::vector<Tensor>& bands_s,
                    const std::vector<Tensor>& bands_t,
                    const std::vector<Tensor>& bands_n, std::size_t b) {
    switch (kind) {
      case BranchKind::None:
        return Tensor();
      case BranchKind::Intra:
        return intra_cl(bands_s[b], bands_t[b], bands_n[b]);
      case BranchKind::Inter: {
        std::vector<Tensor> others;
        others.reserve(batch - 1);
        for (std::size_t o = 0; o < batch; ++o) {
          if (o != b) others.push_back(bands_s[o]);
        }
        return inter_cl(bands_s[b], bands_t[b], bands_n[b], others);
      }
    }
    return Tensor();
  };

  Tensor acc;
  double intra_sum = 0.0, inter_sum = 0.0;
  LayerModulation mod_sum;
  mod_sum.layer = in.layer;
  mod_sum.w_lf = mod_sum.w_hf = mod_sum.a_lf = mod_sum.a_hf = 0.0;
  mod_sum.gated_lf = mod_sum.gated_hf = 0.0;

  for (std::size_t b = 0; b < batch; ++b) {
    LayerModulation mod = compute_modulation(
        in.layer, in.student[b].values(), in.teacher[b].values(),
        in.student[b].shape()[0], lf_s[b].values(), lf_t[b].values(),
        hf_s[b].values(), hf_t[b].values(), masks, cfg);

    Tensor lf_loss, hf_loss;
    if (cfg.objective == DistillObjective::MseFreq) {
      lf_loss = mse(lf_s[b], lf_t[b]);
      hf_loss = mse(hf_s[b], hf_t[b]);
    } else {
      const bool second = cfg.redraw_per_branch && in.negative_redraw.size() == batch;
      lf_loss = branch(cfg.lf_kind, lf_s, lf_t, lf_n, b);
      hf_loss = branch(cfg.hf_kind, hf_s, hf_t, second ? hf_n2 : hf_n, b);
    }

    Tensor sample_loss = Tensor::scalar(0.0);
    if (lf_loss.defined()) {
      sample_loss = add(sample_loss, mul_scalar(lf_loss, mod.gated_lf));
      if (cfg.lf_kind == BranchKind::Intra) intra_sum += lf_loss.value();
      if (cfg.lf_kind == BranchKind::Inter) inter_sum += lf_loss.value();
    }
    if (hf_loss.defined()) {
      sample_loss = add(sample_loss, mul_scalar(hf_loss, mod.gated_hf));
      if (cfg.hf_kind == BranchKind::Intra) intra_sum += hf_loss.value();
      if (cfg.hf_kind == BranchKind::Inter) inter_sum += hf_loss.value();
    }
    acc = b == 0 ? sample_loss : add(acc, sample_loss);

    mod_sum.w_lf += mod.w_lf;
    mod_sum.w_hf += mod.w_hf;
    mod_sum.a_lf += mod.a_lf;
    mod_sum.a_hf += mod.a_hf;
    mod_sum.gated_lf += mod.gated_lf;
    mod_sum.gated_hf += mod.gated_hf;
    mod_sum.delta_lf += mod.delta_lf;
    mod_sum.delta_hf += mod.delta_hf;
  }

  const double inv = 1.0 / static_cast<double>(batch);
  out.loss = mul_scalar(acc, inv);
  out.record.layer = in.layer;
  out.record.intra = intra_sum * inv;
  out.record.inter = inter_sum * inv;
  out.record.framer = out.loss.value();
  mod_sum.w_lf *= inv;
  mod_sum.w_hf *= inv;
  mod_sum.a_lf *= inv;
  mod_sum.a_hf *= inv;
  mod_sum.gated_lf *= inv;
  mod_sum.gated_hf *= inv;
  mod_sum.delta_lf *= inv;
  mod_sum.delta_hf *= inv;
  out.record.mod = mod_sum;
  return out;
}

TotalLoss total_loss(const Tensor& noise_loss,
                     const std::vector<LayerLossResult>& layer_losses) {
  if (!std::isfinite(noise_loss.value())) {
    throw std::runtime_error("total_loss: non-finite noise loss");
  }
  TotalLoss out;
  out.loss = noise_loss;
  out.breakdown.noise = noise_loss.value();
  for (const LayerLossResult& l : layer_losses) {
    if (!std::isfinite(l.loss.value())) {
      throw std::runtime_error("total_loss: non-finite loss at layer " +
                               std::to_string(l.record.layer));
    }
    out.loss = add(out.loss, l.loss);
    out.breakdown.layers.push_back(l.record);
  }
  out.breakdown.total = out.loss.value();
  return out;
}

}  // namespace framer
