#include "framer/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "framer/analysis.hpp"
#include "framer/optim.hpp"
#include "json.hpp"

namespace framer {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Stream ids for per-purpose rng derivation; keeping the streams separate
// means toggling the distillation path never perturbs data or noise draws.
enum StreamId : std::uint64_t {
  kStreamData = 1,
  kStreamDegrade = 2,
  kStreamNoise = 3,
  kStreamDraw = 4,
  kStreamInit = 5,
  kStreamAdapters = 6,
  kStreamEval = 7,
};

const char* objective_str(DistillObjective o) {
  switch (o) {
    case DistillObjective::None: return "none";
    case DistillObjective::Mse: return "mse";
    case DistillObjective::MseFreq: return "mse_freq";
    case DistillObjective::ClFreq: return "cl_freq";
  }
  return "cl_freq";
}

DistillObjective objective_from(const std::string& s) {
  if (s == "none") return DistillObjective::None;
  if (s == "mse") return DistillObjective::Mse;
  if (s == "mse_freq") return DistillObjective::MseFreq;
  if (s == "cl_freq") return DistillObjective::ClFreq;
  throw std::runtime_error("unknown objective: " + s);
}

const char* kind_str(BranchKind k) {
  switch (k) {
    case BranchKind::None: return "none";
    case BranchKind::Intra: return "intra";
    case BranchKind::Inter: return "inter";
  }
  return "none";
}

BranchKind kind_from(const std::string& s) {
  if (s == "none") return BranchKind::None;
  if (s == "intra") return BranchKind::Intra;
  if (s == "inter") return BranchKind::Inter;
  throw std::runtime_error("unknown branch kind: " + s);
}

const char* teacher_str(TeacherSelect t) {
  switch (t) {
    case TeacherSelect::Final: return "final";
    case TeacherSelect::FinalMinus1: return "final-1";
    case TeacherSelect::FinalMinus2: return "final-2";
    case TeacherSelect::Random: return "random";
  }
  return "final";
}

TeacherSelect teacher_from(const std::string& s) {
  if (s == "final") return TeacherSelect::Final;
  if (s == "final-1") return TeacherSelect::FinalMinus1;
  if (s == "final-2") return TeacherSelect::FinalMinus2;
  if (s == "random") return TeacherSelect::Random;
  throw std::runtime_error("unknown teacher selection: " + s);
}

const char* negative_str(NegativeSelect n) {
  return n == NegativeSelect::RandomLayer ? "random_layer" : "previous_layer";
}

NegativeSelect negative_from(const std::string& s) {
  if (s == "random_layer") return NegativeSelect::RandomLayer;
  if (s == "previous_layer") return NegativeSelect::PreviousLayer;
  throw std::runtime_error("unknown negative selection: " + s);
}

const char* resize_kernel_str(ResizeKernel k) {
  switch (k) {
    case ResizeKernel::Bilinear: return "bilinear";
    case ResizeKernel::Bicubic: return "bicubic";
    case ResizeKernel::Area: return "area";
  }
  return "area";
}

ResizeKernel resize_kernel_from(const std::string& s) {
  if (s == "bilinear") return ResizeKernel::Bilinear;
  if (s == "bicubic") return ResizeKernel::Bicubic;
  if (s == "area") return ResizeKernel::Area;
  throw std::runtime_error("unknown resize kernel: " + s);
}

const char* kernel_kind_str(KernelKind k) {
  switch (k) {
    case KernelKind::Iso: return "iso";
    case KernelKind::Aniso: return "aniso";
    case KernelKind::GeneralizedIso: return "generalized_iso";
    case KernelKind::GeneralizedAniso: return "generalized_aniso";
    case KernelKind::PlateauIso: return "plateau_iso";
    case KernelKind::PlateauAniso: return "plateau_aniso";
  }
  return "iso";
}

KernelKind kernel_kind_from(const std::string& s) {
  if (s == "iso") return KernelKind::Iso;
  if (s == "aniso") return KernelKind::Aniso;
  if (s == "generalized_iso") return KernelKind::GeneralizedIso;
  if (s == "generalized_aniso") return KernelKind::GeneralizedAniso;
  if (s == "plateau_iso") return KernelKind::PlateauIso;
  if (s == "plateau_aniso") return KernelKind::PlateauAniso;
  throw std::runtime_error("unknown kernel kind: " + s);
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void range_from(const json& j, const char* key, double& lo, double& hi) {
  if (!j.contains(key)) return;
  const auto& r = j.at(key);
  lo = r.at(0).get<double>();
  hi = r.at(1).get<double>();
}

ordered_json stage_to_json(const StageConfig& s) {
  ordered_json j;
  j["kernel_size"] = s.kernel_size;
  j["blur_prob"] = s.blur_prob;
  j["blur_sigma"] = {s.blur_sigma_lo, s.blur_sigma_hi};
  ordered_json kinds = ordered_json::array();
  for (auto k : s.kernel_kinds) kinds.push_back(kernel_kind_str(k));
  j["kernel_kinds"] = kinds;
  j["sinc_prob"] = s.sinc_prob;
  j["betag"] = {s.betag_lo, s.betag_hi};
  j["betap"] = {s.betap_lo, s.betap_hi};
  j["resize"] = {s.resize_lo, s.resize_hi};
  j["up_prob"] = s.up_prob;
  j["down_prob"] = s.down_prob;
  j["noise_prob"] = s.noise_prob;
  j["gauss_prob"] = s.gauss_prob;
  j["gauss_sigma"] = {s.gauss_sigma_lo, s.gauss_sigma_hi};
  j["poisson_scale"] = {s.poisson_lo, s.poisson_hi};
  j["jpeg_prob"] = s.jpeg_prob;
  j["jpeg_quality"] = {s.jpeg_lo, s.jpeg_hi};
  return j;
}

void stage_from_json(const json& j, StageConfig& s) {
  maybe(j, "kernel_size", s.kernel_size);
  maybe(j, "blur_prob", s.blur_prob);
  range_from(j, "blur_sigma", s.blur_sigma_lo, s.blur_sigma_hi);
  if (j.contains("kernel_kinds")) {
    s.kernel_kinds.clear();
    for (const auto& k : j.at("kernel_kinds")) {
      s.kernel_kinds.push_back(kernel_kind_from(k.get<std::string>()));
    }
  }
  maybe(j, "sinc_prob", s.sinc_prob);
  range_from(j, "betag", s.betag_lo, s.betag_hi);
  range_from(j, "betap", s.betap_lo, s.betap_hi);
  range_from(j, "resize", s.resize_lo, s.resize_hi);
  maybe(j, "up_prob", s.up_prob);
  maybe(j, "down_prob", s.down_prob);
  maybe(j, "noise_prob", s.noise_prob);
  maybe(j, "gauss_prob", s.gauss_prob);
  range_from(j, "gauss_sigma", s.gauss_sigma_lo, s.gauss_sigma_hi);
  range_from(j, "poisson_scale", s.poisson_lo, s.poisson_hi);
  maybe(j, "jpeg_prob", s.jpeg_prob);
  if (j.contains("jpeg_quality")) {
    s.jpeg_lo = j.at("jpeg_quality").at(0).get<int>();
    s.jpeg_hi = j.at("jpeg_quality").at(1).get<int>();
  }
}

}  // namespace

void TrainConfig::normalize() {
  degradation.crop = backbone.image_size;
  backbone.validate();
  degradation.validate();
  if (batch_size == 0 || steps == 0) {
    throw std::invalid_argument("train config: batch_size and steps must be positive");
  }
  if (!(mask_radius > 0.0 && mask_radius < 1.0)) {
    throw std::invalid_argument("train config: mask_radius outside (0,1)");
  }
  if (schedule.T == 0) throw std::invalid_argument("train config: T == 0");
}

TrainConfig train_config_from_json_text(const std::string& text) {
  TrainConfig cfg;
  const json j = json::parse(text);
  if (j.contains("backbone")) {
    const auto& b = j.at("backbone");
    std::string kind = "dit-like";
    maybe(b, "kind", kind);
    cfg.backbone.kind =
        kind == "unet-like" ? BackboneKind::UnetLike : BackboneKind::DitLike;
    maybe(b, "n_layers", cfg.backbone.n_layers);
    maybe(b, "base_channels", cfg.backbone.base_channels);
    maybe(b, "image_size", cfg.backbone.image_size);
    maybe(b, "cond_width", cfg.backbone.cond_width);
    maybe(b, "n_classes", cfg.backbone.n_classes);
    maybe(b, "time_embed_dim", cfg.backbone.time_embed_dim);
  }
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    maybe(s, "T", cfg.schedule.T);
    maybe(s, "beta_start", cfg.schedule.beta_start);
    maybe(s, "beta_end", cfg.schedule.beta_end);
  }
  if (j.contains("degradation")) {
    const auto& d = j.at("degradation");
    if (d.contains("stage1")) stage_from_json(d.at("stage1"), cfg.degradation.stage1);
    if (d.contains("stage2")) stage_from_json(d.at("stage2"), cfg.degradation.stage2);
    maybe(d, "final_sinc_prob", cfg.degradation.final_sinc_prob);
    maybe(d, "final_sinc_kernel_size", cfg.degradation.final_sinc_kernel_size);
    maybe(d, "scale", cfg.degradation.scale);
    if (d.contains("final_downscale")) {
      cfg.degradation.final_downscale =
          resize_kernel_from(d.at("final_downscale").get<std::string>());
    }
    if (d.contains("lr_upscale")) {
      cfg.degradation.lr_upscale =
          resize_kernel_from(d.at("lr_upscale").get<std::string>());
    }
  }
  maybe(j, "mask_radius", cfg.mask_radius);
  if (j.contains("framer")) {
    const auto& f = j.at("framer");
    maybe(f, "use_framer", cfg.use_framer);
    if (f.contains("objective")) {
      cfg.loss.objective = objective_from(f.at("objective").get<std::string>());
    }
    if (f.contains("lf_kind")) cfg.loss.lf_kind = kind_from(f.at("lf_kind"));
    if (f.contains("hf_kind")) cfg.loss.hf_kind = kind_from(f.at("hf_kind"));
    maybe(f, "use_faw", cfg.loss.use_faw);
    maybe(f, "use_fam", cfg.loss.use_fam);
    maybe(f, "detach_teacher", cfg.loss.detach_teacher);
    maybe(f, "redraw_per_branch", cfg.loss.redraw_per_branch);
    if (f.contains("teacher")) {
      cfg.loss.teacher_select = teacher_from(f.at("teacher").get<std::string>());
    }
    if (f.contains("negative")) {
      cfg.loss.negative_select = negative_from(f.at("negative").get<std::string>());
    }
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    maybe(t, "batch_size", cfg.batch_size);
    maybe(t, "steps", cfg.steps);
    maybe(t, "lr", cfg.lr);
    maybe(t, "seed", cfg.seed);
    maybe(t, "out_dir", cfg.out_dir);
    maybe(t, "data_dir", cfg.data_dir);
    maybe(t, "checkpoint_every", cfg.checkpoint_every);
    maybe(t, "log_every", cfg.log_every);
  }
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path);
  std::string text((std::istreambuf_iterator<char>(is)),
                   std::istreambuf_iterator<char>());
  return train_config_from_json_text(text);
}

std::string train_config_to_json_text(const TrainConfig& cfg) {
  ordered_json j;
  j["backbone"] = {
      {"kind", cfg.backbone.kind == BackboneKind::UnetLike ? "unet-like" : "dit-like"},
      {"n_layers", cfg.backbone.n_layers},
      {"base_channels", cfg.backbone.base_channels},
      {"image_size", cfg.backbone.image_size},
      {"cond_width", cfg.backbone.cond_width},
      {"n_classes", cfg.backbone.n_classes},
      {"time_embed_dim", cfg.backbone.time_embed_dim}};
  j["schedule"] = {{"T", cfg.schedule.T},
                   {"beta_start", cfg.schedule.beta_start},
                   {"beta_end", cfg.schedule.beta_end}};
  j["degradation"] = {{"stage1", stage_to_json(cfg.degradation.stage1)},
                      {"stage2", stage_to_json(cfg.degradation.stage2)},
                      {"final_sinc_prob", cfg.degradation.final_sinc_prob},
                      {"final_sinc_kernel_size", cfg.degradation.final_sinc_kernel_size},
                      {"scale", cfg.degradation.scale},
                      {"final_downscale", resize_kernel_str(cfg.degradation.final_downscale)},
                      {"lr_upscale", resize_kernel_str(cfg.degradation.lr_upscale)}};
  j["mask_radius"] = cfg.mask_radius;
  j["framer"] = {{"use_framer", cfg.use_framer},
                 {"objective", objective_str(cfg.loss.objective)},
                 {"lf_kind", kind_str(cfg.loss.lf_kind)},
                 {"hf_kind", kind_str(cfg.loss.hf_kind)},
                 {"use_faw", cfg.loss.use_faw},
                 {"use_fam", cfg.loss.use_fam},
                 {"teacher", teacher_str(cfg.loss.teacher_select)},
                 {"negative", negative_str(cfg.loss.negative_select)},
                 {"detach_teacher", cfg.loss.detach_teacher},
                 {"redraw_per_branch", cfg.loss.redraw_per_branch}};
  j["train"] = {{"batch_size", cfg.batch_size},
                {"steps", cfg.steps},
                {"lr", cfg.lr},
                {"seed", cfg.seed},
                {"out_dir", cfg.out_dir},
                {"data_dir", cfg.data_dir},
                {"checkpoint_every", cfg.checkpoint_every},
                {"log_every", cfg.log_every}};
  return j.dump(2);
}

namespace {

struct Batch {
  std::vector<Image> hr;
  std::vector<Image> lr_up;
};

Batch assemble_batch(const DataSource& data, const DegradationConfig& deg,
                     std::uint64_t seed, std::size_t step, std::size_t batch) {
  Batch out;
  out.hr.reserve(batch);
  out.lr_up.reserve(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t idx = (step - 1) * batch + b;
    Image hr = data.image(idx);
    PairSample pair = make_pair(hr, deg, derive_seed(seed, kStreamDegrade, step, b));
    out.hr.push_back(std::move(pair.hr));
    out.lr_up.push_back(std::move(pair.lr_resized));
  }
  return out;
}

Tensor to_signal(const std::vector<Image>& imgs) {
  Tensor t = stack_images(imgs);
  std::vector<double> v(t.values().begin(), t.values().end());
  for (double& x : v) x = 2.0 * x - 1.0;
  return Tensor::from(t.shape(), std::move(v));
}

}  // namespace

// Chooses the negative layer index for the previous-layer ablation. The
// first student has no previous layer, so it falls back to the closest
// later non-teacher layer.
static std::size_t previous_layer_negative(std::size_t i, std::size_t n,
                                           std::size_t teacher) {
  if (i >= 2 && i - 1 != teacher) return i - 1;
  for (std::size_t j = 1; j <= n; ++j) {
    if (j != i && j != teacher) return j;
  }
  throw std::invalid_argument("previous_layer_negative: no candidate layer");
}

TrainResult train(const TrainConfig& raw_cfg) {
  TrainConfig cfg = raw_cfg;
  cfg.normalize();
  fs::create_directories(cfg.out_dir);

  NoiseSchedule sched =
      NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_start, cfg.schedule.beta_end);
  DataSource data = cfg.data_dir.empty()
                        ? DataSource(cfg.backbone.image_size,
                                     derive_seed(cfg.seed, kStreamData))
                        : DataSource(cfg.data_dir, cfg.backbone.image_size,
                                     derive_seed(cfg.seed, kStreamData));

  Rng init_rng(derive_seed(cfg.seed, kStreamInit));
  Backbone model(cfg.backbone, init_rng);
  Rng adapter_rng(derive_seed(cfg.seed, kStreamAdapters));
  AdapterSet adapters(model, adapter_rng);

  Rng noise_rng(derive_seed(cfg.seed, kStreamNoise));
  Rng draw_rng(derive_seed(cfg.seed, kStreamDraw));

  Adam opt(&model.params(), cfg.lr);
  if (cfg.use_framer) opt.add_params(&adapters.params());

  BandMasks masks = make_band_masks(model.tap_shape(model.num_taps())[1],
                                    model.tap_shape(model.num_taps())[2],
                                    cfg.mask_radius);

  TrainResult result;
  result.jsonl_path = (fs::path(cfg.out_dir) / "loss.jsonl").string();
  std::ofstream jsonl(result.jsonl_path);
  if (!jsonl) throw std::runtime_error("cannot open " + result.jsonl_path);

  const std::size_t n = model.num_taps();
  std::vector<std::string> kept_checkpoints;

  auto save_ckpt = [&](const std::string& name) {
    const std::string path = (fs::path(cfg.out_dir) / name).string();
    save_checkpoint(path, cfg.backbone, model.params(), adapters.params());
    return path;
  };

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    Batch batch = assemble_batch(data, cfg.degradation, cfg.seed, step, cfg.batch_size);
    Tensor z0 = to_signal(batch.hr);
    Tensor lr_cond = to_signal(batch.lr_up);

    std::vector<std::size_t> ts(cfg.batch_size);
    std::vector<int> ts_int(cfg.batch_size);
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      ts[b] = 1 + noise_rng.below(sched.T);
      ts_int[b] = static_cast<int>(ts[b]);
    }
    Tensor noise = Tensor::randn(z0.shape(), noise_rng);
    Tensor z_t = q_sample_batch(z0, ts, noise, sched);

    ForwardResult fr = model.forward(
        z_t, ts_int, lr_cond, std::vector<std::size_t>(cfg.batch_size, 0),
        cfg.use_framer);
    Tensor mse = noise_loss(fr.eps, noise);

    std::vector<LayerLossResult> layer_losses;
    if (cfg.use_framer && cfg.loss.objective != DistillObjective::None) {
      std::size_t teacher = n;
      switch (cfg.loss.teacher_select) {
        case TeacherSelect::Final: teacher = n; break;
        case TeacherSelect::FinalMinus1: teacher = n - 1; break;
        case TeacherSelect::FinalMinus2: teacher = n - 2; break;
        case TeacherSelect::Random: teacher = 1 + draw_rng.below(n); break;
      }

      const Tensor& teacher_tap = fr.taps[teacher - 1].feature;
      std::vector<Tensor> teacher_slices(cfg.batch_size);
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        teacher_slices[b] =
            adapters.adapt_slice(teacher, slice_batch(teacher_tap, b));
      }

      for (std::size_t i = 1; i <= n; ++i) {
        if (i == teacher) continue;
        LayerLossInputs inputs;
        inputs.layer = i;
        inputs.student.resize(cfg.batch_size);
        inputs.teacher = teacher_slices;
        const bool contrastive = cfg.loss.objective == DistillObjective::ClFreq;
        if (contrastive) inputs.negative.resize(cfg.batch_size);
        if (contrastive && cfg.loss.redraw_per_branch) {
          inputs.negative_redraw.resize(cfg.batch_size);
        }
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
          inputs.student[b] =
              adapters.adapt_slice(i, slice_batch(fr.taps[i - 1].feature, b));
          if (!contrastive) continue;
          std::size_t j;
          if (cfg.loss.negative_select == NegativeSelect::PreviousLayer) {
            j = previous_layer_negative(i, n, teacher);
          } else {
            j = draw_negative_layer(i, n, teacher, draw_rng).negative;
          }
          inputs.negative[b] =
              adapters.adapt_slice(j, slice_batch(fr.taps[j - 1].feature, b));
          if (cfg.loss.redraw_per_branch) {
            const std::size_t j2 =
                cfg.loss.negative_select == NegativeSelect::PreviousLayer
                    ? j
                    : draw_negative_layer(i, n, teacher, draw_rng).negative;
            inputs.negative_redraw[b] =
                adapters.adapt_slice(j2, slice_batch(fr.taps[j2 - 1].feature, b));
          }
        }
        layer_losses.push_back(layer_framer_loss(inputs, masks, cfg.loss));
      }
    }

    TotalLoss total = [&]() {
      try {
        return total_loss(mse, layer_losses);
      } catch (const std::exception& e) {
        std::fprintf(stderr, "framer: aborting at step %zu: %s\n", step, e.what());
        result.aborted_non_finite = true;
        throw;
      }
    }();

    total.loss.backward();
    opt.step();
    opt.zero_grad();

    result.noise_history.push_back(total.breakdown.noise);
    result.total_history.push_back(total.breakdown.total);

    ordered_json line;
    line["step"] = step;
    line["noise"] = total.breakdown.noise;
    ordered_json per_layer = ordered_json::array();
    for (const auto& rec : total.breakdown.layers) {
      per_layer.push_back({{"i", rec.layer},
                           {"intra", rec.intra},
                           {"inter", rec.inter},
                           {"w_lf", rec.mod.w_lf},
                           {"w_hf", rec.mod.w_hf},
                           {"a_lf", rec.mod.a_lf},
                           {"a_hf", rec.mod.a_hf},
                           {"framer", rec.framer}});
    }
    line["per_layer"] = per_layer;
    line["total"] = total.breakdown.total;
    jsonl << line.dump() << '\n';

    if (cfg.log_every > 0 && step % cfg.log_every == 0) {
      std::fprintf(stderr, "step %zu/%zu noise=%.6f total=%.6f\n", step,
                   cfg.steps, total.breakdown.noise, total.breakdown.total);
    }

    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0) {
      kept_checkpoints.push_back(save_ckpt("ckpt_" + std::to_string(step) + ".bin"));
      while (kept_checkpoints.size() > 2) {
        fs::remove(kept_checkpoints.front());
        kept_checkpoints.erase(kept_checkpoints.begin());
      }
    }
  }
  jsonl.close();

  result.final_checkpoint = save_ckpt("ckpt_final.bin");

  // Final layer-cosine diagnostics on a held-out batch.
  result.curves_csv = (fs::path(cfg.out_dir) / "layer_curves.csv").string();
  write_layer_curves_csv(result.curves_csv,
                         probe_layer_curves(model, adapters, cfg, {300, 700}));
  return result;
}

std::vector<std::pair<int, std::vector<LayerCosineRow>>> probe_layer_curves(
    const Backbone& model, const AdapterSet& adapters, const TrainConfig& cfg,
    const std::vector<int>& probe_ts) {
  TrainConfig c = cfg;
  c.normalize();
  NoiseSchedule sched =
      NoiseSchedule::linear(c.schedule.T, c.schedule.beta_start, c.schedule.beta_end);
  DataSource data = c.data_dir.empty()
                        ? DataSource(c.backbone.image_size,
                                     derive_seed(c.seed, kStreamData))
                        : DataSource(c.data_dir, c.backbone.image_size,
                                     derive_seed(c.seed, kStreamData));
  Batch eval = assemble_batch(data, c.degradation,
                              derive_seed(c.seed, kStreamEval), 1, c.batch_size);
  BandMasks masks = make_band_masks(model.tap_shape(model.num_taps())[1],
                                    model.tap_shape(model.num_taps())[2],
                                    c.mask_radius);
  std::vector<std::pair<int, std::vector<LayerCosineRow>>> curves;
  for (int t : probe_ts) {
    LayerCurveRequest req;
    req.t = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(t), sched.T));
    req.noise_seed = derive_seed(c.seed, kStreamEval, 99, t);
    curves.emplace_back(req.t, layer_cosine_curve(model, adapters, eval.hr,
                                                  eval.lr_up, sched, req, masks));
  }
  return curves;
}

MidLayerCosines mid_layer_cosines(const Backbone& model,
                                  const AdapterSet& adapters,
                                  const TrainConfig& cfg, double depth_lo,
                                  double depth_hi,
                                  const std::vector<int>& probe_ts) {
  MidLayerCosines out;
  std::size_t count = 0;
  for (const auto& [t, rows] : probe_layer_curves(model, adapters, cfg, probe_ts)) {
    for (const auto& r : rows) {
      if (r.depth >= depth_lo && r.depth <= depth_hi &&
          r.layer != model.teacher_index()) {
        out.lf += r.cos_lf;
        out.hf += r.cos_hf;
        ++count;
      }
    }
  }
  if (count > 0) {
    out.lf /= static_cast<double>(count);
    out.hf /= static_cast<double>(count);
  }
  return out;
}

std::vector<AblationRow> ablation_rows(const TrainConfig& base,
                                       const std::vector<int>& tables) {
  std::vector<AblationRow> rows;
  auto with = [&](const std::string& table, const std::string& name,
                  auto&& patch) {
    TrainConfig c = base;
    patch(c);
    rows.push_back({table, name, std::move(c)});
  };
  auto cl_only = [](TrainConfig& c) {
    c.use_framer = true;
    c.loss = LossConfig{};
    c.loss.use_faw = false;
    c.loss.use_fam = false;
  };

  for (int table : tables) {
    switch (table) {
      case 2:
        with("2", "baseline", [](TrainConfig& c) { c.use_framer = false; });
        with("2", "mse_distill", [&](TrainConfig& c) {
          cl_only(c);
          c.loss.objective = DistillObjective::Mse;
        });
        with("2", "mse_freq_distill", [&](TrainConfig& c) {
          cl_only(c);
          c.loss.objective = DistillObjective::MseFreq;
        });
        with("2", "cl_freq_distill", cl_only);
        break;
      case 3:
        with("3", "teacher_random", [&](TrainConfig& c) {
          cl_only(c);
          c.loss.teacher_select = TeacherSelect::Random;
        });
        with("3", "teacher_final_minus1", [&](TrainConfig& c) {
          cl_only(c);
          c.loss.teacher_select = TeacherSelect::FinalMinus1;
        });
        with("3", "teacher_final_minus2", [&](TrainConfig& c) {
          cl_only(c);
          c.loss.teacher_select = TeacherSelect::FinalMinus2;
        });
        with("3", "negative_previous_layer", [&](TrainConfig& c) {
          cl_only(c);
          c.loss.negative_select = NegativeSelect::PreviousLayer;
        });
        with("3", "final_teacher_random_negative", cl_only);
        break;
      case 4: {
        struct V {
          const char* name;
          BranchKind lf, hf;
        };
        const V variants[] = {
            {"A_intra_lf", BranchKind::Intra, BranchKind::None},
            {"B_inter_lf", BranchKind::Inter, BranchKind::None},
            {"C_intra_hf", BranchKind::None, BranchKind::Intra},
            {"D_inter_hf", BranchKind::None, BranchKind::Inter},
            {"E_inter_lf_intra_hf", BranchKind::Inter, BranchKind::Intra},
            {"F_inter_both", BranchKind::Inter, BranchKind::Inter},
            {"G_intra_both", BranchKind::Intra, BranchKind::Intra},
            {"H_intra_lf_inter_hf", BranchKind::Intra, BranchKind::Inter},
        };
        for (const auto& v : variants) {
          with("4", v.name, [&](TrainConfig& c) {
            cl_only(c);
            c.loss.lf_kind = v.lf;
            c.loss.hf_kind = v.hf;
          });
        }
        break;
      }
      case 5:
        with("5", "baseline", [](TrainConfig& c) { c.use_framer = false; });
        with("5", "cl_only", cl_only);
        with("5", "faw_only", [&](TrainConfig& c) {
          cl_only(c);
          c.loss.use_faw = true;
        });
        with("5", "fam_only", [&](TrainConfig& c) {
          cl_only(c);
          c.loss.use_fam = true;
        });
        with("5", "faw_fam", [](TrainConfig& c) {
          c.use_framer = true;
          c.loss = LossConfig{};
        });
        break;
      default:
        throw std::invalid_argument("ablation_rows: unknown table " +
                                    std::to_string(table));
    }
  }
  return rows;
}

std::vector<AblationResult> run_ablation_suite(const TrainConfig& base,
                                               const std::vector<int>& tables,
                                               const std::string& out_csv) {
  std::vector<AblationResult> results;
  for (const AblationRow& row : ablation_rows(base, tables)) {
    TrainConfig cfg = row.config;
    cfg.out_dir = (fs::path(base.out_dir) /
                   ("table" + row.table + "_" + row.name)).string();
    TrainResult tr = train(cfg);

    AblationResult res;
    res.table = row.table;
    res.name = row.name;
    res.final_noise = tr.noise_history.empty() ? 0.0 : tr.noise_history.back();

    Checkpoint ckpt = load_checkpoint(tr.final_checkpoint);
    Rng rng(0);
    Backbone model(ckpt.config, rng);
    restore_params(model.params(), ckpt.params);
    Rng arng(derive_seed(cfg.seed, kStreamAdapters));
    AdapterSet adapters(model, arng);
    if (!ckpt.extra_params.empty()) {
      restore_params(adapters.params(), ckpt.extra_params);
    }

    MidLayerCosines mid =
        mid_layer_cosines(model, adapters, cfg, 0.4, 0.8, {300, 700});
    res.mid_cos_lf = mid.lf;
    res.mid_cos_hf = mid.hf;

    // Held-out SR metrics with a short deterministic sampler.
    NoiseSchedule sched = NoiseSchedule::linear(cfg.schedule.T, cfg.schedule.beta_start,
                                                cfg.schedule.beta_end);
    DataSource data = cfg.data_dir.empty()
                          ? DataSource(cfg.backbone.image_size,
                                       derive_seed(base.seed, kStreamEval, 1234))
                          : DataSource(cfg.data_dir, cfg.backbone.image_size,
                                       derive_seed(base.seed, kStreamEval, 1234));
    DegradationConfig deg = cfg.degradation;
    deg.crop = cfg.backbone.image_size;
    double psnr_acc = 0.0, ssim_acc = 0.0;
    const std::size_t eval_n = 4;
    for (std::size_t i = 0; i < eval_n; ++i) {
      Image hr = data.image(i);
      PairSample pair = make_pair(hr, deg, derive_seed(base.seed, kStreamEval, 77, i));
      SampleOptions opt;
      opt.steps = std::min<std::size_t>(10, sched.T);
      opt.seed = derive_seed(base.seed, kStreamEval, 88, i);
      Image sr = sample(model, pair.lr, sched, opt);
      psnr_acc += psnr(sr, pair.hr);
      ssim_acc += ssim(sr, pair.hr);
    }
    res.psnr = psnr_acc / static_cast<double>(eval_n);
    res.ssim = ssim_acc / static_cast<double>(eval_n);
    results.push_back(res);
  }

  std::ofstream os(out_csv);
  if (!os) throw std::runtime_error("cannot open " + out_csv);
  os.precision(12);
  os << "table,variant,final_noise,mid_cos_lf,mid_cos_hf,psnr,ssim\n";
  for (const auto& r : results) {
    os << r.table << ',' << r.name << ',' << r.final_noise << ','
       << r.mid_cos_lf << ',' << r.mid_cos_hf << ',' << r.psnr << ','
       << r.ssim << '\n';
  }
  return results;
}

}  // namespace framer
