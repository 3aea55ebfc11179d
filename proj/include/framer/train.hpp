#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "framer/analysis.hpp"
#include "framer/backbone.hpp"
#include "framer/degrade.hpp"
#include "framer/diffusion.hpp"
#include "framer/loss.hpp"
#include "framer/synth.hpp"

namespace framer {

struct ScheduleConfig {
  std::size_t T = 1000;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
};

struct TrainConfig {
  BackboneConfig backbone;
  ScheduleConfig schedule;
  DegradationConfig degradation;  // crop is forced to backbone.image_size
  double mask_radius = 0.2;
  bool use_framer = true;
  LossConfig loss;
  std::size_t batch_size = 4;
  std::size_t steps = 200;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  std::string out_dir = "run";
  std::string data_dir;  // empty -> built-in synthetic generator
  std::size_t checkpoint_every = 100;  // last two checkpoints retained
  std::size_t log_every = 0;           // 0 = silent

  void normalize();  // clamps degradation.crop to the image size, validates
};

// JSON round trip; missing keys keep their defaults.
TrainConfig train_config_from_json_text(const std::string& text);
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json_text(const TrainConfig& cfg);

struct TrainResult {
  std::vector<double> noise_history;
  std::vector<double> total_history;
  std::string jsonl_path;
  std::string final_checkpoint;
  std::string curves_csv;
  bool aborted_non_finite = false;
};

// The training loop: degrade -> forward -> taps -> band decomposition ->
// losses -> modulation -> total -> Adam step. Writes a JSONL loss log,
// periodic checkpoints, and a final layer-cosine CSV.
TrainResult train(const TrainConfig& cfg);

struct AblationRow {
  std::string table;
  std::string name;
  TrainConfig config;
};

// Every ablation table row expressed as a config patch of `base`.
// Tables: 2 = distillation objective, 3 = teacher/negative selection,
// 4 = band-assignment variants A..H, 5 = FAW/FAM toggles.
std::vector<AblationRow> ablation_rows(const TrainConfig& base,
                                       const std::vector<int>& tables);

struct AblationResult {
  std::string table;
  std::string name;
  double final_noise = 0.0;
  double mid_cos_lf = 0.0;  // mean over depth 0.4..0.8 and both probe t's
  double mid_cos_hf = 0.0;
  double psnr = 0.0;  // DDIM-sampled SR vs HR on a held-out toy set
  double ssim = 0.0;
};

std::vector<AblationResult> run_ablation_suite(const TrainConfig& base,
                                               const std::vector<int>& tables,
                                               const std::string& out_csv);

// Layer-cosine curves on a held-out batch derived from cfg.seed, one curve
// per probe timestep.
std::vector<std::pair<int, std::vector<LayerCosineRow>>> probe_layer_curves(
    const Backbone& model, const AdapterSet& adapters, const TrainConfig& cfg,
    const std::vector<int>& probe_ts);

// Mean layer-cosine over normalized depths in [lo, hi] at the probe
// timesteps, teacher row excluded.
struct MidLayerCosines {
  double lf = 0.0;
  double hf = 0.0;
};
MidLayerCosines mid_layer_cosines(const Backbone& model,
                                  const AdapterSet& adapters,
                                  const TrainConfig& cfg, double depth_lo,
                                  double depth_hi,
                                  const std::vector<int>& probe_ts);

}  // namespace framer
