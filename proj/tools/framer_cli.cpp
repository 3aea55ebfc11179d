#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "framer/analysis.hpp"
#include "framer/train.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace framer;

namespace {

constexpr int kExitUsage = 2;

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

int require_seed(const std::optional<std::uint64_t>& seed, const char* cmd) {
  if (!seed.has_value()) {
    std::fprintf(stderr, "error: %s requires --seed for reproducibility\n", cmd);
    return kExitUsage;
  }
  return 0;
}

struct ModelBundle {
  BackboneConfig config;
  Backbone model;
  AdapterSet adapters;
};

ModelBundle load_model(const std::string& checkpoint, std::uint64_t seed) {
  Checkpoint ckpt = load_checkpoint(checkpoint);
  Rng rng(0);
  ModelBundle bundle{ckpt.config, Backbone(ckpt.config, rng), AdapterSet()};
  restore_params(bundle.model.params(), ckpt.params);
  Rng arng(derive_seed(seed, 6));
  bundle.adapters = AdapterSet(bundle.model, arng);
  if (!ckpt.extra_params.empty()) {
    restore_params(bundle.adapters.params(), ckpt.extra_params);
  }
  return bundle;
}

std::vector<std::string> list_images(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = e.path().extension().string();
    if (ext == ".ppm" || ext == ".pgm") files.push_back(e.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              std::optional<std::size_t> steps, std::optional<std::size_t> batch,
              std::optional<std::string> out_dir, std::optional<std::string> data_dir,
              std::size_t log_every) {
  TrainConfig cfg =
      config_path.empty() ? TrainConfig{} : load_train_config(config_path);
  if (int rc = require_seed(seed, "train"); rc != 0) return rc;
  cfg.seed = *seed;
  if (steps) cfg.steps = *steps;
  if (batch) cfg.batch_size = *batch;
  if (out_dir) cfg.out_dir = *out_dir;
  if (data_dir) cfg.data_dir = *data_dir;
  if (log_every > 0) cfg.log_every = log_every;
  TrainResult res = train(cfg);
  std::printf("final_checkpoint %s\n", res.final_checkpoint.c_str());
  std::printf("loss_log %s\n", res.jsonl_path.c_str());
  std::printf("layer_curves %s\n", res.curves_csv.c_str());
  return res.aborted_non_finite ? 1 : 0;
}

int cmd_degrade(const std::string& in_dir, const std::string& out_dir,
                std::optional<std::uint64_t> seed, const std::string& config_path,
                std::optional<std::size_t> scale, std::optional<std::size_t> crop) {
  if (int rc = require_seed(seed, "degrade"); rc != 0) return rc;
  TrainConfig tc =
      config_path.empty() ? TrainConfig{} : load_train_config(config_path);
  DegradationConfig cfg = tc.degradation;
  cfg.crop = crop.value_or(config_path.empty() ? 512 : tc.backbone.image_size);
  if (scale) cfg.scale = *scale;
  cfg.validate();

  fs::create_directories(out_dir);
  nlohmann::ordered_json manifest;
  manifest["seed"] = *seed;
  manifest["scale"] = cfg.scale;
  manifest["crop"] = cfg.crop;
  {
    TrainConfig hash_cfg;
    hash_cfg.degradation = cfg;
    manifest["config_hash"] = fnv1a64(train_config_to_json_text(hash_cfg));
  }
  nlohmann::ordered_json pairs = nlohmann::ordered_json::array();

  const auto files = list_images(in_dir);
  if (files.empty()) {
    std::fprintf(stderr, "error: no .ppm/.pgm images in %s\n", in_dir.c_str());
    return 1;
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    Image img = read_ppm(files[i]);
    if (img.channels == 1) {
      Image rgb(3, img.height, img.width);
      for (std::size_t c = 0; c < 3; ++c)
        std::copy(img.data.begin(), img.data.end(), rgb.data.begin() + c * img.plane());
      img = std::move(rgb);
    }
    PairSample pair = make_pair(img, cfg, derive_seed(*seed, 2, i));
    const std::string stem = fs::path(files[i]).stem().string();
    const std::string hr_name = stem + "_hr.ppm";
    const std::string lr_name = stem + "_lr.ppm";
    const std::string lrup_name = stem + "_lrup.ppm";
    write_ppm(pair.hr, (fs::path(out_dir) / hr_name).string());
    write_ppm(pair.lr, (fs::path(out_dir) / lr_name).string());
    write_ppm(pair.lr_resized, (fs::path(out_dir) / lrup_name).string());
    pairs.push_back({{"source", files[i]},
                     {"hr", hr_name},
                     {"lr", lr_name},
                     {"lr_resized", lrup_name},
                     {"sample_seed", derive_seed(*seed, 2, i)}});
  }
  manifest["pairs"] = pairs;
  std::ofstream os(fs::path(out_dir) / "manifest.json");
  os << manifest.dump(2) << '\n';
  std::printf("wrote %zu pairs to %s\n", files.size(), out_dir.c_str());
  return 0;
}

int cmd_sample(const std::string& checkpoint, const std::string& lr_path,
               std::size_t steps, std::optional<std::uint64_t> seed,
               const std::string& out, const std::string& sampler_name,
               std::size_t T) {
  if (int rc = require_seed(seed, "sample"); rc != 0) return rc;
  ModelBundle bundle = load_model(checkpoint, *seed);
  NoiseSchedule sched = NoiseSchedule::linear(T);
  SampleOptions opt;
  opt.steps = steps;
  opt.seed = *seed;
  opt.sampler = sampler_name == "ddpm" ? SamplerKind::Ddpm : SamplerKind::Ddim;
  Image lr = read_ppm(lr_path);
  Image sr = sample(bundle.model, lr, sched, opt);
  write_ppm(sr, out);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_analyze_layers(const std::string& checkpoint,
                       std::optional<std::uint64_t> seed,
                       const std::vector<int>& ts, std::size_t batch, double r,
                       const std::string& out) {
  if (int rc = require_seed(seed, "analyze-layers"); rc != 0) return rc;
  ModelBundle bundle = load_model(checkpoint, *seed);
  TrainConfig cfg;
  cfg.backbone = bundle.config;
  cfg.seed = *seed;
  cfg.batch_size = batch;
  cfg.mask_radius = r;
  write_layer_curves_csv(
      out, probe_layer_curves(bundle.model, bundle.adapters, cfg, ts));
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_analyze_bands(const std::string& in_dir, std::size_t synthetic_count,
                      std::optional<std::uint64_t> seed, std::size_t size,
                      double r, std::size_t bins, double clip,
                      const std::string& out) {
  std::vector<std::vector<double>> features;
  std::size_t channels = 3;
  std::size_t h = size, w = size;
  if (!in_dir.empty()) {
    for (const auto& f : list_images(in_dir)) {
      Image img = read_ppm(f);
      if (features.empty()) {
        channels = img.channels;
        h = img.height;
        w = img.width;
      } else if (img.channels != channels || img.height != h || img.width != w) {
        std::fprintf(stderr, "error: %s has mixed image shapes\n", in_dir.c_str());
        return 1;
      }
      features.push_back(img.data);
    }
  } else {
    if (int rc = require_seed(seed, "analyze-bands --synthetic"); rc != 0) return rc;
    for (std::size_t i = 0; i < synthetic_count; ++i) {
      Rng rng(derive_seed(*seed, 41, i));
      features.push_back(make_synthetic_image(size, size, rng).data);
    }
  }
  if (features.empty()) {
    std::fprintf(stderr, "error: no input images\n");
    return 1;
  }
  BandMasks masks = make_band_masks(h, w, r);
  BandHistogram hist = band_histogram(features, channels, masks, bins, clip);
  write_band_histogram_csv(hist, out);
  std::printf("wrote %s (lf_mean=%.4f hf_mean=%.4f)\n", out.c_str(),
              hist.lf_value_mean, hist.hf_value_mean);
  return 0;
}

int cmd_analyze_batch(const std::string& checkpoint,
                      std::optional<std::uint64_t> seed, std::size_t layer,
                      int t, std::size_t batch, double r,
                      const std::string& out) {
  if (int rc = require_seed(seed, "analyze-batch"); rc != 0) return rc;
  ModelBundle bundle = load_model(checkpoint, *seed);
  TrainConfig cfg;
  cfg.backbone = bundle.config;
  cfg.seed = *seed;
  cfg.batch_size = batch;
  cfg.mask_radius = r;
  cfg.normalize();

  NoiseSchedule sched = NoiseSchedule::linear(cfg.schedule.T);
  DataSource data(cfg.backbone.image_size, derive_seed(*seed, 1));
  NoGradGuard guard;
  std::vector<Image> hr, lr_up;
  for (std::size_t b = 0; b < batch; ++b) {
    Image img = data.image(b);
    PairSample pair = make_pair(img, cfg.degradation, derive_seed(*seed, 2, b));
    hr.push_back(pair.hr);
    lr_up.push_back(pair.lr_resized);
  }
  auto to_signal = [](const std::vector<Image>& imgs) {
    Tensor ten = stack_images(imgs);
    std::vector<double> v(ten.values().begin(), ten.values().end());
    for (double& x : v) x = 2.0 * x - 1.0;
    return Tensor::from(ten.shape(), std::move(v));
  };
  Tensor z0 = to_signal(hr);
  Rng nrng(derive_seed(*seed, 3));
  Tensor noise = Tensor::randn(z0.shape(), nrng);
  Tensor z_t = q_sample(z0, static_cast<std::size_t>(t), noise, sched);
  ForwardResult fr = bundle.model.forward(
      z_t, std::vector<int>(batch, t), to_signal(lr_up),
      std::vector<std::size_t>(batch, 0), true);
  if (layer < 1 || layer > fr.taps.size()) {
    std::fprintf(stderr, "error: layer %zu outside 1..%zu\n", layer, fr.taps.size());
    return 1;
  }
  Tensor feats = bundle.adapters.adapt(fr.taps[layer - 1]);
  BandMasks masks =
      make_band_masks(feats.shape()[2], feats.shape()[3], r);
  auto lf = cross_sample_matrix(feats, masks, Band::Low);
  auto hf = cross_sample_matrix(feats, masks, Band::High);
  write_simmatrix_csv(out, batch, lf, hf);
  std::printf("wrote %s\n", out.c_str());
  return 0;
}

int cmd_metrics(const std::string& a, const std::string& b, const std::string& out) {
  std::vector<MetricRow> rows;
  if (fs::is_directory(a)) {
    for (const auto& fa : list_images(a)) {
      const auto name = fs::path(fa).filename().string();
      const auto fb = fs::path(b) / name;
      if (!fs::exists(fb)) continue;
      Image ia = read_ppm(fa), ib = read_ppm(fb.string());
      rows.push_back({name, psnr(ia, ib), ssim(ia, ib)});
    }
  } else {
    Image ia = read_ppm(a), ib = read_ppm(b);
    rows.push_back({fs::path(a).filename().string(), psnr(ia, ib), ssim(ia, ib)});
  }
  if (rows.empty()) {
    std::fprintf(stderr, "error: no matching image pairs\n");
    return 1;
  }
  write_metrics_csv(out, rows);
  std::printf("wrote %s (%zu rows)\n", out.c_str(), rows.size());
  return 0;
}

int cmd_ablate(const std::string& config_path, std::optional<std::uint64_t> seed,
               const std::string& out_dir, std::optional<std::size_t> steps,
               std::vector<int> tables) {
  if (int rc = require_seed(seed, "ablate"); rc != 0) return rc;
  TrainConfig cfg =
      config_path.empty() ? TrainConfig{} : load_train_config(config_path);
  cfg.seed = *seed;
  cfg.out_dir = out_dir;
  if (steps) cfg.steps = *steps;
  if (tables.empty()) tables = {5};
  fs::create_directories(out_dir);
  const std::string csv = (fs::path(out_dir) / "ablation.csv").string();
  auto results = run_ablation_suite(cfg, tables, csv);
  std::printf("wrote %s (%zu variants)\n", csv.c_str(), results.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FRAMER toy training and analysis kit"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  std::string config_path, out, in_dir, data_dir_s;
  std::optional<std::string> out_dir_opt, data_dir_opt;
  std::optional<std::size_t> steps_opt, batch_opt, scale_opt, crop_opt;

  auto* train_cmd = app.add_subcommand("train", "run the training loop");
  train_cmd->add_option("--config", config_path, "JSON config file");
  train_cmd->add_option("--seed", seed, "run seed (required)");
  std::optional<std::size_t> t_steps, t_batch;
  std::optional<std::string> t_out, t_data;
  std::size_t t_log = 0;
  train_cmd->add_option("--steps", t_steps, "override step count");
  train_cmd->add_option("--batch", t_batch, "override batch size");
  train_cmd->add_option("--out", t_out, "output directory");
  train_cmd->add_option("--data", t_data, "directory of .ppm images (default synthetic)");
  train_cmd->add_option("--log-every", t_log, "progress print period");

  auto* degrade_cmd = app.add_subcommand("degrade", "build LR/HR pairs");
  std::string d_in, d_out;
  degrade_cmd->add_option("--in", d_in, "input image directory")->required();
  degrade_cmd->add_option("--out", d_out, "output directory")->required();
  degrade_cmd->add_option("--seed", seed, "run seed (required)");
  degrade_cmd->add_option("--config", config_path, "JSON config file");
  degrade_cmd->add_option("--scale", scale_opt, "downscale factor");
  degrade_cmd->add_option("--crop", crop_opt, "HR crop size");

  auto* sample_cmd = app.add_subcommand("sample", "reverse-sample an SR image");
  std::string s_ckpt, s_lr, s_out, s_sampler = "ddim";
  std::size_t s_steps = 50, s_T = 1000;
  sample_cmd->add_option("--checkpoint", s_ckpt)->required();
  sample_cmd->add_option("--lr-image", s_lr)->required();
  sample_cmd->add_option("--steps", s_steps);
  sample_cmd->add_option("--seed", seed, "run seed (required)");
  sample_cmd->add_option("--out", s_out)->required();
  sample_cmd->add_option("--sampler", s_sampler, "ddim|ddpm");
  sample_cmd->add_option("--T", s_T, "schedule length");

  auto* layers_cmd = app.add_subcommand("analyze-layers", "layer-cosine curves");
  std::string l_ckpt, l_out = "layer_curves.csv";
  std::vector<int> l_ts{300, 700};
  std::size_t l_batch = 4;
  double l_r = 0.2;
  layers_cmd->add_option("--checkpoint", l_ckpt)->required();
  layers_cmd->add_option("--seed", seed, "run seed (required)");
  layers_cmd->add_option("--t", l_ts, "probe timesteps");
  layers_cmd->add_option("--batch", l_batch);
  layers_cmd->add_option("--r", l_r, "band mask radius fraction");
  layers_cmd->add_option("--out", l_out);

  auto* bands_cmd = app.add_subcommand("analyze-bands", "band magnitude densities");
  std::string b_in, b_out = "band_hist.csv";
  std::size_t b_n = 100, b_size = 64, b_bins = 64;
  double b_r = 0.2, b_clip = 100.0;
  bands_cmd->add_option("--in", b_in, "image directory (else synthetic)");
  bands_cmd->add_option("--synthetic", b_n, "synthetic image count");
  bands_cmd->add_option("--seed", seed, "seed for synthetic images");
  bands_cmd->add_option("--size", b_size, "synthetic image size");
  bands_cmd->add_option("--r", b_r, "band mask radius fraction");
  bands_cmd->add_option("--bins", b_bins);
  bands_cmd->add_option("--clip", b_clip, "percentile clip for bin edges");
  bands_cmd->add_option("--out", b_out);

  auto* batch_cmd = app.add_subcommand("analyze-batch", "cross-sample similarity");
  std::string x_ckpt, x_out = "simmatrix.csv";
  std::size_t x_layer = 1, x_batch = 8;
  int x_t = 300;
  double x_r = 0.2;
  batch_cmd->add_option("--checkpoint", x_ckpt)->required();
  batch_cmd->add_option("--seed", seed, "run seed (required)");
  batch_cmd->add_option("--layer", x_layer)->required();
  batch_cmd->add_option("--t", x_t);
  batch_cmd->add_option("--batch", x_batch);
  batch_cmd->add_option("--r", x_r);
  batch_cmd->add_option("--out", x_out);

  auto* metrics_cmd = app.add_subcommand("metrics", "PSNR/SSIM between images");
  std::string m_a, m_b, m_out = "metrics.csv";
  metrics_cmd->add_option("--a", m_a, "restored image or directory")->required();
  metrics_cmd->add_option("--b", m_b, "reference image or directory")->required();
  metrics_cmd->add_option("--out", m_out);

  auto* ablate_cmd = app.add_subcommand("ablate", "run ablation variants");
  std::string a_out = "ablations";
  std::vector<int> a_tables;
  std::optional<std::size_t> a_steps;
  ablate_cmd->add_option("--config", config_path, "JSON config file");
  ablate_cmd->add_option("--seed", seed, "run seed (required)");
  ablate_cmd->add_option("--out", a_out, "output directory");
  ablate_cmd->add_option("--steps", a_steps, "steps per variant");
  ablate_cmd->add_option("--tables", a_tables, "ablation tables (2 3 4 5)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      return cmd_train(config_path, seed, t_steps, t_batch, t_out, t_data, t_log);
    }
    if (degrade_cmd->parsed()) {
      return cmd_degrade(d_in, d_out, seed, config_path, scale_opt, crop_opt);
    }
    if (sample_cmd->parsed()) {
      return cmd_sample(s_ckpt, s_lr, s_steps, seed, s_out, s_sampler, s_T);
    }
    if (layers_cmd->parsed()) {
      return cmd_analyze_layers(l_ckpt, seed, l_ts, l_batch, l_r, l_out);
    }
    if (bands_cmd->parsed()) {
      return cmd_analyze_bands(b_in, b_n, seed, b_size, b_r, b_bins, b_clip, b_out);
    }
    if (batch_cmd->parsed()) {
      return cmd_analyze_batch(x_ckpt, seed, x_layer, x_t, x_batch, x_r, x_out);
    }
    if (metrics_cmd->parsed()) {
      return cmd_metrics(m_a, m_b, m_out);
    }
    if (ablate_cmd->parsed()) {
      return cmd_ablate(config_path, seed, a_out, a_steps, a_tables);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
