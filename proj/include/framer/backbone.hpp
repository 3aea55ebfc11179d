#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "framer/ops.hpp"
#include "framer/rng.hpp"
#include "framer/tensor.hpp"

namespace framer {

enum class BackboneKind { DitLike, UnetLike };

struct BackboneConfig {
  BackboneKind kind = BackboneKind::DitLike;
  std::size_t n_layers = 8;     // tap count for dit-like; unet-like derives its own
  std::size_t base_channels = 16;
  std::size_t image_size = 32;
  std::size_t in_channels = 3;  // image channels; LR conditioning doubles the input
  std::size_t cond_width = 16;
  std::size_t n_classes = 1;
  std::size_t time_embed_dim = 64;

  void validate() const;
};

// Observation of one block's output. Taps never alter the forward
// computation; collecting them is optional.
struct FeatureTap {
  std::size_t index = 0;  // 1-based
  Tensor feature;         // [B,C,H,W]
  bool is_teacher = false;
  double depth = 0.0;  // index / n
};

struct ForwardResult {
  Tensor eps;  // same shape as the noisy input
  std::vector<FeatureTap> taps;
};

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Two toy denoisers with per-block feature taps: a constant-resolution
// residual stack and an encoder-decoder whose tap shapes vary across depth.
class Backbone {
 public:
  Backbone(const BackboneConfig& cfg, Rng& rng);

  const BackboneConfig& config() const { return cfg_; }
  std::size_t num_taps() const;
  std::size_t teacher_index() const { return num_taps(); }

  // Shape of tap i's feature as [C,H,W] (batch excluded).
  Shape tap_shape(std::size_t index) const;

  // z_t [B,in,H,W], per-sample timesteps, lr conditioning [B,in,H,W]
  // (already resized to the target size), class ids for the learned
  // conditioning vector.
  ForwardResult forward(const Tensor& z_t, const std::vector<int>& t,
                        const Tensor& lr_cond,
                        const std::vector<std::size_t>& class_ids,
                        bool collect_taps) const;

  std::vector<NamedParam>& params() { return params_; }
  const std::vector<NamedParam>& params() const { return params_; }

 private:
  Tensor param(const std::string& name, Shape shape, Rng& rng, double scale);
  Tensor find(const std::string& name) const;
  Tensor time_cond_bias(std::size_t batch, const std::vector<int>& t,
                        const std::vector<std::size_t>& class_ids) const;
  ForwardResult forward_dit(const Tensor& x, const Tensor& bias,
                            bool collect_taps) const;
  ForwardResult forward_unet(const Tensor& x, const Tensor& bias,
                             bool collect_taps) const;

  BackboneConfig cfg_;
  std::vector<NamedParam> params_;
};

std::size_t count_params(const BackboneConfig& cfg);

// Learned 1x1 conv + bilinear resize that maps a tap onto the teacher's
// [C,H,W]. Taps that already match pass through untouched. The adapters are
// training-only: they receive gradients exclusively through the
// distillation losses and are dropped at inference.
class AdapterSet {
 public:
  AdapterSet() = default;
  AdapterSet(const Backbone& net, Rng& rng);

  Tensor adapt(const FeatureTap& tap) const;        // batched [B,C,H,W]
  Tensor adapt_slice(std::size_t tap_index, const Tensor& slice) const;  // [C,H,W]

  std::vector<NamedParam>& params() { return params_; }
  const std::vector<NamedParam>& params() const { return params_; }
  bool has_adapter(std::size_t tap_index) const;

 private:
  struct Entry {
    std::size_t tap_index = 0;
    Tensor weight;  // [Ct, Cs, 1, 1]
    Tensor bias;    // [Ct]
  };
  const Entry* entry_for(std::size_t tap_index) const;

  Shape teacher_shape_;
  std::vector<Entry> entries_;
  std::vector<NamedParam> params_;
};

// Checkpoint: magic + version header, JSON manifest (kind, config, named
// shapes), then raw little-endian float32 payloads in manifest order.
void save_checkpoint(const std::string& path, const BackboneConfig& cfg,
                     const std::vector<NamedParam>& backbone_params,
                     const std::vector<NamedParam>& extra_params = {});

struct Checkpoint {
  BackboneConfig config;
  std::vector<NamedParam> params;        // backbone tensors
  std::vector<NamedParam> extra_params;  // adapters etc., "extra." prefix
};

Checkpoint load_checkpoint(const std::string& path);

// Restores parameter values into an existing backbone (shapes must match).
void restore_params(std::vector<NamedParam>& dst,
                    const std::vector<NamedParam>& src);

}  // namespace framer
