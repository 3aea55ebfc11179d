#include "framer/backbone.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace framer {

namespace {

constexpr char kMagic[8] = {'F', 'R', 'M', 'R', 'C', 'K', 'P', '1'};

Tensor sinusoidal_embedding(const std::vector<int>& t, std::size_t dim) {
  const std::size_t half = dim / 2;
  std::vector<double> emb(t.size() * dim);
  for (std::size_t b = 0; b < t.size(); ++b) {
    for (std::size_t k = 0; k < half; ++k) {
      const double freq =
          half > 1 ? std::exp(-std::log(10000.0) * static_cast<double>(k) /
                              static_cast<double>(half - 1))
                   : 1.0;
      const double arg = static_cast<double>(t[b]) * freq;
      emb[b * dim + k] = std::sin(arg);
      emb[b * dim + half + k] = std::cos(arg);
    }
  }
  return Tensor::from({t.size(), dim}, std::move(emb));
}

std::string kind_str(BackboneKind k) {
  return k == BackboneKind::DitLike ? "dit-like" : "unet-like";
}

BackboneKind kind_from(const std::string& s) {
  if (s == "dit-like") return BackboneKind::DitLike;
  if (s == "unet-like") return BackboneKind::UnetLike;
  throw std::runtime_error("unknown backbone kind: " + s);
}

}  // namespace

void BackboneConfig::validate() const {
  if (kind == BackboneKind::DitLike && n_layers < 3) {
    throw std::invalid_argument(
        "backbone config: n_layers must be >= 3, got " +
        std::to_string(n_layers));
  }
  if (base_channels == 0 || in_channels == 0 || cond_width == 0 ||
      n_classes == 0) {
    throw std::invalid_argument("backbone config: zero-sized field");
  }
  if (time_embed_dim < 2 || time_embed_dim % 2 != 0) {
    throw std::invalid_argument("backbone config: time_embed_dim must be even");
  }
  if (kind == BackboneKind::UnetLike &&
      (image_size % 4 != 0 || image_size < 8)) {
    throw std::invalid_argument(
        "backbone config: unet-like needs image_size divisible by 4, >= 8");
  }
  if (image_size < 4) {
    throw std::invalid_argument("backbone config: image_size too small");
  }
}

Backbone::Backbone(const BackboneConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg.validate();
  const std::size_t C = cfg.base_channels;
  const std::size_t in2 = 2 * cfg.in_channels;

  auto conv_scale = [](std::size_t fan_in) {
    return std::sqrt(1.0 / static_cast<double>(fan_in));
  };

  param("stem.w", {C, in2, 3, 3}, rng, conv_scale(in2 * 9));
  param("stem.b", {C}, rng, 0.0);
  param("time.w", {cfg.time_embed_dim, C}, rng, conv_scale(cfg.time_embed_dim));
  param("time.b", {1, C}, rng, 0.0);
  param("cond.w", {cfg.cond_width, C}, rng, conv_scale(cfg.cond_width));
  param("cond.b", {1, C}, rng, 0.0);
  param("embed", {cfg.n_classes, cfg.cond_width}, rng, 0.02);

  auto block = [&](const std::string& name, std::size_t ch) {
    param(name + ".conv.w", {ch, ch, 3, 3}, rng, conv_scale(ch * 9));
    param(name + ".conv.b", {ch}, rng, 0.0);
    param(name + ".mix.w", {ch, ch, 1, 1}, rng, conv_scale(ch));
    param(name + ".mix.b", {ch}, rng, 0.0);
  };

  if (cfg.kind == BackboneKind::DitLike) {
    for (std::size_t k = 1; k <= cfg.n_layers; ++k) {
      block("block" + std::to_string(k), C);
    }
  } else {
    block("enc1", C);
    param("down1.w", {2 * C, C, 3, 3}, rng, conv_scale(C * 9));
    param("down1.b", {2 * C}, rng, 0.0);
    block("enc2", 2 * C);
    param("down2.w", {4 * C, 2 * C, 3, 3}, rng, conv_scale(2 * C * 9));
    param("down2.b", {4 * C}, rng, 0.0);
    block("mid", 4 * C);
    param("up1.w", {2 * C, 4 * C, 3, 3}, rng, conv_scale(4 * C * 9));
    param("up1.b", {2 * C}, rng, 0.0);
    param("fuse1.w", {2 * C, 4 * C, 1, 1}, rng, conv_scale(4 * C));
    param("fuse1.b", {2 * C}, rng, 0.0);
    block("dec1", 2 * C);
    param("up2.w", {C, 2 * C, 3, 3}, rng, conv_scale(2 * C * 9));
    param("up2.b", {C}, rng, 0.0);
    param("fuse2.w", {C, 2 * C, 1, 1}, rng, conv_scale(2 * C));
    param("fuse2.b", {C}, rng, 0.0);
    block("dec2", C);
    block("final", C);
  }

  // Zero-initialized output head: the denoiser predicts zero noise at init.
  param("out.w", {cfg.in_channels, C, 3, 3}, rng, 0.0);
  param("out.b", {cfg.in_channels}, rng, 0.0);
}

Tensor Backbone::param(const std::string& name, Shape shape, Rng& rng,
                       double scale) {
  Tensor t = scale == 0.0 ? Tensor::zeros(std::move(shape), true)
                          : Tensor::randn(std::move(shape), rng, scale, true);
  params_.push_back({name, t});
  return t;
}

Tensor Backbone::find(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw std::logic_error("backbone: missing parameter " + name);
}

std::size_t Backbone::num_taps() const {
  return cfg_.kind == BackboneKind::DitLike ? cfg_.n_layers : 6;
}

Shape Backbone::tap_shape(std::size_t index) const {
  const std::size_t C = cfg_.base_channels, S = cfg_.image_size;
  if (index < 1 || index > num_taps()) {
    throw std::invalid_argument("tap_shape: index out of range");
  }
  if (cfg_.kind == BackboneKind::DitLike) return {C, S, S};
  switch (index) {
    case 1:
      return {C, S, S};
    case 2:
      return {2 * C, S / 2, S / 2};
    case 3:
      return {4 * C, S / 4, S / 4};
    case 4:
      return {2 * C, S / 2, S / 2};
    default:
      return {C, S, S};
  }
}

Tensor Backbone::time_cond_bias(std::size_t batch, const std::vector<int>& t,
                                const std::vector<std::size_t>& class_ids) const {
  Tensor emb = sinusoidal_embedding(t, cfg_.time_embed_dim);  // [B,D]
  Tensor time_part = matmul(emb, find("time.w"));             // [B,C]
  Tensor embed = find("embed");
  Tensor cond_w = find("cond.w");
  std::vector<Tensor> rows(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    if (class_ids[b] >= cfg_.n_classes) {
      throw std::invalid_argument("forward: class id out of range");
    }
    Tensor row = reshape(slice_batch(embed, class_ids[b]), {1, cfg_.cond_width});
    rows[b] = matmul(row, cond_w);  // [1,C]
  }
  Tensor cond_part = concat_rows(rows);  // [B,C]
  Tensor bias = add(time_part, cond_part);
  // Broadcast the [1,C] biases over the batch.
  Tensor ones = Tensor::full({batch, 1}, 1.0);
  bias = add(bias, matmul(ones, find("time.b")));
  bias = add(bias, matmul(ones, find("cond.b")));
  return bias;
}

ForwardResult Backbone::forward(const Tensor& z_t, const std::vector<int>& t,
                                const Tensor& lr_cond,
                                const std::vector<std::size_t>& class_ids,
                                bool collect_taps) const {
  if (z_t.rank() != 4 || z_t.shape()[1] != cfg_.in_channels ||
      z_t.shape()[2] != cfg_.image_size || z_t.shape()[3] != cfg_.image_size) {
    throw std::invalid_argument("forward: z_t " + shape_str(z_t.shape()) +
                                " does not match config");
  }
  if (lr_cond.shape() != z_t.shape()) {
    throw std::invalid_argument("forward: lr conditioning " +
                                shape_str(lr_cond.shape()) +
                                " does not match z_t " + shape_str(z_t.shape()));
  }
  const std::size_t B = z_t.shape()[0];
  if (t.size() != B || class_ids.size() != B) {
    throw std::invalid_argument("forward: per-sample t/class sizes mismatch");
  }

  Tensor x = concat_channels(z_t, lr_cond);
  Tensor bias = time_cond_bias(B, t, class_ids);
  Tensor h = conv2d(x, find("stem.w"), 1, 1);
  h = add_channel_bias(h, find("stem.b"));
  h = add_channel_bias(h, bias);
  h = relu(h);

  return cfg_.kind == BackboneKind::DitLike ? forward_dit(h, bias, collect_taps)
                                            : forward_unet(h, bias, collect_taps);
}

ForwardResult Backbone::forward_dit(const Tensor& x, const Tensor&,
                                    bool collect_taps) const {
  ForwardResult out;
  const std::size_t n = cfg_.n_layers;
  Tensor h = x;
  for (std::size_t k = 1; k <= n; ++k) {
    const std::string name = "block" + std::to_string(k);
    Tensor r = relu(add_channel_bias(conv2d(h, find(name + ".conv.w"), 1, 1),
                                     find(name + ".conv.b")));
    r = add_channel_bias(conv2d(r, find(name + ".mix.w"), 1, 0),
                         find(name + ".mix.b"));
    h = add(h, r);
    if (collect_taps) {
      out.taps.push_back({k, h, k == n,
                          static_cast<double>(k) / static_cast<double>(n)});
    }
  }
  out.eps = add_channel_bias(conv2d(h, find("out.w"), 1, 1), find("out.b"));
  return out;
}

ForwardResult Backbone::forward_unet(const Tensor& x, const Tensor&,
                                     bool collect_taps) const {
  ForwardResult out;
  const std::size_t S = cfg_.image_size;
  const std::size_t n = num_taps();

  auto block = [&](const std::string& name, const Tensor& h) {
    Tensor r = relu(add_channel_bias(conv2d(h, find(name + ".conv.w"), 1, 1),
                                     find(name + ".conv.b")));
    r = add_channel_bias(conv2d(r, find(name + ".mix.w"), 1, 0),
                         find(name + ".mix.b"));
    return add(h, r);
  };
  auto tap = [&](std::size_t idx, const Tensor& h) {
    if (collect_taps) {
      out.taps.push_back({idx, h, idx == n,
                          static_cast<double>(idx) / static_cast<double>(n)});
    }
  };

  Tensor e1 = block("enc1", x);
  tap(1, e1);
  Tensor d1 = relu(add_channel_bias(conv2d(e1, find("down1.w"), 2, 1),
                                    find("down1.b")));
  Tensor e2 = block("enc2", d1);
  tap(2, e2);
  Tensor d2 = relu(add_channel_bias(conv2d(e2, find("down2.w"), 2, 1),
                                    find("down2.b")));
  Tensor m = block("mid", d2);
  tap(3, m);

  Tensor u1 = bilinear_resize(m, S / 2, S / 2);
  u1 = relu(add_channel_bias(conv2d(u1, find("up1.w"), 1, 1), find("up1.b")));
  Tensor f1 = relu(add_channel_bias(
      conv2d(concat_channels(u1, e2), find("fuse1.w"), 1, 0), find("fuse1.b")));
  Tensor dc1 = block("dec1", f1);
  tap(4, dc1);

  Tensor u2 = bilinear_resize(dc1, S, S);
  u2 = relu(add_channel_bias(conv2d(u2, find("up2.w"), 1, 1), find("up2.b")));
  Tensor f2 = relu(add_channel_bias(
      conv2d(concat_channels(u2, e1), find("fuse2.w"), 1, 0), find("fuse2.b")));
  Tensor dc2 = block("dec2", f2);
  tap(5, dc2);

  Tensor fin = block("final", dc2);
  tap(6, fin);

  out.eps = add_channel_bias(conv2d(fin, find("out.w"), 1, 1), find("out.b"));
  return out;
}

std::size_t count_params(const BackboneConfig& cfg) {
  Rng rng(0);
  Backbone net(cfg, rng);
  std::size_t n = 0;
  for (const auto& p : net.params()) n += p.tensor.numel();
  return n;
}

AdapterSet::AdapterSet(const Backbone& net, Rng& rng) {
  teacher_shape_ = net.tap_shape(net.teacher_index());
  const std::size_t ct = teacher_shape_[0];
  for (std::size_t i = 1; i <= net.num_taps(); ++i) {
    const Shape s = net.tap_shape(i);
    if (s == teacher_shape_) continue;
    Entry e;
    e.tap_index = i;
    const double scale = std::sqrt(1.0 / static_cast<double>(s[0]));
    e.weight = Tensor::randn({ct, s[0], 1, 1}, rng, scale, true);
    e.bias = Tensor::zeros({ct}, true);
    params_.push_back({"adapter" + std::to_string(i) + ".w", e.weight});
    params_.push_back({"adapter" + std::to_string(i) + ".b", e.bias});
    entries_.push_back(std::move(e));
  }
}

const AdapterSet::Entry* AdapterSet::entry_for(std::size_t tap_index) const {
  for (const auto& e : entries_) {
    if (e.tap_index == tap_index) return &e;
  }
  return nullptr;
}

bool AdapterSet::has_adapter(std::size_t tap_index) const {
  return entry_for(tap_index) != nullptr;
}

Tensor AdapterSet::adapt(const FeatureTap& tap) const {
  const Entry* e = entry_for(tap.index);
  if (e == nullptr) return tap.feature;
  Tensor y = add_channel_bias(conv2d(tap.feature, e->weight, 1, 0), e->bias);
  return bilinear_resize(y, teacher_shape_[1], teacher_shape_[2]);
}

Tensor AdapterSet::adapt_slice(std::size_t tap_index, const Tensor& slice) const {
  const Entry* e = entry_for(tap_index);
  if (e == nullptr) return slice;
  Tensor x = reshape(slice, {1, slice.shape()[0], slice.shape()[1], slice.shape()[2]});
  Tensor y = add_channel_bias(conv2d(x, e->weight, 1, 0), e->bias);
  y = bilinear_resize(y, teacher_shape_[1], teacher_shape_[2]);
  return reshape(y, teacher_shape_);
}

namespace {

nlohmann::ordered_json config_to_json(const BackboneConfig& cfg) {
  return nlohmann::ordered_json{{"kind", kind_str(cfg.kind)},
                                {"n_layers", cfg.n_layers},
                                {"base_channels", cfg.base_channels},
                                {"image_size", cfg.image_size},
                                {"in_channels", cfg.in_channels},
                                {"cond_width", cfg.cond_width},
                                {"n_classes", cfg.n_classes},
                                {"time_embed_dim", cfg.time_embed_dim}};
}

BackboneConfig config_from_json(const nlohmann::json& j) {
  BackboneConfig cfg;
  cfg.kind = kind_from(j.at("kind").get<std::string>());
  cfg.n_layers = j.at("n_layers").get<std::size_t>();
  cfg.base_channels = j.at("base_channels").get<std::size_t>();
  cfg.image_size = j.at("image_size").get<std::size_t>();
  cfg.in_channels = j.at("in_channels").get<std::size_t>();
  cfg.cond_width = j.at("cond_width").get<std::size_t>();
  cfg.n_classes = j.at("n_classes").get<std::size_t>();
  cfg.time_embed_dim = j.at("time_embed_dim").get<std::size_t>();
  return cfg;
}

void write_payload(std::ofstream& os, const std::vector<NamedParam>& params) {
  for (const auto& p : params) {
    std::vector<float> buf(p.tensor.numel());
    auto v = p.tensor.values();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = static_cast<float>(v[i]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
}

std::vector<NamedParam> read_payload(std::ifstream& is,
                                     const nlohmann::json& list) {
  std::vector<NamedParam> out;
  for (const auto& entry : list) {
    Shape shape;
    for (const auto& d : entry.at("shape")) shape.push_back(d.get<std::size_t>());
    std::vector<float> buf(shape_numel(shape));
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (!is) throw std::runtime_error("checkpoint: truncated payload");
    std::vector<double> vals(buf.begin(), buf.end());
    out.push_back({entry.at("name").get<std::string>(),
                   Tensor::from(shape, std::move(vals), true)});
  }
  return out;
}

}  // namespace

void save_checkpoint(const std::string& path, const BackboneConfig& cfg,
                     const std::vector<NamedParam>& backbone_params,
                     const std::vector<NamedParam>& extra_params) {
  nlohmann::ordered_json manifest;
  manifest["version"] = 1;
  manifest["config"] = config_to_json(cfg);
  auto describe = [](const std::vector<NamedParam>& params) {
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& p : params) {
      list.push_back({{"name", p.name}, {"shape", p.tensor.shape()}});
    }
    return list;
  };
  manifest["params"] = describe(backbone_params);
  manifest["extra_params"] = describe(extra_params);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  const std::string m = manifest.dump();
  const std::uint64_t len = m.size();
  os.write(reinterpret_cast<const char*>(&len), sizeof(len));
  os.write(m.data(), static_cast<std::streamsize>(m.size()));
  write_payload(os, backbone_params);
  write_payload(os, extra_params);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not a checkpoint file");
  }
  std::uint64_t len = 0;
  is.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string m(len, '\0');
  is.read(m.data(), static_cast<std::streamsize>(len));
  if (!is) throw std::runtime_error(path + ": truncated manifest");
  const auto manifest = nlohmann::json::parse(m);
  Checkpoint ckpt;
  ckpt.config = config_from_json(manifest.at("config"));
  ckpt.params = read_payload(is, manifest.at("params"));
  ckpt.extra_params = read_payload(is, manifest.at("extra_params"));
  return ckpt;
}

void restore_params(std::vector<NamedParam>& dst,
                    const std::vector<NamedParam>& src) {
  for (auto& d : dst) {
    bool found = false;
    for (const auto& s : src) {
      if (s.name != d.name) continue;
      if (s.tensor.shape() != d.tensor.shape()) {
        throw std::runtime_error("restore_params: shape mismatch for " + d.name);
      }
      auto out = d.tensor.data_mut();
      auto in = s.tensor.values();
      std::copy(in.begin(), in.end(), out.begin());
      found = true;
      break;
    }
    if (!found) throw std::runtime_error("restore_params: missing " + d.name);
  }
}

}  // namespace framer
