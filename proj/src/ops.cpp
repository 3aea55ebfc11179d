#include "framer/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace framer {

namespace {

void check_same_or_scalar(const char* op, const Tensor& a, const Tensor& b) {
  if (a.numel() == 1 || b.numel() == 1) return;
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
}

// Accumulates g into a parent that may have been broadcast from a scalar.
void scatter_binary_grad(Node& parent, const std::vector<double>& g) {
  auto& acc = parent.grad_buf();
  if (acc.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
  } else {
    double s = 0.0;
    for (double v : g) s += v;
    acc[0] += s;
  }
}

double pick(const Tensor& t, std::size_t i) {
  return t.numel() == 1 ? t.at(0) : t.at(i);
}

Tensor binary_op(const char* name, const Tensor& a, const Tensor& b,
                 double (*fwd)(double, double),
                 void (*bwd)(double ga, double av, double bv, double& da,
                             double& db)) {
  check_same_or_scalar(name, a, b);
  const Tensor& big = a.numel() >= b.numel() ? a : b;
  std::vector<double> out(big.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(pick(a, i), pick(b, i));

  Tensor av = a, bv = b;
  return Tensor::make(
      big.shape(), std::move(out), name, {a, b}, [av, bv, bwd](Node& n) {
        std::vector<double> da(n.value.size()), db(n.value.size());
        for (std::size_t i = 0; i < n.value.size(); ++i) {
          bwd(n.grad[i], pick(av, i), pick(bv, i), da[i], db[i]);
        }
        if (av.requires_grad()) scatter_binary_grad(*av.node(), da);
        if (bv.requires_grad()) scatter_binary_grad(*bv.node(), db);
      });
}

Tensor unary_op(const char* name, const Tensor& a,
                double (*fwd)(double),
                double (*dfdx)(double x, double y)) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.at(i));
  Tensor av = a;
  return Tensor::make(a.shape(), std::move(out), name, {a},
                      [av, dfdx](Node& n) {
                        auto& acc = av.node()->grad_buf();
                        for (std::size_t i = 0; i < n.value.size(); ++i) {
                          acc[i] += n.grad[i] * dfdx(av.at(i), n.value[i]);
                        }
                      });
}

// Reflect-101 index mapping: mirrors about the edges without repeating them.
std::size_t reflect_index(long i, long size) {
  if (size == 1) return 0;
  long period = 2 * (size - 1);
  long m = i % period;
  if (m < 0) m += period;
  if (m >= size) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double, double& da, double& db) {
        da = g;
        db = g;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double, double& da, double& db) {
        da = g;
        db = -g;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double x, double y, double& da, double& db) {
        da = g * y;
        db = g * x;
      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  return binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double g, double x, double y, double& da, double& db) {
        da = g / y;
        db = -g * x / (y * y);
      });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      "neg", a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (!(a.at(i) > 0.0)) {
      throw std::domain_error("log: non-positive operand " +
                              std::to_string(a.at(i)));
    }
  }
  return unary_op(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor sqrt(const Tensor& a) {
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a.at(i) < 0.0) {
      throw std::domain_error("sqrt: negative operand " +
                              std::to_string(a.at(i)));
    }
  }
  return unary_op(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

Tensor add_scalar(const Tensor& a, double c) { return add(a, Tensor::scalar(c)); }
Tensor mul_scalar(const Tensor& a, double c) { return mul(a, Tensor::scalar(c)); }

Tensor sum_all(const Tensor& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i);
  Tensor av = a;
  return Tensor::make({1}, {s}, "sum_all", {a}, [av](Node& n) {
    auto& acc = av.node()->grad_buf();
    for (double& g : acc) g += n.grad[0];
  });
}

Tensor mean_all(const Tensor& a) {
  const double inv = 1.0 / static_cast<double>(a.numel());
  double s = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) s += a.at(i);
  Tensor av = a;
  return Tensor::make({1}, {s * inv}, "mean_all", {a}, [av, inv](Node& n) {
    auto& acc = av.node()->grad_buf();
    for (double& g : acc) g += n.grad[0] * inv;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    throw std::invalid_argument("matmul: incompatible shapes " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.at(i * k + p);
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * b.at(p * n + j);
    }
  }
  Tensor at = a, bt = b;
  return Tensor::make(
      {m, n}, std::move(out), "matmul", {a, b}, [at, bt, m, k, n](Node& node) {
        const auto& g = node.grad;
        if (at.requires_grad()) {
          auto& da = at.node()->grad_buf();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
              const double gv = g[i * n + j];
              for (std::size_t p = 0; p < k; ++p)
                da[i * k + p] += gv * bt.at(p * n + j);
            }
        }
        if (bt.requires_grad()) {
          auto& db = bt.node()->grad_buf();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
              const double av = at.at(i * k + p);
              for (std::size_t j = 0; j < n; ++j)
                db[p * n + j] += av * g[i * n + j];
            }
        }
      });
}

Tensor conv2d(const Tensor& x, const Tensor& k, std::size_t stride,
              std::size_t pad, PadMode mode) {
  if (x.rank() != 4 || k.rank() != 4) {
    throw std::invalid_argument("conv2d: expected x [B,C,H,W], k [O,C,kh,kw]");
  }
  const std::size_t B = x.shape()[0], C = x.shape()[1], H = x.shape()[2],
                    W = x.shape()[3];
  const std::size_t O = k.shape()[0], KC = k.shape()[1], KH = k.shape()[2],
                    KW = k.shape()[3];
  if (C != KC) {
    throw std::invalid_argument("conv2d: channel mismatch, x has " +
                                std::to_string(C) + " kernel expects " +
                                std::to_string(KC));
  }
  if (KH % 2 == 0 || KW % 2 == 0) {
    throw std::invalid_argument("conv2d: kernel extents must be odd");
  }
  if (stride == 0) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (H + 2 * pad < KH || W + 2 * pad < KW) {
    throw std::invalid_argument("conv2d: kernel larger than padded input");
  }
  const std::size_t OH = (H + 2 * pad - KH) / stride + 1;
  const std::size_t OW = (W + 2 * pad - KW) / stride + 1;

  std::vector<double> out(B * O * OH * OW, 0.0);
  const auto xv = x.values();
  const auto kv = k.values();
  const long ip = static_cast<long>(pad);

  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t o = 0; o < O; ++o) {
      double* orow = out.data() + (b * O + o) * OH * OW;
      for (std::size_t c = 0; c < C; ++c) {
        const double* xbase = xv.data() + (b * C + c) * H * W;
        const double* kbase = kv.data() + (o * C + c) * KH * KW;
        for (std::size_t ky = 0; ky < KH; ++ky) {
          for (std::size_t kx = 0; kx < KW; ++kx) {
            const double w = kbase[ky * KW + kx];
            if (w == 0.0) continue;
            for (std::size_t oy = 0; oy < OH; ++oy) {
              const long iy = static_cast<long>(oy * stride + ky) - ip;
              std::size_t riy;
              if (iy < 0 || iy >= static_cast<long>(H)) {
                if (mode == PadMode::Zero) continue;
                riy = reflect_index(iy, static_cast<long>(H));
              } else {
                riy = static_cast<std::size_t>(iy);
              }
              const double* xr = xbase + riy * W;
              double* od = orow + oy * OW;
              for (std::size_t ox = 0; ox < OW; ++ox) {
                const long ix = static_cast<long>(ox * stride + kx) - ip;
                if (ix < 0 || ix >= static_cast<long>(W)) {
                  if (mode == PadMode::Zero) continue;
                  od[ox] += w * xr[reflect_index(ix, static_cast<long>(W))];
                } else {
                  od[ox] += w * xr[static_cast<std::size_t>(ix)];
                }
              }
            }
          }
        }
      }
    }
  }

  Tensor xt = x, kt = k;
  return Tensor::make(
      {B, O, OH, OW}, std::move(out), "conv2d", {x, k},
      [xt, kt, B, C, H, W, O, KH, KW, OH, OW, stride, ip, mode](Node& node) {
        const auto& g = node.grad;
        const auto xv = xt.values();
        const auto kv = kt.values();
        const bool need_dx = xt.requires_grad();
        const bool need_dk = kt.requires_grad();
        std::vector<double>* dxp = need_dx ? &xt.node()->grad_buf() : nullptr;
        std::vector<double>* dkp = need_dk ? &kt.node()->grad_buf() : nullptr;

        for (std::size_t b = 0; b < B; ++b) {
          for (std::size_t o = 0; o < O; ++o) {
            const double* grow = g.data() + (b * O + o) * OH * OW;
            for (std::size_t c = 0; c < C; ++c) {
              const double* xbase = xv.data() + (b * C + c) * H * W;
              const double* kbase = kv.data() + (o * C + c) * KH * KW;
              double* dxbase = need_dx ? dxp->data() + (b * C + c) * H * W : nullptr;
              double* dkbase = need_dk ? dkp->data() + (o * C + c) * KH * KW : nullptr;
              for (std::size_t ky = 0; ky < KH; ++ky) {
                for (std::size_t kx = 0; kx < KW; ++kx) {
                  const double w = kbase[ky * KW + kx];
                  double dk_acc = 0.0;
                  for (std::size_t oy = 0; oy < OH; ++oy) {
                    const long iy = static_cast<long>(oy * stride + ky) - ip;
                    std::size_t riy;
                    if (iy < 0 || iy >= static_cast<long>(H)) {
                      if (mode == PadMode::Zero) continue;
                      riy = reflect_index(iy, static_cast<long>(H));
                    } else {
                      riy = static_cast<std::size_t>(iy);
                    }
                    const double* xr = xbase + riy * W;
                    double* dxr = need_dx ? dxbase + riy * W : nullptr;
                    const double* gd = grow + oy * OW;
                    for (std::size_t ox = 0; ox < OW; ++ox) {
                      const long ix = static_cast<long>(ox * stride + kx) - ip;
                      std::size_t rix;
                      if (ix < 0 || ix >= static_cast<long>(W)) {
                        if (mode == PadMode::Zero) continue;
                        rix = reflect_index(ix, static_cast<long>(W));
                      } else {
                        rix = static_cast<std::size_t>(ix);
                      }
                      const double gv = gd[ox];
                      dk_acc += gv * xr[rix];
                      if (need_dx) dxr[rix] += gv * w;
                    }
                  }
                  if (need_dk) dkbase[ky * KW + kx] += dk_acc;
                }
              }
            }
          }
        }
      });
}

Tensor softmax_lastdim(const Tensor& a) {
  if (a.rank() == 0 || a.shape().back() == 0) {
    throw std::invalid_argument("softmax: empty last dimension");
  }
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (std::isnan(a.at(i))) throw std::domain_error("softmax: NaN input");
  }
  const std::size_t n = a.shape().back();
  const std::size_t rows = a.numel() / n;
  std::vector<double> out(a.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * n;
    double m = a.at(base);
    for (std::size_t j = 1; j < n; ++j) m = std::max(m, a.at(base + j));
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      out[base + j] = std::exp(a.at(base + j) - m);
      s += out[base + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[base + j] /= s;
  }
  Tensor av = a;
  return Tensor::make(a.shape(), std::move(out), "softmax", {a},
                      [av, n, rows](Node& node) {
                        auto& acc = av.node()->grad_buf();
                        for (std::size_t r = 0; r < rows; ++r) {
                          const std::size_t base = r * n;
                          double dot = 0.0;
                          for (std::size_t j = 0; j < n; ++j)
                            dot += node.grad[base + j] * node.value[base + j];
                          for (std::size_t j = 0; j < n; ++j)
                            acc[base + j] += node.value[base + j] *
                                             (node.grad[base + j] - dot);
                        }
                      });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
  if (x.rank() != 4) {
    throw std::invalid_argument("add_channel_bias: x must be [B,C,H,W]");
  }
  const std::size_t B = x.shape()[0], C = x.shape()[1],
                    HW = x.shape()[2] * x.shape()[3];
  const bool per_sample = b.rank() == 2;
  if ((per_sample && (b.shape()[0] != B || b.shape()[1] != C)) ||
      (!per_sample && (b.rank() != 1 || b.shape()[0] != C))) {
    throw std::invalid_argument("add_channel_bias: bias " +
                                shape_str(b.shape()) + " does not match x " +
                                shape_str(x.shape()));
  }
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t c = 0; c < C; ++c) {
      const double bias = per_sample ? b.at(i * C + c) : b.at(c);
      const std::size_t base = (i * C + c) * HW;
      for (std::size_t j = 0; j < HW; ++j) out[base + j] = x.at(base + j) + bias;
    }
  }
  Tensor xt = x, bt = b;
  return Tensor::make(x.shape(), std::move(out), "add_channel_bias", {x, b},
                      [xt, bt, B, C, HW, per_sample](Node& node) {
                        if (xt.requires_grad()) {
                          auto& dx = xt.node()->grad_buf();
                          for (std::size_t i = 0; i < node.grad.size(); ++i)
                            dx[i] += node.grad[i];
                        }
                        if (bt.requires_grad()) {
                          auto& db = bt.node()->grad_buf();
                          for (std::size_t i = 0; i < B; ++i)
                            for (std::size_t c = 0; c < C; ++c) {
                              double s = 0.0;
                              const std::size_t base = (i * C + c) * HW;
                              for (std::size_t j = 0; j < HW; ++j)
                                s += node.grad[base + j];
                              db[per_sample ? i * C + c : c] += s;
                            }
                        }
                      });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.shape()[0] != b.shape()[0] ||
      a.shape()[2] != b.shape()[2] || a.shape()[3] != b.shape()[3]) {
    throw std::invalid_argument("concat_channels: incompatible " +
                                shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  const std::size_t B = a.shape()[0], Ca = a.shape()[1], Cb = b.shape()[1],
                    HW = a.shape()[2] * a.shape()[3];
  std::vector<double> out(B * (Ca + Cb) * HW);
  for (std::size_t i = 0; i < B; ++i) {
    std::copy_n(a.values().data() + i * Ca * HW, Ca * HW,
                out.data() + i * (Ca + Cb) * HW);
    std::copy_n(b.values().data() + i * Cb * HW, Cb * HW,
                out.data() + i * (Ca + Cb) * HW + Ca * HW);
  }
  Tensor at = a, bt = b;
  return Tensor::make({B, Ca + Cb, a.shape()[2], a.shape()[3]}, std::move(out),
                      "concat_channels", {a, b},
                      [at, bt, B, Ca, Cb, HW](Node& node) {
                        for (std::size_t i = 0; i < B; ++i) {
                          const double* g = node.grad.data() + i * (Ca + Cb) * HW;
                          if (at.requires_grad()) {
                            auto& da = at.node()->grad_buf();
                            for (std::size_t j = 0; j < Ca * HW; ++j)
                              da[i * Ca * HW + j] += g[j];
                          }
                          if (bt.requires_grad()) {
                            auto& db = bt.node()->grad_buf();
                            for (std::size_t j = 0; j < Cb * HW; ++j)
                              db[i * Cb * HW + j] += g[Ca * HW + j];
                          }
                        }
                      });
}

Tensor bilinear_resize(const Tensor& x, std::size_t oh, std::size_t ow) {
  if (x.rank() != 4 && x.rank() != 3) {
    throw std::invalid_argument("bilinear_resize: expected [B,C,H,W] or [C,H,W]");
  }
  const std::size_t H = x.shape()[x.rank() - 2], W = x.shape()[x.rank() - 1];
  const std::size_t planes = x.numel() / (H * W);
  if (oh == 0 || ow == 0) {
    throw std::invalid_argument("bilinear_resize: zero output extent");
  }

  struct Taps {
    std::size_t lo, hi;
    double whi;
  };
  auto make_taps = [](std::size_t in, std::size_t outn) {
    std::vector<Taps> taps(outn);
    const double scale = static_cast<double>(in) / static_cast<double>(outn);
    for (std::size_t o = 0; o < outn; ++o) {
      double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const std::size_t lo = static_cast<std::size_t>(src);
      const std::size_t hi = std::min(lo + 1, in - 1);
      taps[o] = {lo, hi, src - static_cast<double>(lo)};
    }
    return taps;
  };
  const auto ty = make_taps(H, oh);
  const auto tx = make_taps(W, ow);

  std::vector<double> out(planes * oh * ow);
  const auto xv = x.values();
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xv.data() + p * H * W;
    double* dst = out.data() + p * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      const double* r0 = src + ty[y].lo * W;
      const double* r1 = src + ty[y].hi * W;
      const double wy = ty[y].whi;
      for (std::size_t xcol = 0; xcol < ow; ++xcol) {
        const auto& t = tx[xcol];
        const double top = r0[t.lo] * (1.0 - t.whi) + r0[t.hi] * t.whi;
        const double bot = r1[t.lo] * (1.0 - t.whi) + r1[t.hi] * t.whi;
        dst[y * ow + xcol] = top * (1.0 - wy) + bot * wy;
      }
    }
  }

  Shape oshape = x.shape();
  oshape[x.rank() - 2] = oh;
  oshape[x.rank() - 1] = ow;
  Tensor xt = x;
  return Tensor::make(std::move(oshape), std::move(out), "bilinear_resize", {x},
                      [xt, ty, tx, planes, H, W, oh, ow](Node& node) {
                        auto& dx = xt.node()->grad_buf();
                        for (std::size_t p = 0; p < planes; ++p) {
                          double* d = dx.data() + p * H * W;
                          const double* g = node.grad.data() + p * oh * ow;
                          for (std::size_t y = 0; y < oh; ++y) {
                            const double wy = ty[y].whi;
                            for (std::size_t xcol = 0; xcol < ow; ++xcol) {
                              const auto& t = tx[xcol];
                              const double gv = g[y * ow + xcol];
                              d[ty[y].lo * W + t.lo] += gv * (1.0 - wy) * (1.0 - t.whi);
                              d[ty[y].lo * W + t.hi] += gv * (1.0 - wy) * t.whi;
                              d[ty[y].hi * W + t.lo] += gv * wy * (1.0 - t.whi);
                              d[ty[y].hi * W + t.hi] += gv * wy * t.whi;
                            }
                          }
                        }
                      });
}

Tensor slice_batch(const Tensor& x, std::size_t b) {
  if (x.rank() < 2) throw std::invalid_argument("slice_batch: rank < 2");
  const std::size_t B = x.shape()[0];
  if (b >= B) {
    throw std::invalid_argument("slice_batch: index " + std::to_string(b) +
                                " out of range " + std::to_string(B));
  }
  Shape oshape(x.shape().begin() + 1, x.shape().end());
  const std::size_t n = shape_numel(oshape);
  std::vector<double> out(x.values().begin() + b * n,
                          x.values().begin() + (b + 1) * n);
  Tensor xt = x;
  return Tensor::make(std::move(oshape), std::move(out), "slice_batch", {x},
                      [xt, b, n](Node& node) {
                        auto& dx = xt.node()->grad_buf();
                        for (std::size_t i = 0; i < n; ++i)
                          dx[b * n + i] += node.grad[i];
                      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(x.shape()) +
                                " as " + shape_str(shape));
  }
  std::vector<double> out(x.values().begin(), x.values().end());
  Tensor xt = x;
  return Tensor::make(std::move(shape), std::move(out), "reshape", {x},
                      [xt](Node& node) {
                        auto& dx = xt.node()->grad_buf();
                        for (std::size_t i = 0; i < node.grad.size(); ++i)
                          dx[i] += node.grad[i];
                      });
}

Tensor concat_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw std::invalid_argument("concat_rows: no rows");
  const std::size_t c = rows[0].numel();
  std::vector<double> out;
  out.reserve(rows.size() * c);
  std::vector<Tensor> parents;
  parents.reserve(rows.size());
  for (const Tensor& r : rows) {
    if (r.numel() != c) {
      throw std::invalid_argument("concat_rows: ragged rows");
    }
    out.insert(out.end(), r.values().begin(), r.values().end());
    parents.push_back(r);
  }
  std::vector<Tensor> captured = parents;
  return Tensor::make({rows.size(), c}, std::move(out), "concat_rows",
                      std::move(parents), [captured, c](Node& node) {
                        for (std::size_t r = 0; r < captured.size(); ++r) {
                          if (!captured[r].requires_grad()) continue;
                          auto& d = captured[r].node()->grad_buf();
                          for (std::size_t i = 0; i < c; ++i)
                            d[i] += node.grad[r * c + i];
                        }
                      });
}

Tensor log_sum_exp(const std::vector<Tensor>& terms) {
  if (terms.empty()) throw std::invalid_argument("log_sum_exp: no terms");
  double m = terms[0].value();
  for (const Tensor& t : terms) m = std::max(m, t.value());
  // The shift is a constant; its gradient contribution cancels exactly.
  Tensor acc = exp(add_scalar(terms[0], -m));
  for (std::size_t i = 1; i < terms.size(); ++i) {
    acc = add(acc, exp(add_scalar(terms[i], -m)));
  }
  return add_scalar(log(acc), m);
}

}  // namespace framer
