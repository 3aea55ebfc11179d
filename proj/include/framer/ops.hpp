#pragma once

#include "framer/tensor.hpp"

namespace framer {

enum class PadMode { Zero, Reflect };

// Elementwise binary ops accept equal shapes or a scalar on either side.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
// Throws on any non-positive entry; loss formulas that the math writes as
// log-softmax go through log_sum_exp instead and never hit the domain edge.
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);

Tensor add_scalar(const Tensor& a, double c);
Tensor mul_scalar(const Tensor& a, double c);

Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Cross-correlation (no kernel flip): x [B,C,H,W], k [O,C,kh,kw], odd
// kernel extents, zero padding by default.
Tensor conv2d(const Tensor& x, const Tensor& k, std::size_t stride = 1,
              std::size_t pad = 0, PadMode mode = PadMode::Zero);

// Numerically stabilized softmax over the last dimension.
Tensor softmax_lastdim(const Tensor& a);

// b is [C] or [B,C]; added per channel across H,W of x [B,C,H,W].
Tensor add_channel_bias(const Tensor& x, const Tensor& b);

Tensor concat_channels(const Tensor& a, const Tensor& b);

// Half-pixel-center bilinear resampling of x [B,C,H,W] (or [C,H,W]).
Tensor bilinear_resize(const Tensor& x, std::size_t oh, std::size_t ow);

// Extracts sample b of a batched tensor: [B,...] -> [...].
Tensor slice_batch(const Tensor& x, std::size_t b);

// Same data, new shape (numel preserved).
Tensor reshape(const Tensor& x, Shape shape);

// Stacks R tensors of shape [1,C] (or [C]) into [R,C].
Tensor concat_rows(const std::vector<Tensor>& rows);

// log(sum_k exp(terms_k)) over scalar tensors, max-shifted for stability.
Tensor log_sum_exp(const std::vector<Tensor>& terms);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(const Tensor& a, double c) { return mul_scalar(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return mul_scalar(a, c); }
inline Tensor operator+(const Tensor& a, double c) { return add_scalar(a, c); }

}  // namespace framer
