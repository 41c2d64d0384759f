#pragma once

#include <cstddef>

#include "l2g/tensor.hpp"

// Differentiable layer operations. Every op checks its output for
// non-finite values and throws NumericError naming itself.
namespace l2g::ops {

// Cross-correlation of x[B,Cin,H,W] with kernel[Cout,Cin,kH,kW] using
// symmetric zero padding. Output [B,Cout,(H+2p-kH)/s+1,(W+2p-kW)/s+1].
Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int pad);

// x[B,C,H,W] + bias[C] broadcast over batch and space.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Softmax across axis 1 of x[B,C,H,W] at every (b, y, x).
Tensor channel_softmax(const Tensor& x);

// Spatial mean of x[B,C,H,W] -> [B,C].
Tensor global_avg_pool(const Tensor& x);

// Resizes the last two axes of a rank >= 2 tensor with bilinear
// interpolation, align-corners-false convention: output pixel centre d maps
// to source coordinate (d + 0.5) * in / out - 0.5, clamped to [0, in - 1].
Tensor bilinear_resize(const Tensor& x, std::size_t out_h, std::size_t out_w);

// Sub-window of x[B,C,H,W]: channels [c0, c1), rows [y0, y0+h), cols [x0, x0+w).
Tensor crop(const Tensor& x, std::size_t c0, std::size_t c1, std::size_t y0,
            std::size_t x0, std::size_t h, std::size_t w);

// Mirror the last axis.
Tensor flip_horizontal(const Tensor& x);

// Per (b, c) plane of x[B,C,H,W] with nonnegative entries: x / max(x), or 0
// when the max is 0. Gradient flows through the numerator and the max.
Tensor normalize_by_max(const Tensor& x);

// Same values under a new shape with equal element count.
Tensor reshape(const Tensor& x, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// mean((x - target)^2). The target never receives gradient.
Tensor mse(const Tensor& x, const Tensor& target);

// Mean binary cross-entropy of sigmoid(logits) against binary targets of the
// same shape, evaluated in the numerically stable softplus form.
Tensor sigmoid_bce(const Tensor& logits, const Tensor& targets);

}  // namespace l2g::ops
