#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "adasf/tensor.hpp"

namespace adasf {

struct ConvParams {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t groups = 1;
  std::size_t pad = 0;
};

/// Output extent of a convolution along one axis; throws if non-positive.
std::size_t conv_out_size(std::size_t in, std::size_t k, const ConvParams& p);

// Cross-correlation (no kernel flip). w is [c_out, c_in/groups, k, k]; bias is
// empty or holds c_out values.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, const ConvParams& p);
inline Tensor conv2d(const Tensor& x, const Tensor& w, const ConvParams& p) { return conv2d(x, w, Tensor{}, p); }

// Exact adjoint of conv2d with the same weight tensor and parameters: maps
// [n, c_out, oh, ow] back to [n, c_in, out_h, out_w]. When out_h/out_w are 0
// the natural size (oh-1)*stride - 2*pad + dilation*(k-1) + 1 is used.
Tensor conv_transpose2d(const Tensor& y, const Tensor& w, const Tensor& bias, const ConvParams& p,
                        std::size_t out_h = 0, std::size_t out_w = 0);
inline Tensor conv_transpose2d(const Tensor& y, const Tensor& w, const ConvParams& p) {
  return conv_transpose2d(y, w, Tensor{}, p);
}

/// d<conv2d(x, w), gy>/dw.
Tensor conv2d_weight_grad(const Tensor& x, const Tensor& gy, const Shape& w_shape, const ConvParams& p);
/// d<conv_transpose2d(y, w), gx>/dw.
Tensor conv_transpose2d_weight_grad(const Tensor& y, const Tensor& gx, const Shape& w_shape, const ConvParams& p);
/// Sum over n, h, w per channel, shaped [1, c, 1, 1].
Tensor channel_sum(const Tensor& g);

/// Sobel gradient magnitude of a single-channel image, replicate padding.
Tensor sobel_grad(const Tensor& x);
/// Sobel Gx (d/dcol) and Gy (d/drow) responses, replicate padding.
void sobel_xy(const Tensor& x, Tensor& gx, Tensor& gy);

// Elementwise helpers. All binary forms require equal shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor sigmoid(const Tensor& x);
Tensor silu(const Tensor& x);
Tensor tanh(const Tensor& x);

inline double sigmoid(double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); }

/// Per-pixel 1x1 channel mixing: w is [c_out, c_in, 1, 1].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);

/// Layer norm across channels at every pixel, with per-channel affine.
Tensor layer_norm(const Tensor& x, const Tensor& weight, const Tensor& bias, double eps = 1e-5);

Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t count);
std::vector<Tensor> split_channels(const Tensor& x, const std::vector<std::size_t>& sizes);

enum class PadMode { Zero, Replicate, Reflect };
/// Pads bottom/right (and top/left when symmetric) of every plane.
Tensor pad(const Tensor& x, std::size_t top, std::size_t bottom, std::size_t left, std::size_t right, PadMode mode);
/// Adjoint of pad(): scatters g back onto an input of shape `in`.
Tensor pad_adjoint(const Tensor& g, const Shape& in, std::size_t top, std::size_t left, PadMode mode);
Tensor crop(const Tensor& x, std::size_t top, std::size_t left, std::size_t h, std::size_t w);

}  // namespace adasf
