#pragma once

#include <vector>

#include "mew/autodiff.hpp"
#include "mew/tensor.hpp"

namespace mew {

// Elementwise. Backward passes the output gradient through unchanged (add)
// or scaled by the partner operand (mul).
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

/// Full reduction to a single-element tensor of shape (1).
Tensor sum(const Tensor& x);

/// Splits rank-4 (B,C,H,W) into `parts` contiguous channel slices.
std::vector<Tensor> split_channels(const Tensor& x, int parts);

/// Concatenates rank-4 tensors along the channel axis.
Tensor concat_channels(const std::vector<Tensor>& xs);

/// Per-channel 2D cross-correlation. x (B,C,H,W), kernel (C,kh,kw).
/// Output extent per axis: floor((in + 2*pad - k) / stride) + 1.
Tensor conv_depthwise(const Tensor& x, const Tensor& kernel,
                      int stride_h, int stride_w, int pad_h, int pad_w);
Tensor conv_depthwise(const Tensor& x, const Tensor& kernel, int stride, int pad);

/// Per-pixel linear channel map. kernel (C_out, C_in), bias (C_out).
Tensor conv_pointwise(const Tensor& x, const Tensor& kernel, const Tensor& bias);

/// Per-(sample, group) standardization over (channels-in-group, H, W),
/// then per-channel affine. gamma/beta shape (C).
Tensor group_norm(const Tensor& x, int groups, const Tensor& gamma, const Tensor& beta,
                  double eps);

/// Per-channel batch normalization. In training mode normalizes with batch
/// statistics over (B,H,W) and updates the running buffers in place:
///   running <- (1 - momentum) * running + momentum * batch_stat
/// (running variance uses the unbiased estimate). In eval mode normalizes
/// with the running buffers.
Tensor batch_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  Tensor running_mean, Tensor running_var,
                  bool training, double momentum, double eps);

/// Exact GELU: x * Phi(x) with Phi the standard normal CDF (erf form).
Tensor gelu(const Tensor& x);

/// min(max(x, 0), 6).
Tensor relu6(const Tensor& x);

/// Align-corners bilinear resampling of the last two axes of a rank-4
/// tensor: endpoints map to endpoints; a single-pixel axis broadcasts.
Tensor bilinear_interpolate(const Tensor& x, int64_t out_h, int64_t out_w);

} // namespace mew
