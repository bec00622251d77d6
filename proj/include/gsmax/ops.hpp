#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gsmax/tensor.hpp"

namespace gsmax {

enum class Padding { valid, same };

struct ConvGeometry {
  std::size_t out_h = 0;
  std::size_t out_w = 0;
  std::size_t pad_top = 0;
  std::size_t pad_left = 0;
};

/// Output extents for a square kernel. valid: floor((H - k) / s) + 1;
/// same: ceil(H / s) with the total padding split top/left-first (the extra
/// row/column, if any, goes to the bottom/right).
ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t kernel,
                           std::size_t stride, Padding padding);

/// Cross-correlation of NCHW input with OIHW filters, summed over input
/// channels. For each output element the sum runs over (ic, kh, kw) in that
/// order starting from 0.
Tensor conv2d_forward(const Tensor& input, const Tensor& filters, std::size_t stride,
                      Padding padding);

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& filters, const Shape& input_shape,
                             std::size_t stride, Padding padding);

Tensor conv2d_backward_filters(const Tensor& grad_out, const Tensor& input, const Shape& filter_shape,
                               std::size_t stride, Padding padding);

struct MaxPool {
  Tensor output;
  /// Flat input index of each output's maximum.
  std::vector<std::size_t> argmax;
};

/// Window-wise maximum over valid windows; ties go to the lowest flat index.
MaxPool maxpool2d_forward(const Tensor& input, std::size_t kernel, std::size_t stride);

Tensor maxpool2d_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                          const Shape& input_shape);

struct LossResult {
  double loss = 0.0;
  Tensor grad;  // d loss / d logits
};

/// Mean cross-entropy of softmax(logits) against integer labels; the
/// gradient is (softmax - onehot) / batch. Throws LabelError for labels
/// outside [0, C).
LossResult softmax_xent_loss(const Tensor& logits, std::span<const std::size_t> labels);

/// Row-wise softmax of an N x C tensor.
Tensor softmax_rows(const Tensor& logits);

/// Index of the largest entry per row; ties to the lowest index.
std::vector<std::size_t> argmax_rows(const Tensor& x);

}  // namespace gsmax
