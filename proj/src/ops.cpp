#include "gsmax/ops.hpp"

#include <algorithm>
#include <cmath>

#include "gsmax/errors.hpp"

namespace gsmax {

ConvGeometry conv_geometry(std::size_t in_h, std::size_t in_w, std::size_t kernel,
                           std::size_t stride, Padding padding) {
  if (kernel == 0 || stride == 0) throw ShapeError("kernel and stride must be positive");
  ConvGeometry g;
  if (padding == Padding::valid) {
    if (kernel > in_h || kernel > in_w) {
      throw ShapeError("kernel " + std::to_string(kernel) + " larger than input " +
                       std::to_string(in_h) + "x" + std::to_string(in_w));
    }
    g.out_h = (in_h - kernel) / stride + 1;
    g.out_w = (in_w - kernel) / stride + 1;
    return g;
  }
  g.out_h = (in_h + stride - 1) / stride;
  g.out_w = (in_w + stride - 1) / stride;
  const auto total = [&](std::size_t out, std::size_t in) {
    const std::size_t need = (out - 1) * stride + kernel;
    return need > in ? need - in : 0;
  };
  const std::size_t ph = total(g.out_h, in_h);
  const std::size_t pw = total(g.out_w, in_w);
  if (kernel > in_h + ph || kernel > in_w + pw) throw ShapeError("kernel larger than padded input");
  g.pad_top = ph / 2;
  g.pad_left = pw / 2;
  return g;
}

namespace {

struct ConvDims {
  std::size_t n, ic, ih, iw, oc, k, oh, ow, stride;
  std::ptrdiff_t pad_top, pad_left;
};

ConvDims conv_dims(const Shape& input, const Shape& filters, std::size_t stride, Padding padding) {
  if (input.size() != 4 || filters.size() != 4) {
    throw ShapeError("conv2d expects NCHW input and OIHW filters");
  }
  if (input[1] != filters[1]) {
    throw ShapeError("conv2d: input has " + std::to_string(input[1]) + " channels, filters expect " +
                     std::to_string(filters[1]));
  }
  if (filters[2] != filters[3]) throw ShapeError("conv2d: only square kernels");
  const auto g = conv_geometry(input[2], input[3], filters[2], stride, padding);
  return {input[0], input[1], input[2], input[3], filters[0], filters[2], g.out_h, g.out_w, stride,
          static_cast<std::ptrdiff_t>(g.pad_top), static_cast<std::ptrdiff_t>(g.pad_left)};
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& filters, std::size_t stride,
                      Padding padding) {
  const auto d = conv_dims(input.shape(), filters.shape(), stride, padding);
  Tensor out({d.n, d.oc, d.oh, d.ow});
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t o = 0; o < d.oc; ++o) {
      for (std::size_t y = 0; y < d.oh; ++y) {
        for (std::size_t x = 0; x < d.ow; ++x) {
          double acc = 0.0;
          for (std::size_t c = 0; c < d.ic; ++c) {
            for (std::size_t ky = 0; ky < d.k; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(y * d.stride + ky) - d.pad_top;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.ih)) continue;
              for (std::size_t kx = 0; kx < d.k; ++kx) {
                const auto ix = static_cast<std::ptrdiff_t>(x * d.stride + kx) - d.pad_left;
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.iw)) continue;
                acc += input.at(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) *
                       filters.at(o, c, ky, kx);
              }
            }
          }
          out.at(n, o, y, x) = acc;
        }
      }
    }
  }
  return out;
}

Tensor conv2d_backward_input(const Tensor& grad_out, const Tensor& filters, const Shape& input_shape,
                             std::size_t stride, Padding padding) {
  const auto d = conv_dims(input_shape, filters.shape(), stride, padding);
  if (grad_out.shape() != Shape{d.n, d.oc, d.oh, d.ow}) throw ShapeError("conv2d backward: bad grad shape");
  Tensor grad(input_shape);
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t o = 0; o < d.oc; ++o) {
      for (std::size_t y = 0; y < d.oh; ++y) {
        for (std::size_t x = 0; x < d.ow; ++x) {
          const double g = grad_out.at(n, o, y, x);
          for (std::size_t c = 0; c < d.ic; ++c) {
            for (std::size_t ky = 0; ky < d.k; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(y * d.stride + ky) - d.pad_top;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.ih)) continue;
              for (std::size_t kx = 0; kx < d.k; ++kx) {
                const auto ix = static_cast<std::ptrdiff_t>(x * d.stride + kx) - d.pad_left;
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.iw)) continue;
                grad.at(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix)) +=
                    g * filters.at(o, c, ky, kx);
              }
            }
          }
        }
      }
    }
  }
  return grad;
}

Tensor conv2d_backward_filters(const Tensor& grad_out, const Tensor& input, const Shape& filter_shape,
                               std::size_t stride, Padding padding) {
  const auto d = conv_dims(input.shape(), filter_shape, stride, padding);
  if (grad_out.shape() != Shape{d.n, d.oc, d.oh, d.ow}) throw ShapeError("conv2d backward: bad grad shape");
  Tensor grad(filter_shape);
  for (std::size_t n = 0; n < d.n; ++n) {
    for (std::size_t o = 0; o < d.oc; ++o) {
      for (std::size_t y = 0; y < d.oh; ++y) {
        for (std::size_t x = 0; x < d.ow; ++x) {
          const double g = grad_out.at(n, o, y, x);
          for (std::size_t c = 0; c < d.ic; ++c) {
            for (std::size_t ky = 0; ky < d.k; ++ky) {
              const auto iy = static_cast<std::ptrdiff_t>(y * d.stride + ky) - d.pad_top;
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(d.ih)) continue;
              for (std::size_t kx = 0; kx < d.k; ++kx) {
                const auto ix = static_cast<std::ptrdiff_t>(x * d.stride + kx) - d.pad_left;
                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(d.iw)) continue;
                grad.at(o, c, ky, kx) +=
                    g * input.at(n, c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
              }
            }
          }
        }
      }
    }
  }
  return grad;
}

MaxPool maxpool2d_forward(const Tensor& input, std::size_t kernel, std::size_t stride) {
  if (input.rank() != 4) throw ShapeError("maxpool2d expects NCHW input");
  const auto g = conv_geometry(input.dim(2), input.dim(3), kernel, stride, Padding::valid);
  const std::size_t n_ = input.dim(0), c_ = input.dim(1), h_ = input.dim(2), w_ = input.dim(3);
  MaxPool r{Tensor({n_, c_, g.out_h, g.out_w}), {}};
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < n_; ++n) {
    for (std::size_t c = 0; c < c_; ++c) {
      const std::size_t plane = (n * c_ + c) * h_ * w_;
      for (std::size_t y = 0; y < g.out_h; ++y) {
        for (std::size_t x = 0; x < g.out_w; ++x, ++o) {
          std::size_t best = plane + (y * stride) * w_ + x * stride;
          for (std::size_t ky = 0; ky < kernel; ++ky) {
            for (std::size_t kx = 0; kx < kernel; ++kx) {
              const std::size_t i = plane + (y * stride + ky) * w_ + (x * stride + kx);
              // Row-major scan meets lower flat indices first.
              if (input[i] > input[best]) best = i;
            }
          }
          r.output[o] = input[best];
          r.argmax[o] = best;
        }
      }
    }
  }
  return r;
}

Tensor maxpool2d_backward(const Tensor& grad_out, std::span<const std::size_t> argmax,
                          const Shape& input_shape) {
  if (argmax.size() != grad_out.size()) throw StateError("maxpool2d_backward: argmax does not match");
  Tensor grad(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    if (argmax[o] >= grad.size()) throw StateError("maxpool2d_backward: stale argmax index");
    grad[argmax[o]] += grad_out[o];
  }
  return grad;
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax expects N x C");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t i = 0; i < n; ++i) {
    double m = logits.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += (p.at(i, j) = std::exp(logits.at(i, j) - m));
    for (std::size_t j = 0; j < c; ++j) p.at(i, j) /= z;
  }
  return p;
}

LossResult softmax_xent_loss(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2) throw ShapeError("softmax_xent_loss expects N x C logits");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) throw ShapeError("softmax_xent_loss: label count differs from batch");
  for (auto y : labels) {
    if (y >= c) throw LabelError("label " + std::to_string(y) + " outside " + std::to_string(c) + " classes");
  }
  LossResult r{0.0, Tensor(logits.shape())};
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = logits.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) m = std::max(m, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - m);
    const double log_z = m + std::log(z);
    r.loss += log_z - logits.at(i, labels[i]);
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(logits.at(i, j) - log_z);
      r.grad.at(i, j) = (p - (j == labels[i] ? 1.0 : 0.0)) * inv_n;
    }
  }
  r.loss *= inv_n;
  return r;
}

std::vector<std::size_t> argmax_rows(const Tensor& x) {
  if (x.rank() != 2) throw ShapeError("argmax_rows expects a matrix");
  std::vector<std::size_t> out(x.dim(0));
  for (std::size_t i = 0; i < x.dim(0); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < x.dim(1); ++j) {
      if (x.at(i, j) > x.at(i, best)) best = j;
    }
    out[i] = best;
  }
  return out;
}

}  // namespace gsmax
