#pragma once

#include <cstddef>
#include <vector>

#include "gsmax/groups.hpp"
#include "gsmax/tensor.hpp"

namespace gsmax {

struct GsmaxParams {
  double temperature = 1.0;
};

/// Group softmax with a ground state.
///
/// For every sample (and every spatial position when z is N x C x H x W) and
/// every group g:
///
///   p_i = exp(z_i / T) / (1 + sum_{k in g} exp(z_k / T)),   i in g
///
/// The "1" is the ground state, i.e. the configuration where no unit of the
/// group is on. Its logit is fixed at 0 and is not divided by T. All logits
/// are shifted by m = max(0, max_k z_k / T) before exponentiation so that the
/// ground-state weight becomes exp(-m).
///
/// At T = 1 this equals the exact posterior p(h_i = 1 | v) of a Boltzmann
/// machine whose within-group hidden couplings are -infinity, with
/// z = b + v^T W.
///
/// Throws NumericError on non-finite input, ShapeError when the channel axis
/// does not match the spec.
Tensor gsmax_forward(const Tensor& z, const GroupSpec& spec, const GsmaxParams& params);

/// Vector-Jacobian product of gsmax_forward given its output p:
///   dL/dz_j = (1/T) * p_j * (u_j - sum_{i in g} u_i p_i)
Tensor gsmax_backward(const Tensor& p, const Tensor& upstream, const GroupSpec& spec,
                      const GsmaxParams& params);

/// Probability of the ground state per group: 1 / (1 + sum_k exp(z_k / T)).
/// Output is N x G (or N x G x H x W).
Tensor ground_state_prob(const Tensor& z, const GroupSpec& spec, const GsmaxParams& params);

struct GroupMaxout {
  Tensor output;
  /// Flat index into the input tensor of each output element's winner.
  std::vector<std::size_t> argmax;
};

/// Per-group maximum over channels, ties to the lowest channel index within
/// the group's member order.
GroupMaxout group_maxout_forward(const Tensor& x, const GroupSpec& spec);

/// Routes each upstream value to its winner; everything else gets 0.
/// Throws StateError when the indices cannot belong to a forward pass over
/// an input of input_shape.
Tensor group_maxout_backward(const Tensor& upstream, const std::vector<std::size_t>& argmax,
                             const GroupSpec& spec, const Shape& input_shape);

namespace detail {

/// Layout of a channel axis inside a rank-2 or rank-4 tensor: element
/// (n, c, s) lives at (n * channels + c) * inner + s.
struct ChannelLayout {
  std::size_t batch = 0;
  std::size_t channels = 0;
  std::size_t inner = 1;

  std::size_t index(std::size_t n, std::size_t c, std::size_t s) const {
    return (n * channels + c) * inner + s;
  }
};

ChannelLayout channel_layout(const Shape& shape, const GroupSpec& spec);

}  // namespace detail

}  // namespace gsmax
