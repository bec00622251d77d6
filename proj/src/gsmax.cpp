#include "gsmax/gsmax.hpp"

#include <algorithm>
#include <cmath>

#include "gsmax/errors.hpp"

namespace gsmax {

namespace detail {

ChannelLayout channel_layout(const Shape& shape, const GroupSpec& spec) {
  if (shape.size() != 2 && shape.size() != 4) {
    throw ShapeError("grouped ops take N x C or N x C x H x W, got " + shape_string(shape));
  }
  if (shape[1] != spec.channels()) {
    throw ShapeError("group spec covers " + std::to_string(spec.channels()) +
                     " channels, tensor has " + std::to_string(shape[1]));
  }
  ChannelLayout l{shape[0], shape[1], 1};
  if (shape.size() == 4) l.inner = shape[2] * shape[3];
  return l;
}

}  // namespace detail

namespace {

void check_temperature(const GsmaxParams& params) {
  if (!(params.temperature > 0.0) || !std::isfinite(params.temperature)) {
    throw ConfigError("gsmax temperature must be positive and finite");
  }
}

void check_finite(const Tensor& z) {
  if (!z.all_finite()) throw NumericError("gsmax: non-finite pre-activation");
}

Shape grouped_shape(const Shape& in, std::size_t groups) {
  Shape out = in;
  out[1] = groups;
  return out;
}

// Shared core: fills p (same layout as z) and, if requested, the ground-state
// probabilities (N x G [x H x W]).
void gsmax_core(const Tensor& z, const GroupSpec& spec, const GsmaxParams& params, Tensor* p,
                Tensor* ground) {
  check_temperature(params);
  const auto l = detail::channel_layout(z.shape(), spec);
  check_finite(z);
  const double inv_t = 1.0 / params.temperature;
  const std::size_t groups = spec.group_count();
  std::vector<double> w(spec.max_group_size());

  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t s = 0; s < l.inner; ++s) {
      for (std::size_t g = 0; g < groups; ++g) {
        const auto& members = spec.members(g);
        double m = 0.0;
        for (auto c : members) m = std::max(m, z[l.index(n, c, s)] * inv_t);
        const double ground_w = std::exp(-m);
        double denom = ground_w;
        for (std::size_t k = 0; k < members.size(); ++k) {
          w[k] = std::exp(z[l.index(n, members[k], s)] * inv_t - m);
          denom += w[k];
        }
        if (p) {
          for (std::size_t k = 0; k < members.size(); ++k) {
            (*p)[l.index(n, members[k], s)] = w[k] / denom;
          }
        }
        if (ground) (*ground)[(n * groups + g) * l.inner + s] = ground_w / denom;
      }
    }
  }
}

}  // namespace

Tensor gsmax_forward(const Tensor& z, const GroupSpec& spec, const GsmaxParams& params) {
  Tensor p(z.shape());
  gsmax_core(z, spec, params, &p, nullptr);
  return p;
}

Tensor ground_state_prob(const Tensor& z, const GroupSpec& spec, const GsmaxParams& params) {
  detail::channel_layout(z.shape(), spec);
  Tensor ground(grouped_shape(z.shape(), spec.group_count()));
  gsmax_core(z, spec, params, nullptr, &ground);
  return ground;
}

Tensor gsmax_backward(const Tensor& p, const Tensor& upstream, const GroupSpec& spec,
                      const GsmaxParams& params) {
  check_temperature(params);
  if (p.shape() != upstream.shape()) {
    throw ShapeError("gsmax_backward: output " + shape_string(p.shape()) + " vs upstream " +
                     shape_string(upstream.shape()));
  }
  const auto l = detail::channel_layout(p.shape(), spec);
  const double inv_t = 1.0 / params.temperature;
  Tensor grad(p.shape());
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t s = 0; s < l.inner; ++s) {
      for (const auto& members : spec.groups()) {
        double dot = 0.0;
        for (auto c : members) {
          const auto i = l.index(n, c, s);
          dot += upstream[i] * p[i];
        }
        for (auto c : members) {
          const auto i = l.index(n, c, s);
          grad[i] = inv_t * p[i] * (upstream[i] - dot);
        }
      }
    }
  }
  return grad;
}

GroupMaxout group_maxout_forward(const Tensor& x, const GroupSpec& spec) {
  const auto l = detail::channel_layout(x.shape(), spec);
  const std::size_t groups = spec.group_count();
  GroupMaxout r{Tensor(grouped_shape(x.shape(), groups)), {}};
  r.argmax.resize(r.output.size());
  for (std::size_t n = 0; n < l.batch; ++n) {
    for (std::size_t g = 0; g < groups; ++g) {
      const auto& members = spec.members(g);
      for (std::size_t s = 0; s < l.inner; ++s) {
        std::size_t best = l.index(n, members.front(), s);
        for (std::size_t k = 1; k < members.size(); ++k) {
          const auto i = l.index(n, members[k], s);
          if (x[i] > x[best]) best = i;
        }
        const auto o = (n * groups + g) * l.inner + s;
        r.output[o] = x[best];
        r.argmax[o] = best;
      }
    }
  }
  return r;
}

Tensor group_maxout_backward(const Tensor& upstream, const std::vector<std::size_t>& argmax,
                             const GroupSpec& spec, const Shape& input_shape) {
  const auto l = detail::channel_layout(input_shape, spec);
  if (upstream.shape() != grouped_shape(input_shape, spec.group_count())) {
    throw ShapeError("group_maxout_backward: upstream " + shape_string(upstream.shape()));
  }
  if (argmax.size() != upstream.size()) {
    throw StateError("group_maxout_backward: argmax indices do not match upstream");
  }
  Tensor grad(input_shape);
  const std::size_t groups = spec.group_count();
  for (std::size_t o = 0; o < argmax.size(); ++o) {
    const std::size_t i = argmax[o];
    // Winner must sit in the same sample, group and position as the output.
    const std::size_t s = o % l.inner;
    const std::size_t g = (o / l.inner) % groups;
    const std::size_t n = o / (l.inner * groups);
    if (i >= grad.size() || i % l.inner != s || i / (l.inner * l.channels) != n ||
        spec.group_of((i / l.inner) % l.channels) != g) {
      throw StateError("group_maxout_backward: stale argmax index");
    }
    grad[i] += upstream[o];
  }
  return grad;
}

}  // namespace gsmax
