#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "gsmax/groups.hpp"
#include "gsmax/gsmax.hpp"
#include "gsmax/ops.hpp"
#include "gsmax/prng.hpp"
#include "gsmax/tensor.hpp"

namespace gsmax {

enum class LayerKind {
  dense,
  conv2d,
  maxpool2d,
  relu,
  dropout,
  gsmax,
  group_maxout,
  softmax_xent_head,
};

inline constexpr std::array kAllLayerKinds = {
    LayerKind::dense,   LayerKind::conv2d, LayerKind::maxpool2d,    LayerKind::relu,
    LayerKind::dropout, LayerKind::gsmax,  LayerKind::group_maxout, LayerKind::softmax_xent_head,
};

std::string_view to_string(LayerKind kind);

struct DenseSpec {
  std::size_t units = 0;
};

struct Conv2dSpec {
  std::size_t filters = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  Padding padding = Padding::valid;
};

struct MaxPool2dSpec {
  std::size_t kernel = 0;
  std::size_t stride = 0;
};

struct ReluSpec {};

struct DropoutSpec {
  double keep = 1.0;
};

/// Grouping for gsmax / group_maxout layers: either an explicit GroupSpec or
/// equal groups of `uniform_size` channels resolved against the layer's
/// channel count when the network is built.
struct GroupingSpec {
  GroupSpec groups;
  std::size_t uniform_size = 0;

  GroupSpec resolve(std::size_t channels) const;
  std::string to_string() const;
};

struct GsmaxSpec {
  GroupingSpec grouping;
  GsmaxParams params;
};

struct GroupMaxoutSpec {
  GroupingSpec grouping;
};

/// Terminal marker: the layer's output (unchanged logits) is what
/// softmax_xent_loss is applied to.
struct SoftmaxXentHeadSpec {};

using LayerSpec = std::variant<DenseSpec, Conv2dSpec, MaxPool2dSpec, ReluSpec, DropoutSpec, GsmaxSpec,
                               GroupMaxoutSpec, SoftmaxXentHeadSpec>;

LayerKind kind_of(const LayerSpec& spec);

/// Textual form used by config files, e.g. "dense:64", "conv:8:3:1:same",
/// "maxpool:2:2", "relu", "dropout:0.5", "gsmax:3@0.5" (groups of 3),
/// "gsmax:{0,2} {1,3}@1", "group_maxout:3", "softmax_xent_head".
std::string describe(const LayerSpec& spec);

/// Inverse of describe(). A bare "gsmax" / "group_maxout" takes
/// `default_grouping`; a bare "gsmax" takes `default_temperature`.
/// Throws ConfigError on malformed tokens.
LayerSpec parse_layer(std::string_view token, const GroupingSpec& default_grouping = {},
                      double default_temperature = 1.0);

/// Per-sample output shape for a per-sample input shape (no batch axis).
/// Throws ShapeError or ConfigError for incompatible combinations.
Shape infer_output_shape(const LayerSpec& spec, const Shape& input);

/// Scratch a layer keeps from forward for its backward pass.
struct LayerCache {
  std::vector<std::size_t> argmax;
  Tensor mask;
};

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

  /// x and the result carry a leading batch axis.
  virtual Tensor forward(const Tensor& x, bool training, Prng& rng, LayerCache& cache) const = 0;

  /// Given the forward input x, its output y, the cache and dL/dy, returns
  /// dL/dx and writes one gradient per parameter into param_grads.
  virtual Tensor backward(const Tensor& x, const Tensor& y, const LayerCache& cache,
                          const Tensor& grad_y, std::vector<Tensor>& param_grads) const = 0;

  virtual std::vector<std::string> param_names() const { return {}; }

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

 protected:
  std::vector<Tensor> params_;
};

/// Instantiate a layer for the given per-sample input shape. Parameters are
/// drawn with init_scaled_uniform (weights) and zero (biases).
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input, Prng& init_rng);

}  // namespace gsmax
