#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsmax/checkpoint.hpp"
#include "gsmax/layers.hpp"
#include "gsmax/prng.hpp"
#include "gsmax/tensor.hpp"

namespace gsmax {

/// Everything a forward pass produced: activations[0] is the input batch,
/// activations[i + 1] the output of layer i.
struct ForwardTrace {
  std::vector<Tensor> activations;
  std::vector<LayerCache> caches;
  bool training = false;
};

struct Gradients {
  /// params[i][j] is dL/d(parameter j of layer i).
  std::vector<std::vector<Tensor>> params;
  Tensor input;
};

/// Per-sample output shapes of a layer stack, checked layer by layer.
/// Allocates no parameters, so large architectures can be validated cheaply.
std::vector<Shape> infer_shapes(const Shape& input, std::span<const LayerSpec> specs);

class Network {
 public:
  /// input is the per-sample shape (no batch axis). Parameters are
  /// initialised from a Prng seeded with init_seed, layer by layer.
  Network(Shape input, std::vector<LayerSpec> specs, std::uint64_t init_seed);

  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const Shape& input_shape() const { return input_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  const Shape& output_shape(std::size_t layer) const { return shapes_.at(layer); }
  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }

  /// dropout draws its masks from rng only when training is true.
  ForwardTrace forward(const Tensor& batch, bool training, Prng& rng) const;

  /// Exact reverse-mode gradients for the loss whose gradient with respect
  /// to the last activation is loss_grad. Throws StateError unless trace
  /// comes from a training-mode forward of this network.
  Gradients backward(const ForwardTrace& trace, const Tensor& loss_grad) const;

  /// Eval-mode output of layer `upto` (inclusive), computed over contiguous
  /// shards of the batch on `workers` threads and concatenated in input
  /// order. Results do not depend on the worker count.
  Tensor evaluate(const Tensor& batch, std::size_t upto, std::size_t workers = 1) const;
  Tensor predict(const Tensor& batch, std::size_t workers = 1) const {
    return evaluate(batch, size() - 1, workers);
  }

  /// Index of the layer whose output feeds the first group_maxout layer,
  /// i.e. the penultimate representation used for concept discovery.
  std::optional<std::size_t> penultimate_layer() const;

  /// Parameters as named tensors "L<i>.<name>" for checkpoints.
  std::vector<NamedTensor> state() const;
  /// Throws FormatError if names or shapes do not match this network.
  void load_state(std::span<const NamedTensor> tensors);

 private:
  Shape input_;
  std::vector<LayerSpec> specs_;
  std::vector<Shape> shapes_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace gsmax
