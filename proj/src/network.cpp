#include "gsmax/network.hpp"

#include <algorithm>
#include <thread>

#include "gsmax/errors.hpp"

namespace gsmax {

std::vector<Shape> infer_shapes(const Shape& input, std::span<const LayerSpec> specs) {
  std::vector<Shape> shapes;
  Shape current = input;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    try {
      current = infer_output_shape(specs[i], current);
    } catch (const ShapeError& e) {
      throw ShapeError("layer " + std::to_string(i) + " (" + describe(specs[i]) + "): " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError("layer " + std::to_string(i) + " (" + describe(specs[i]) + "): " + e.what());
    }
    shapes.push_back(current);
  }
  for (std::size_t i = 0; i + 1 < specs.size(); ++i) {
    if (kind_of(specs[i]) == LayerKind::softmax_xent_head) {
      throw ConfigError("softmax_xent_head must be the last layer");
    }
  }
  return shapes;
}

Network::Network(Shape input, std::vector<LayerSpec> specs, std::uint64_t init_seed)
    : input_(std::move(input)), specs_(std::move(specs)) {
  if (input_.empty() || shape_size(input_) == 0) throw ShapeError("network input shape is empty");
  shapes_ = infer_shapes(input_, specs_);
  Prng rng(init_seed);
  const Shape* in = &input_;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    layers_.push_back(make_layer(specs_[i], *in, rng));
    in = &shapes_[i];
  }
}

Network::Network(const Network& other)
    : input_(other.input_), specs_(other.specs_), shapes_(other.shapes_) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

ForwardTrace Network::forward(const Tensor& batch, bool training, Prng& rng) const {
  if (batch.rank() != input_.size() + 1 || !std::equal(input_.begin(), input_.end(), batch.shape().begin() + 1)) {
    throw ShapeError("network expects samples of shape " + shape_string(input_) + ", got batch " +
                     shape_string(batch.shape()));
  }
  ForwardTrace t;
  t.training = training;
  t.activations.reserve(layers_.size() + 1);
  t.caches.resize(layers_.size());
  t.activations.push_back(batch);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    t.activations.push_back(layers_[i]->forward(t.activations.back(), training, rng, t.caches[i]));
  }
  return t;
}

Gradients Network::backward(const ForwardTrace& trace, const Tensor& loss_grad) const {
  if (trace.activations.size() != layers_.size() + 1 || trace.caches.size() != layers_.size()) {
    throw StateError("backward called without a matching forward pass");
  }
  if (!trace.training) throw StateError("backward needs a training-mode forward pass");
  if (loss_grad.shape() != trace.activations.back().shape()) {
    throw ShapeError("loss gradient " + shape_string(loss_grad.shape()) + " does not match output " +
                     shape_string(trace.activations.back().shape()));
  }
  Gradients g;
  g.params.resize(layers_.size());
  Tensor upstream = loss_grad;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    upstream = layers_[i]->backward(trace.activations[i], trace.activations[i + 1], trace.caches[i], upstream,
                                    g.params[i]);
  }
  g.input = std::move(upstream);
  return g;
}

Tensor Network::evaluate(const Tensor& batch, std::size_t upto, std::size_t workers) const {
  if (upto >= layers_.size()) throw ShapeError("evaluate: layer index out of range");
  const std::size_t n = batch.dim(0);
  const auto run = [&](const Tensor& part) {
    Prng unused(0);
    LayerCache cache;
    Tensor x = part;
    for (std::size_t i = 0; i <= upto; ++i) x = layers_[i]->forward(x, false, unused, cache);
    return x;
  };
  // Shape check happens once on the whole batch.
  if (batch.rank() != input_.size() + 1 || !std::equal(input_.begin(), input_.end(), batch.shape().begin() + 1)) {
    throw ShapeError("network expects samples of shape " + shape_string(input_) + ", got batch " +
                     shape_string(batch.shape()));
  }
  workers = std::clamp<std::size_t>(workers, 1, n);
  if (workers == 1) return run(batch);

  std::vector<Tensor> parts(workers);
  std::vector<std::thread> threads;
  const std::size_t chunk = (n + workers - 1) / workers;
  std::size_t used = 0;
  for (std::size_t w = 0; w < workers && w * chunk < n; ++w, ++used) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    threads.emplace_back([&, w, begin, end] { parts[w] = run(batch.slice_rows(begin, end)); });
  }
  for (auto& t : threads) t.join();
  parts.resize(used);
  return concat_rows(parts);
}

std::optional<std::size_t> Network::penultimate_layer() const {
  for (std::size_t i = 1; i < specs_.size(); ++i) {
    if (kind_of(specs_[i]) == LayerKind::group_maxout) return i - 1;
  }
  return std::nullopt;
}

std::vector<NamedTensor> Network::state() const {
  std::vector<NamedTensor> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto names = layers_[i]->param_names();
    for (std::size_t j = 0; j < names.size(); ++j) {
      out.push_back({"L" + std::to_string(i) + "." + names[j], layers_[i]->params()[j]});
    }
  }
  return out;
}

void Network::load_state(std::span<const NamedTensor> tensors) {
  std::size_t expected = 0;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto names = layers_[i]->param_names();
    for (std::size_t j = 0; j < names.size(); ++j, ++expected) {
      const auto& t = find_chunk(tensors, "L" + std::to_string(i) + "." + names[j]);
      if (t.shape() != layers_[i]->params()[j].shape()) {
        throw FormatError("checkpoint tensor L" + std::to_string(i) + "." + names[j] + " has shape " +
                          shape_string(t.shape()) + ", network expects " +
                          shape_string(layers_[i]->params()[j].shape()));
      }
    }
  }
  if (tensors.size() != expected) throw FormatError("checkpoint tensor count does not match network");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto names = layers_[i]->param_names();
    for (std::size_t j = 0; j < names.size(); ++j) {
      layers_[i]->params()[j] = find_chunk(tensors, "L" + std::to_string(i) + "." + names[j]);
    }
  }
}

}  // namespace gsmax
