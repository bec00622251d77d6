#include "gsmax/train.hpp"

#include <cmath>
#include <numeric>

#include "gsmax/errors.hpp"
#include "gsmax/ops.hpp"

namespace gsmax {

void TrainConfig::validate() const {
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("weight_decay must be >= 0");
  if (!(lr_decay_factor > 0.0) || !std::isfinite(lr_decay_factor)) throw ConfigError("lr_decay_factor must be positive");
  if (lr_decay_every_epochs < 0) throw ConfigError("lr_decay_every_epochs must be >= 0");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
}

double learning_rate(const TrainConfig& config, int epoch) {
  if (config.lr_decay_every_epochs <= 0) return config.base_lr;
  const int steps = epoch / config.lr_decay_every_epochs;
  double lr = config.base_lr;
  for (int i = 0; i < steps; ++i) lr *= config.lr_decay_factor;
  return lr;
}

void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads, std::span<Tensor> velocity,
                       const TrainConfig& config, int epoch) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw ShapeError("sgd_momentum_step: parameter, gradient and velocity counts differ");
  }
  const double lr = learning_rate(config, epoch);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = params[k];
    const auto& g = grads[k];
    auto& v = velocity[k];
    if (p.shape() != g.shape() || p.shape() != v.shape()) {
      throw ShapeError("sgd_momentum_step: shape mismatch for tensor " + std::to_string(k));
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      v[i] = config.momentum * v[i] - lr * (g[i] + config.weight_decay * p[i]);
      p[i] += v[i];
    }
  }
}

SgdMomentum::SgdMomentum(const Network& net) {
  velocity_.resize(net.size());
  for (std::size_t i = 0; i < net.size(); ++i) {
    for (const auto& p : net.layer(i).params()) velocity_[i].emplace_back(p.shape());
  }
}

void SgdMomentum::step(Network& net, const Gradients& grads, const TrainConfig& config, int epoch) {
  if (grads.params.size() != net.size()) throw ShapeError("gradients do not match network");
  for (std::size_t i = 0; i < net.size(); ++i) {
    sgd_momentum_step(net.layer(i).params(), grads.params[i], velocity_[i], config, epoch);
  }
}

double train_epoch(Network& net, SgdMomentum& optimizer, const Tensor& inputs, std::span<const std::size_t> labels,
                   const TrainConfig& config, int epoch, Prng& rng, const BatchTransform& transform) {
  if (net.size() == 0 || net.layer(net.size() - 1).kind() != LayerKind::softmax_xent_head) {
    throw ConfigError("training needs a network ending in softmax_xent_head");
  }
  const std::size_t n = inputs.dim(0);
  if (labels.size() != n) throw ShapeError("train_epoch: label count differs from sample count");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order.begin(), order.end(), rng);

  double total = 0.0;
  for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
    const std::size_t end = std::min(n, begin + config.batch_size);
    const std::span<const std::size_t> idx(order.data() + begin, end - begin);
    Tensor x = inputs.gather_rows(idx);
    if (transform) x = transform(x, rng);
    std::vector<std::size_t> y(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) y[k] = labels[idx[k]];

    const auto trace = net.forward(x, true, rng);
    auto loss = softmax_xent_loss(trace.activations.back(), y);
    if (!std::isfinite(loss.loss)) throw NumericError("training loss is not finite");
    const auto grads = net.backward(trace, loss.grad);
    optimizer.step(net, grads, config, epoch);
    total += loss.loss * static_cast<double>(idx.size());
  }
  return total / static_cast<double>(n);
}

double classification_accuracy(const Network& net, const Tensor& inputs, std::span<const std::size_t> labels,
                               std::size_t workers) {
  const auto out = net.predict(inputs, workers);
  const auto pred = argmax_rows(out.reshaped({out.dim(0), out.size() / out.dim(0)}));
  if (pred.size() != labels.size()) throw ShapeError("classification_accuracy: label count differs");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace gsmax
