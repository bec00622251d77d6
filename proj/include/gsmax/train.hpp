#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "gsmax/network.hpp"
#include "gsmax/prng.hpp"
#include "gsmax/tensor.hpp"

namespace gsmax {

struct TrainConfig {
  double base_lr = 0.1;
  double lr_decay_factor = 1.0;
  /// 0 disables the step schedule.
  int lr_decay_every_epochs = 0;
  double momentum = 0.0;
  double weight_decay = 0.0;
  int epochs = 1;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;

  /// Throws ConfigError if base_lr <= 0, momentum outside [0, 1),
  /// weight_decay < 0, epochs < 0 or batch_size == 0.
  void validate() const;
};

/// base_lr * decay_factor ^ floor(epoch / decay_every).
double learning_rate(const TrainConfig& config, int epoch);

/// In place, for every tensor k:
///   v <- momentum * v - lr(epoch) * (grad + weight_decay * param)
///   param <- param + v
void sgd_momentum_step(std::span<Tensor> params, std::span<const Tensor> grads, std::span<Tensor> velocity,
                       const TrainConfig& config, int epoch);

/// Velocity buffers for every parameter of a network.
class SgdMomentum {
 public:
  explicit SgdMomentum(const Network& net);

  void step(Network& net, const Gradients& grads, const TrainConfig& config, int epoch);

 private:
  std::vector<std::vector<Tensor>> velocity_;
};

/// Optional per-batch input transform (e.g. augmentation), applied in
/// training only.
using BatchTransform = std::function<Tensor(const Tensor&, Prng&)>;

/// One pass over (inputs, labels) in an order shuffled by rng, in minibatches
/// of config.batch_size. Returns the sample-weighted mean training loss.
/// The network must end in a softmax_xent_head.
double train_epoch(Network& net, SgdMomentum& optimizer, const Tensor& inputs, std::span<const std::size_t> labels,
                   const TrainConfig& config, int epoch, Prng& rng, const BatchTransform& transform = {});

/// Fraction of samples whose eval-mode argmax output equals the label.
double classification_accuracy(const Network& net, const Tensor& inputs, std::span<const std::size_t> labels,
                               std::size_t workers = 1);

}  // namespace gsmax
