#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "gsmax/data.hpp"
#include "gsmax/layers.hpp"
#include "gsmax/train.hpp"

namespace gsmax::app {

enum class DataSource { synthetic, edges, cifar10, cifar100 };
enum class TrainTarget { super, sub };

struct EdgeConfig {
  std::size_t n_per_orbit = 64;
  std::size_t test_per_orbit = 32;
  std::size_t patch_size = 8;
  double noise_sigma = 0.1;
};

struct DataConfig {
  DataSource source = DataSource::synthetic;
  SyntheticSpec synthetic;
  EdgeConfig edges;
  std::filesystem::path cifar_train;
  std::filesystem::path cifar_test;
  bool gcn = false;
  double gcn_epsilon = 1e-8;
  std::size_t augment_shift = 0;
};

struct NetworkConfig {
  /// synthetic-mlp, edges-conv, appendix-a1, or empty when `layers` is set.
  std::string preset = "synthetic-mlp";
  std::vector<std::string> layers;
  /// Grouping for bare gsmax / group_maxout tokens (0: one group per super).
  std::size_t group_size = 0;
  double temperature = 0.5;
  std::size_t hidden = 64;
};

struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 1;
  std::filesystem::path output = "out";
  DataConfig data;
  NetworkConfig network;
  TrainConfig train{.base_lr = 0.1, .momentum = 0.5, .epochs = 50, .batch_size = 32};
  TrainTarget target = TrainTarget::super;
  bool control = false;
  bool holdout = false;
  std::size_t workers = 1;

  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

/// Sectioned key = value text:
///
///   # comment
///   [experiment]   name, seed, output, control, holdout, workers
///   [data]         source, subs_per_super, dim, super_separation,
///                  sub_separation, noise_sigma, n_per_sub, n_test_per_sub,
///                  n_per_orbit, test_per_orbit, patch_size, train_path,
///                  test_path, gcn, gcn_epsilon, augment_shift
///   [network]      preset, layers, group_size, temperature, hidden
///   [train]        epochs, batch_size, base_lr, lr_decay_factor,
///                  lr_decay_every, momentum, weight_decay, target
///
/// Unknown sections or keys, repeated keys and malformed values raise
/// ConfigError with the 1-based line number.
RunConfig parse_config(std::string_view text);
RunConfig read_config(const std::filesystem::path& path);

/// Canonical text that parse_config maps back to the same RunConfig.
std::string format_config(const RunConfig& config);

std::string_view to_string(DataSource source);

}  // namespace gsmax::app
