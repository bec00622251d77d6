#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gsmax/app/config.hpp"
#include "gsmax/app/ppm.hpp"
#include "gsmax/data.hpp"
#include "gsmax/discovery.hpp"
#include "gsmax/gradcheck.hpp"
#include "gsmax/layers.hpp"
#include "gsmax/network.hpp"

namespace gsmax::app {

/// Independent streams derived from the run seed.
struct RunSeeds {
  std::uint64_t data = 0;
  std::uint64_t init = 0;
  std::uint64_t train = 0;
  std::uint64_t holdout = 0;
};
RunSeeds derive_seeds(std::uint64_t seed);

struct Datasets {
  HierarchicalDataset train;
  HierarchicalDataset test;
};

/// Generates or reads the configured data, applying gcn when enabled.
Datasets load_datasets(const RunConfig& config);

/// Labels the network is trained on (super-class by default).
const std::vector<std::size_t>& targets(const HierarchicalDataset& data, TrainTarget target);

/// Layer stack for the config: the preset or explicit layer tokens, with the
/// penultimate GSMax layer removed in control mode.
std::vector<LayerSpec> build_layers(const RunConfig& config, const Hierarchy& hierarchy, const Shape& input);

/// Drops the gsmax layer that feeds the first group_maxout layer. Throws
/// ConfigError if there is none.
std::vector<LayerSpec> control_variant(std::vector<LayerSpec> layers);

/// Network for a config, initialised from the derived init seed.
Network build_network(const RunConfig& config, const Hierarchy& hierarchy, const Shape& input);

/// Grouping of the penultimate neurons: the channel grouping of the first
/// group_maxout layer.
GroupSpec penultimate_groups(const Network& net);

inline constexpr const char* kMetricsFile = "metrics.csv";
inline constexpr const char* kCheckpointFile = "checkpoint.bin";
inline constexpr const char* kActivationFile = "activations.bin";
inline constexpr const char* kDiscoveryCsv = "discovery.csv";
inline constexpr const char* kDiscoveryJson = "discovery.json";

struct TrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
  std::filesystem::path activations;
  double final_train_accuracy = 0.0;
  double final_test_accuracy = 0.0;
};

/// Trains on the target labels, writing metrics.csv (epoch, train_loss,
/// train_super_acc, test_super_acc, lr), checkpoint.bin and the test-set
/// penultimate activations (activations.bin plus hierarchy sidecar) to
/// config.output.
TrainResult cmd_train(const RunConfig& config);

struct DiscoverOptions {
  /// Defaults to <output>/checkpoint.bin.
  std::optional<std::filesystem::path> checkpoint;
  /// Run on an activation dump instead of a network forward pass.
  std::optional<std::filesystem::path> dump;
  /// discovery.json of a run to compare against (control_delta).
  std::optional<std::filesystem::path> baseline;
};

struct DiscoverResult {
  AssociationTable table;
  DiscoverySummary summary;
  /// Sum of modal vote counts over the association-set size.
  double association_bound = 0.0;
};

/// Associates penultimate neurons with sub-classes on the test set (or on
/// one half of it in holdout mode, evaluating on the other half) and writes
/// discovery.csv / discovery.json to config.output.
DiscoverResult cmd_discover(const RunConfig& config, const DiscoverOptions& options);

/// Association on an activation dump alone. The neurons are split into
/// contiguous groups, one per super-class: sized like the hierarchy when
/// the neuron count equals the sub-class count, equal otherwise.
DiscoverResult discover_on_dump(const HierarchicalDataset& dump, bool holdout, std::uint64_t seed);

OracleCheckReport cmd_oracle_check(std::size_t trials, std::uint64_t seed);

/// Groups as columns, members stacked vertically, 1-pixel black separators
/// around every tile: width = G * w + G + 1, height = M * h + M + 1 with M
/// the largest group. filters: C_out x channels x h x w with channels 1
/// (grey) or 3 (RGB); each filter is min-max scaled to [0, 255] on its own
/// with lround, a constant filter becomes 128.
RgbImage filter_grid(const Tensor& filters, const GroupSpec& groups);

/// Filters of a dense or conv layer as C_out x channels x h x w, and the
/// grouping of the first gsmax/group_maxout layer that follows it (one
/// group per filter when there is none). Throws ConfigError for layers
/// without image-shaped filters.
struct LayerFilters {
  Tensor filters;
  GroupSpec groups;
};
LayerFilters layer_filters(const Network& net, std::size_t layer);

struct VisualizeResult {
  std::filesystem::path image;
  std::optional<SimilarityReport> similarity;
};

/// Writes the filter grid of `layer` as a binary PPM and, for two or more
/// groups, similarity.json next to it.
VisualizeResult cmd_visualize_filters(const RunConfig& config, const std::filesystem::path& checkpoint,
                                      std::size_t layer, const std::filesystem::path& out);

/// Writes train.bin and test.bin (dataset dumps) to config.output.
void cmd_gen_data(const RunConfig& config);

}  // namespace gsmax::app
