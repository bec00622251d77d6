#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gsmax/hierarchy.hpp"
#include "gsmax/prng.hpp"
#include "gsmax/tensor.hpp"

namespace gsmax {

enum class Split { train, test };

/// Samples (N x D or N x C x H x W) with paired super/sub labels.
struct HierarchicalDataset {
  Tensor samples;
  std::vector<std::size_t> super_labels;
  std::vector<std::size_t> sub_labels;
  Hierarchy hierarchy;
  Split split = Split::train;

  std::size_t size() const { return super_labels.size(); }
  Shape sample_shape() const;

  /// Every sample satisfies sub_to_super[sub] == super, label counts match
  /// the sample count. Throws LabelError otherwise.
  void validate() const;

  /// Subset by index, preserving order.
  HierarchicalDataset subset(std::span<const std::size_t> rows) const;
};

struct SyntheticSpec {
  std::vector<std::size_t> subs_per_super{3, 3, 3, 3};
  std::size_t dim = 32;
  double super_separation = 10.0;
  double sub_separation = 4.0;
  double noise_sigma = 1.0;
  std::size_t n_per_sub = 300;
  std::size_t n_test_per_sub = 150;
  std::uint64_t seed = 1;

  /// Throws ConfigError unless super_separation > sub_separation > 0,
  /// noise_sigma > 0 and all counts are positive.
  void validate() const;
};

struct SyntheticData {
  HierarchicalDataset train;
  HierarchicalDataset test;
  Tensor super_centers;  // S x D
  Tensor sub_centers;    // K x D
};

/// Super centres uniform on the sphere of radius super_separation, sub
/// centres at a uniform direction and distance sub_separation from their
/// super centre, samples = sub centre + N(0, noise_sigma^2 I). Centres are
/// drawn first, then the training samples, then the test samples, all from
/// one Prng seeded with spec.seed. Samples are ordered by sub-class.
SyntheticData gen_hierarchical_gaussians(const SyntheticSpec& spec);

/// Counter-clockwise rotation by r * 90 degrees (r reduced mod 4) as an
/// index permutation: r = 1 maps [[1,2],[3,4]] to [[2,4],[1,3]].
Tensor rotate_patch90(const Tensor& patch, int r);

struct EdgeDataset {
  Tensor patches;  // N x 1 x P x P
  std::vector<std::size_t> prototype;
  std::vector<int> rotation;
  std::vector<Tensor> prototypes;  // P x P each, noise-free
};

inline constexpr std::size_t kEdgePrototypeCount = 2;

/// Step-edge prototypes (vertical, diagonal) and all four 90-degree
/// rotations of each, n_per_orbit noisy copies per (prototype, rotation).
/// Pixels are 0 (dark side) / 1 (bright side) plus N(0, noise_sigma^2).
EdgeDataset gen_rotated_edges(std::size_t n_per_orbit, std::size_t patch_size, double noise_sigma,
                              std::uint64_t seed);

/// Super label = prototype, sub label = 4 * prototype + rotation.
HierarchicalDataset edges_as_hierarchical(const EdgeDataset& edges);

/// Per-image global contrast normalisation: (x - mean) / max(std, epsilon)
/// with the population standard deviation. For a batch (rank >= 2) every
/// sample along axis 0 is normalised on its own.
Tensor gcn(const Tensor& image, double epsilon);
Tensor gcn_batch(const Tensor& batch, double epsilon);

enum class CifarVariant { cifar10, cifar100 };

inline constexpr std::size_t kCifarPixels = 3 * 32 * 32;

/// Decodes the CIFAR binary layout: per record one label byte (cifar10)
/// or coarse then fine byte (cifar100), then 1024 R, 1024 G, 1024 B bytes,
/// each plane 32 x 32 row-major. Pixels map to value / 255.
/// cifar100: super = coarse, sub = fine; cifar10: a single super-class,
/// sub = label. Sub-classes absent from the file are Hierarchy::kUnobserved.
/// Throws FormatError on a partial record, a label out of range, or a fine
/// label seen under two coarse labels.
HierarchicalDataset decode_cifar(std::span<const std::uint8_t> bytes, CifarVariant variant);
HierarchicalDataset read_cifar_binary(const std::filesystem::path& path, CifarVariant variant);

/// Random horizontal flip (probability 0.5) then translation by
/// (dy, dx) uniform in [-max_shift, max_shift]^2 with zero fill.
Tensor augment(const Tensor& image, std::size_t max_shift, Prng& rng);

/// The deterministic core of augment: out(y, x) = in'(y - dy, x - dx) where
/// in' is the optionally flipped input, zero outside.
Tensor augment_fixed(const Tensor& image, bool flip, int dy, int dx);

/// augment applied to every sample of an N x C x H x W batch.
Tensor augment_batch(const Tensor& batch, std::size_t max_shift, Prng& rng);

/// Dataset dump: samples and labels as chunks ("samples", "super_labels",
/// "sub_labels") plus a hierarchy sidecar at <path>.hierarchy.
void write_dataset(const std::filesystem::path& path, const HierarchicalDataset& data);
HierarchicalDataset read_dataset(const std::filesystem::path& path);

}  // namespace gsmax
