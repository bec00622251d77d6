#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "gsmax/data.hpp"
#include "gsmax/errors.hpp"

using namespace gsmax;

namespace {

// One CIFAR record: label bytes then 3072 pixel bytes where pixel i of
// plane c is (c * 7 + i + seed) mod 256.
void append_record(std::vector<std::uint8_t>& out, std::vector<std::uint8_t> labels, std::uint8_t seed) {
  out.insert(out.end(), labels.begin(), labels.end());
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < 1024; ++i) out.push_back(static_cast<std::uint8_t>((c * 7 + i + seed) % 256));
}

double mean(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

TEST(Rotation, HandExampleAndGroupLaw) {
  const Tensor p = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(rotate_patch90(p, 1), Tensor::matrix({{2, 4}, {1, 3}}));
  EXPECT_EQ(rotate_patch90(p, 4), p);
  EXPECT_EQ(rotate_patch90(p, -1), rotate_patch90(p, 3));
  Prng rng(1);
  Tensor q({5, 5});
  for (auto& v : q.data()) v = rng.uniform01();
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) EXPECT_EQ(rotate_patch90(rotate_patch90(q, a), b), rotate_patch90(q, a + b));
}

TEST(Edges, LayoutAndNoiseFreeCopies) {
  const auto e = gen_rotated_edges(3, 6, 0.0, 1);
  EXPECT_EQ(e.patches.shape(), (Shape{24, 1, 6, 6}));
  ASSERT_EQ(e.prototypes.size(), kEdgePrototypeCount);
  for (std::size_t n = 0; n < 24; ++n) {
    const Tensor expected = rotate_patch90(e.prototypes[e.prototype[n]], e.rotation[n]);
    for (std::size_t i = 0; i < 36; ++i) ASSERT_EQ(e.patches[n * 36 + i], expected[i]);
  }
  const auto h = edges_as_hierarchical(e);
  h.validate();
  EXPECT_EQ(h.hierarchy, Hierarchy::uniform(2, 4));
  EXPECT_EQ(h.sub_labels[23], 4 * e.prototype[23] + static_cast<std::size_t>(e.rotation[23]));
  // The vertical edge is not invariant under a quarter turn.
  EXPECT_FALSE(rotate_patch90(e.prototypes[0], 1) == e.prototypes[0]);
  EXPECT_THROW(gen_rotated_edges(0, 6, 0.0, 1), ConfigError);
  EXPECT_THROW(gen_rotated_edges(1, 2, 0.0, 1), ConfigError);
  EXPECT_THROW(gen_rotated_edges(1, 6, -1.0, 1), ConfigError);
}

TEST(Gcn, ZeroMeanUnitStd) {
  Prng rng(2);
  Tensor img({3, 4, 4});
  for (auto& v : img.data()) v = rng.uniform(2.0, 5.0);
  const Tensor g = gcn(img, 1e-8);
  EXPECT_NEAR(mean(g.data()), 0.0, 1e-12);
  double ss = 0;
  for (double v : g.data()) ss += v * v;
  EXPECT_NEAR(ss / static_cast<double>(g.size()), 1.0, 1e-12);
  EXPECT_LT(max_abs_diff(gcn(g, 1e-8), g), 1e-12);
  EXPECT_EQ(gcn(Tensor({4}, 3.0), 1e-8), Tensor({4}, 0.0));
  EXPECT_THROW(gcn(img, 0.0), ConfigError);
}

TEST(Gcn, BatchNormalisesEachSample) {
  Prng rng(3);
  Tensor b({3, 2, 2});
  for (auto& v : b.data()) v = rng.uniform(-4.0, 4.0);
  const Tensor g = gcn_batch(b, 1e-8);
  for (std::size_t n = 0; n < 3; ++n) {
    const Tensor one = gcn(b.slice_rows(n, n + 1).reshaped({2, 2}), 1e-8);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(g[n * 4 + i], one[i]);
  }
}

TEST(Synthetic, DeterministicAndSeparable) {
  SyntheticSpec spec;
  spec.n_per_sub = 40;
  spec.n_test_per_sub = 40;
  const auto a = gen_hierarchical_gaussians(spec), b = gen_hierarchical_gaussians(spec);
  EXPECT_EQ(a.train.samples, b.train.samples);
  EXPECT_EQ(a.test.samples, b.test.samples);
  a.train.validate();
  EXPECT_EQ(a.train.samples.shape(), (Shape{480, 32}));
  EXPECT_EQ(a.test.split, Split::test);
  spec.seed = 2;
  EXPECT_FALSE(gen_hierarchical_gaussians(spec).train.samples == a.train.samples);

  // Nearest super-centre classification as an independent check on layout.
  std::size_t correct = 0;
  const auto& t = a.test;
  for (std::size_t n = 0; n < t.size(); ++n) {
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t s = 0; s < 4; ++s) {
      double d = 0;
      for (std::size_t j = 0; j < 32; ++j) d += std::pow(t.samples.at(n, j) - a.super_centers.at(s, j), 2);
      if (d < best_d) best_d = d, best = s;
    }
    correct += best == t.super_labels[n];
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(t.size()), 0.95);
}

TEST(Synthetic, TinyNoiseSitsOnTheSubCentres) {
  SyntheticSpec spec;
  spec.noise_sigma = 1e-6;
  spec.n_per_sub = 2;
  spec.n_test_per_sub = 1;
  const auto d = gen_hierarchical_gaussians(spec);
  for (std::size_t n = 0; n < d.train.size(); ++n) {
    const auto k = d.train.sub_labels[n];
    double dist = 0, to_super = 0;
    for (std::size_t j = 0; j < 32; ++j) {
      dist += std::pow(d.train.samples.at(n, j) - d.sub_centers.at(k, j), 2);
      to_super += std::pow(d.sub_centers.at(k, j) - d.super_centers.at(d.train.super_labels[n], j), 2);
    }
    EXPECT_LT(std::sqrt(dist), 1e-4);
    EXPECT_NEAR(std::sqrt(to_super), 4.0, 1e-9);
  }
  spec.sub_separation = 20.0;
  EXPECT_THROW(gen_hierarchical_gaussians(spec), ConfigError);
}

TEST(Cifar, Cifar100Records) {
  std::vector<std::uint8_t> bytes;
  append_record(bytes, {3, 41}, 0);
  append_record(bytes, {19, 99}, 5);
  const auto d = decode_cifar(bytes, CifarVariant::cifar100);
  EXPECT_EQ(d.samples.shape(), (Shape{2, 3, 32, 32}));
  EXPECT_EQ(d.super_labels, (std::vector<std::size_t>{3, 19}));
  EXPECT_EQ(d.sub_labels, (std::vector<std::size_t>{41, 99}));
  EXPECT_EQ(d.hierarchy.super_count, 20u);
  EXPECT_EQ(d.hierarchy.sub_count(), 100u);
  EXPECT_EQ(d.hierarchy.sub_to_super[41], 3u);
  EXPECT_EQ(d.hierarchy.sub_to_super[0], Hierarchy::kUnobserved);
  // Channel 1, row 2, column 5 of record 1: (7 + 69 + 5) / 255.
  EXPECT_EQ(d.samples.at(1, 1, 2, 5), 81.0 / 255.0);
  EXPECT_EQ(d.samples.at(0, 2, 31, 31), static_cast<double>((14 + 1023) % 256) / 255.0);
}

TEST(Cifar, Cifar10Records) {
  std::vector<std::uint8_t> bytes;
  append_record(bytes, {7}, 1);
  append_record(bytes, {0}, 2);
  const auto d = decode_cifar(bytes, CifarVariant::cifar10);
  EXPECT_EQ(d.hierarchy.super_count, 1u);
  EXPECT_EQ(d.sub_labels, (std::vector<std::size_t>{7, 0}));
  EXPECT_EQ(d.super_labels, (std::vector<std::size_t>{0, 0}));
  EXPECT_EQ(d.samples.at(0, 0, 0, 0), 1.0 / 255.0);
}

TEST(Cifar, MalformedFiles) {
  std::vector<std::uint8_t> bytes;
  append_record(bytes, {1, 2}, 0);
  auto cut = bytes;
  cut.pop_back();
  EXPECT_THROW(decode_cifar(cut, CifarVariant::cifar100), FormatError);
  auto bad = bytes;
  bad[0] = 20;
  EXPECT_THROW(decode_cifar(bad, CifarVariant::cifar100), FormatError);
  bad = bytes;
  bad[1] = 100;
  EXPECT_THROW(decode_cifar(bad, CifarVariant::cifar100), FormatError);
  append_record(bytes, {4, 2}, 0);  // fine 2 under a second coarse label
  EXPECT_THROW(decode_cifar(bytes, CifarVariant::cifar100), FormatError);
  std::vector<std::uint8_t> ten;
  append_record(ten, {10}, 0);
  EXPECT_THROW(decode_cifar(ten, CifarVariant::cifar10), FormatError);
  EXPECT_THROW(read_cifar_binary("/nonexistent/cifar.bin", CifarVariant::cifar10), IoError);
}

TEST(Augment, FixedTransforms) {
  Tensor img({1, 2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(augment_fixed(img, false, 0, 0), img);
  EXPECT_EQ(augment_fixed(img, true, 0, 0), Tensor({1, 2, 3}, {3, 2, 1, 6, 5, 4}));
  EXPECT_EQ(augment_fixed(augment_fixed(img, true, 0, 0), true, 0, 0), img);
  EXPECT_EQ(augment_fixed(img, false, 0, 1), Tensor({1, 2, 3}, {0, 1, 2, 0, 4, 5}));
  EXPECT_EQ(augment_fixed(img, false, -1, 0), Tensor({1, 2, 3}, {4, 5, 6, 0, 0, 0}));
}

TEST(Augment, RandomStaysWithinTheShiftRange) {
  Prng rng(4);
  Tensor img({1, 4, 4}, 1.0);
  for (int t = 0; t < 200; ++t) {
    const Tensor a = augment(img, 1, rng);
    double s = 0;
    for (double v : a.data()) s += v;
    EXPECT_GE(s, 9.0);  // at most one row and one column lost
  }
  EXPECT_THROW(augment(img, 4, rng), ConfigError);
  const Tensor batch({2, 1, 4, 4}, 1.0);
  EXPECT_EQ(augment_batch(batch, 0, rng), batch);
}

TEST(DatasetDump, RoundTrip) {
  SyntheticSpec spec;
  spec.n_per_sub = 2;
  spec.n_test_per_sub = 1;
  const auto d = gen_hierarchical_gaussians(spec).train;
  const auto path = std::filesystem::temp_directory_path() / "gsmax_test_dataset.bin";
  write_dataset(path, d);
  const auto back = read_dataset(path);
  EXPECT_EQ(back.samples, d.samples);
  EXPECT_EQ(back.super_labels, d.super_labels);
  EXPECT_EQ(back.sub_labels, d.sub_labels);
  EXPECT_EQ(back.hierarchy, d.hierarchy);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".hierarchy");
}

TEST(Dataset, SubsetAndValidation) {
  HierarchicalDataset d;
  d.samples = Tensor({3, 2}, {1, 2, 3, 4, 5, 6});
  d.super_labels = {0, 1, 1};
  d.sub_labels = {0, 2, 3};
  d.hierarchy = Hierarchy::uniform(2, 2);
  d.validate();
  const std::vector<std::size_t> rows{2, 0};
  const auto s = d.subset(rows);
  EXPECT_EQ(s.samples, Tensor({2, 2}, {5, 6, 1, 2}));
  EXPECT_EQ(s.sub_labels, (std::vector<std::size_t>{3, 0}));
  d.sub_labels[0] = 2;
  EXPECT_THROW(d.validate(), LabelError);
}
