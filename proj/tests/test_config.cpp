#include <gtest/gtest.h>

#include <string>

#include "gsmax/app/commands.hpp"
#include "gsmax/app/config.hpp"
#include "gsmax/errors.hpp"

using namespace gsmax;
using namespace gsmax::app;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, EmptyTextGivesDefaults) {
  const auto c = parse_config("");
  EXPECT_EQ(c.seed, 1u);
  EXPECT_EQ(c.network.preset, "synthetic-mlp");
  EXPECT_EQ(c.train.base_lr, 0.1);
  EXPECT_EQ(c.train.momentum, 0.5);
  EXPECT_EQ(c.train.epochs, 50);
  EXPECT_EQ(c.train.batch_size, 32u);
  EXPECT_EQ(c.data.source, DataSource::synthetic);
}

TEST(Config, ParsesEverySection) {
  const auto c = parse_config(R"(# comment line
[experiment]
name = edges   # trailing comment
seed = 7
control = true
workers = 3

[data]
source = edges
n_per_orbit = 10
noise_sigma = 0.25

[network]
layers = conv:4:3:1:valid gsmax:2@0.5 maxpool:2:2 dense:8 gsmax:4@0.5 group_maxout:4 softmax_xent_head

[train]
epochs = 3
lr_decay_every = 2
target = sub
)");
  EXPECT_EQ(c.name, "edges");
  EXPECT_EQ(c.seed, 7u);
  EXPECT_TRUE(c.control);
  EXPECT_EQ(c.workers, 3u);
  EXPECT_EQ(c.data.source, DataSource::edges);
  EXPECT_EQ(c.data.edges.n_per_orbit, 10u);
  EXPECT_EQ(c.data.edges.noise_sigma, 0.25);
  EXPECT_TRUE(c.network.preset.empty());
  EXPECT_EQ(c.network.layers.size(), 7u);
  EXPECT_EQ(c.train.lr_decay_every_epochs, 2);
  EXPECT_EQ(c.target, TrainTarget::sub);
}

TEST(Config, ErrorsCarryLineNumbers) {
  EXPECT_NE(error_of("[experiment]\nseed = 1\nbogus = 2\n").find("line 3"), std::string::npos);
  EXPECT_NE(error_of("\n[nope]\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\n").find("line 1"), std::string::npos);
  EXPECT_NE(error_of("[train]\nepochs = 1\nepochs = 2\n").find("line 3"), std::string::npos);
  EXPECT_NE(error_of("[train]\nepochs\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("[train]\nbase_lr = fast\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("[network]\npreset = appendix-a1\nlayers = relu\n").find("line 3"), std::string::npos);
  EXPECT_FALSE(error_of("[network]\ntemperature = 0\n").empty());
  EXPECT_FALSE(error_of("[data]\nsource = cifar100\n").empty());
}

TEST(Config, FormatRoundTrips) {
  auto c = parse_config("[data]\nsource = synthetic\nsubs_per_super = 2 3 4\nnoise_sigma = 0.3\n"
                        "[train]\nbase_lr = 0.05\nweight_decay = 0.0001\n");
  const auto text = format_config(c);
  EXPECT_EQ(format_config(parse_config(text)), text);
  const auto back = parse_config(text);
  EXPECT_EQ(back.data.synthetic.subs_per_super, (std::vector<std::size_t>{2, 3, 4}));
  EXPECT_EQ(back.train.weight_decay, 0.0001);
  c.network.preset.clear();
  c.network.layers = {"dense:12", "gsmax:3@0.5", "group_maxout:3", "softmax_xent_head"};
  EXPECT_EQ(parse_config(format_config(c)).network.layers, c.network.layers);
}

TEST(Config, ReadConfigReportsPath) {
  EXPECT_THROW(read_config("/nonexistent/run.cfg"), IoError);
}

TEST(Presets, SyntheticMlpAlignsGroupsWithSuperClasses) {
  const auto c = parse_config("");
  const auto h = Hierarchy::uniform(4, 3);
  const auto layers = build_layers(c, h, {32});
  const Network net({32}, layers, 1);
  EXPECT_EQ(penultimate_groups(net), GroupSpec::uniform(12, 3));
  EXPECT_EQ(net.output_shape(net.size() - 1), (Shape{4}));
  const std::vector<std::size_t> counts{2, 4};
  EXPECT_EQ(penultimate_groups(Network({32}, build_layers(c, Hierarchy::from_counts(counts), {32}), 1)),
            GroupSpec::contiguous(counts));
}

TEST(Presets, ControlDropsOnlyThePenultimateGsmax) {
  auto c = parse_config("");
  const auto h = Hierarchy::uniform(4, 3);
  const auto full = build_layers(c, h, {32});
  c.control = true;
  const auto ctrl = build_layers(c, h, {32});
  ASSERT_EQ(ctrl.size() + 1, full.size());
  std::size_t gsmax_full = 0, gsmax_ctrl = 0;
  for (const auto& l : full) gsmax_full += kind_of(l) == LayerKind::gsmax;
  for (const auto& l : ctrl) gsmax_ctrl += kind_of(l) == LayerKind::gsmax;
  EXPECT_EQ(gsmax_ctrl + 1, gsmax_full);
  EXPECT_THROW(control_variant({DenseSpec{2}, SoftmaxXentHeadSpec{}}), ConfigError);
}

TEST(Presets, EdgesAndAppendixShapes) {
  auto c = parse_config("[data]\nsource = edges\n[network]\npreset = edges-conv\n");
  const Network edges({1, 8, 8}, build_layers(c, Hierarchy::uniform(2, 4), {1, 8, 8}), 1);
  EXPECT_EQ(edges.output_shape(edges.size() - 1), (Shape{2}));
  c.network.preset = "appendix-a1";
  const auto a1 = build_layers(c, Hierarchy::uniform(20, 5), {3, 32, 32});
  const auto shapes = infer_shapes({3, 32, 32}, a1);
  EXPECT_EQ(shapes.back(), (Shape{20}));
  c.network.preset.clear();
  c.network.layers = {"dense:5", "softmax_xent_head"};
  EXPECT_THROW(build_layers(c, Hierarchy::uniform(2, 2), {4}), ConfigError);
}

TEST(Seeds, DerivedStreamsAreDistinctAndStable) {
  const auto a = derive_seeds(1), b = derive_seeds(1), c = derive_seeds(2);
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(a.holdout, b.holdout);
  EXPECT_NE(a.data, a.init);
  EXPECT_NE(a.init, a.train);
  EXPECT_NE(a.data, c.data);
  Prng p(1);
  EXPECT_EQ(a.data, p.next_u64());
  EXPECT_EQ(a.init, p.next_u64());
}
