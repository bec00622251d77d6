#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gsmax/errors.hpp"
#include "gsmax/gradcheck.hpp"
#include "gsmax/network.hpp"
#include "gsmax/ops.hpp"

using namespace gsmax;

namespace {

std::vector<LayerSpec> small_conv_net() {
  return {Conv2dSpec{4, 3, 1, Padding::same},
          GsmaxSpec{GroupingSpec{{}, 2}, {0.5}},
          MaxPool2dSpec{2, 2},
          DropoutSpec{0.7},
          DenseSpec{6},
          GsmaxSpec{GroupingSpec{{}, 3}, {1.0}},
          GroupMaxoutSpec{GroupingSpec{{}, 3}},
          SoftmaxXentHeadSpec{}};
}

Tensor random(const Shape& s, Prng& p) {
  Tensor t(s);
  for (auto& v : t.data()) v = p.uniform(-1.0, 1.0);
  return t;
}

}  // namespace

TEST(Network, ShapeInferenceAndPenultimate) {
  const Network net({1, 6, 6}, small_conv_net(), 1);
  EXPECT_EQ(net.output_shape(0), (Shape{4, 6, 6}));
  EXPECT_EQ(net.output_shape(2), (Shape{4, 3, 3}));
  EXPECT_EQ(net.output_shape(6), (Shape{2}));
  EXPECT_EQ(net.penultimate_layer(), std::optional<std::size_t>(5));
}

TEST(Network, HeadMustBeLast) {
  EXPECT_THROW(Network({4}, {SoftmaxXentHeadSpec{}, DenseSpec{2}}, 1), ConfigError);
}

TEST(Network, WholeNetworkGradientMatchesFiniteDifferences) {
  Network net({1, 6, 6}, small_conv_net(), 3);
  Prng data(4);
  const Tensor x = random({2, 1, 6, 6}, data);
  const std::vector<std::size_t> labels{0, 1};
  Prng rng(5);
  const Prng state = rng;
  const auto trace = net.forward(x, true, rng);
  const auto loss = softmax_xent_loss(trace.activations.back(), labels);
  const auto grads = net.backward(trace, loss.grad);

  const auto eval = [&](const Network& n, const Tensor& in) {
    Prng r = state;
    return softmax_xent_loss(n.forward(in, true, r).activations.back(), labels).loss;
  };
  double worst = 0.0;
  for (std::size_t l = 0; l < net.size(); ++l) {
    auto& params = net.layer(l).params();
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (std::size_t i = 0; i < params[p].size(); ++i) {
        const double orig = params[p][i];
        params[p][i] = orig + 1e-5;
        const double up = eval(net, x);
        params[p][i] = orig - 1e-5;
        const double down = eval(net, x);
        params[p][i] = orig;
        worst = std::max(worst, relative_error(grads.params[l][p][i], (up - down) / 2e-5));
      }
    }
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor a = x, b = x;
    a[i] += 1e-5;
    b[i] -= 1e-5;
    worst = std::max(worst, relative_error(grads.input[i], (eval(net, a) - eval(net, b)) / 2e-5));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Network, BackwardNeedsATrainingTrace) {
  const Network net({4}, {DenseSpec{2}, SoftmaxXentHeadSpec{}}, 1);
  Prng rng(1);
  const auto trace = net.forward(Tensor({3, 4}, 0.5), false, rng);
  EXPECT_THROW(net.backward(trace, Tensor({3, 2})), StateError);
}

TEST(Network, EvaluateIsIndependentOfWorkerCount) {
  const Network net({1, 6, 6}, small_conv_net(), 7);
  Prng data(8);
  const Tensor x = random({37, 1, 6, 6}, data);
  const Tensor one = net.evaluate(x, 5, 1);
  for (std::size_t w : {2, 3, 4, 8, 64}) EXPECT_EQ(net.evaluate(x, 5, w), one) << w;
}

TEST(Network, SameSeedSameInitialisation) {
  const Network a({1, 6, 6}, small_conv_net(), 9), b({1, 6, 6}, small_conv_net(), 9), c({1, 6, 6}, small_conv_net(), 10);
  const auto sa = a.state(), sb = b.state(), sc = c.state();
  ASSERT_EQ(sa.size(), sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_EQ(sa[i].tensor, sb[i].tensor);
  EXPECT_FALSE(sa[0].tensor == sc[0].tensor);
}

TEST(Network, StateRoundTrip) {
  const Network a({1, 6, 6}, small_conv_net(), 11);
  Network b({1, 6, 6}, small_conv_net(), 12);
  b.load_state(a.state());
  Prng data(1);
  const Tensor x = random({3, 1, 6, 6}, data);
  EXPECT_EQ(a.predict(x), b.predict(x));
  auto bad = a.state();
  bad.pop_back();
  EXPECT_THROW(b.load_state(bad), FormatError);
  bad = a.state();
  bad[0].tensor = Tensor({1});
  EXPECT_THROW(b.load_state(bad), FormatError);
}

TEST(Network, CopyIsDeep) {
  const Network a({4}, {DenseSpec{2}, SoftmaxXentHeadSpec{}}, 1);
  Network b = a;
  b.layer(0).params()[0][0] += 1.0;
  EXPECT_NE(a.layer(0).params()[0][0], b.layer(0).params()[0][0]);
}

TEST(InferShapes, LargeArchitectureWithoutAllocation) {
  const GsmaxParams t{0.5};
  const auto gs = [&](std::size_t n) { return GsmaxSpec{GroupingSpec{{}, n}, t}; };
  const std::vector<LayerSpec> a1{DropoutSpec{0.8}, Conv2dSpec{192, 8, 1, Padding::same}, MaxPool2dSpec{4, 2}, gs(2),
                                  DropoutSpec{0.5}, Conv2dSpec{385, 8, 1, Padding::same}, MaxPool2dSpec{4, 2}, gs(11),
                                  DropoutSpec{0.5}, Conv2dSpec{384, 8, 1, Padding::same}, MaxPool2dSpec{2, 2}, gs(8),
                                  DropoutSpec{0.5}, DenseSpec{2500},  gs(50), DropoutSpec{0.5}, DenseSpec{10},
                                  SoftmaxXentHeadSpec{}};
  const auto shapes = infer_shapes({3, 32, 32}, a1);
  EXPECT_EQ(shapes[2], (Shape{192, 15, 15}));
  EXPECT_EQ(shapes[6], (Shape{385, 6, 6}));
  EXPECT_EQ(shapes[10], (Shape{384, 3, 3}));
  EXPECT_EQ(shapes.back(), (Shape{10}));
  auto broken = a1;
  broken[5] = Conv2dSpec{384, 8, 1, Padding::same};  // 384 is not a multiple of 11
  EXPECT_THROW(infer_shapes({3, 32, 32}, broken), ConfigError);
}
