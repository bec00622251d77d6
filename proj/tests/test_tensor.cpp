#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gsmax/errors.hpp"
#include "gsmax/tensor.hpp"

using namespace gsmax;

namespace {

Tensor random(const Shape& s, Prng& p) {
  Tensor t(s);
  for (auto& v : t.data()) v = p.uniform(-1.0, 1.0);
  return t;
}

// Naive triple loop in long double.
Tensor naive_matmul(const Tensor& a, const Tensor& b) {
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < b.dim(1); ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < a.dim(1); ++k) s += static_cast<long double>(a.at(i, k)) * b.at(k, j);
      c.at(i, j) = static_cast<double>(s);
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  Tensor t({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
  }
  return t;
}

}  // namespace

TEST(Tensor, ConstructionValidatesShape) {
  EXPECT_THROW(Tensor(Shape{}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 0}), ShapeError);
  EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<double>(3)), ShapeError);
  const Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.at(1, 2), 1.5);
}

TEST(Tensor, Literals) {
  const auto m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.shape(), (Shape{2, 3}));
  EXPECT_EQ(m.at(1, 0), 4.0);
  EXPECT_THROW(Tensor::matrix({{1, 2}, {3}}), ShapeError);
  EXPECT_EQ(Tensor::vector({1, 2}).shape(), (Shape{2}));
}

TEST(Tensor, MatmulAgreesWithNaiveOracle) {
  Prng p(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 1 + p.below(6), k = 1 + p.below(6), n = 1 + p.below(6);
    const Tensor a = random({m, k}, p), b = random({k, n}, p);
    EXPECT_LT(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
    EXPECT_LT(max_abs_diff(matmul_tn(transpose(a), b), naive_matmul(a, b)), 1e-12);
    EXPECT_LT(max_abs_diff(matmul_nt(a, transpose(b)), naive_matmul(a, b)), 1e-12);
  }
}

TEST(Tensor, MatmulShapeMismatch) {
  EXPECT_THROW(matmul(Tensor({2, 3}), Tensor({2, 3})), ShapeError);
}

TEST(Tensor, ReshapeSliceGatherConcat) {
  const auto m = Tensor::matrix({{1, 2}, {3, 4}, {5, 6}});
  EXPECT_EQ(m.reshaped({6}).shape(), (Shape{6}));
  EXPECT_THROW(m.reshaped({4}), ShapeError);
  EXPECT_EQ(m.slice_rows(1, 3), Tensor::matrix({{3, 4}, {5, 6}}));
  const std::vector<std::size_t> idx{2, 0};
  EXPECT_EQ(m.gather_rows(idx), Tensor::matrix({{5, 6}, {1, 2}}));
  const std::vector<Tensor> parts{m.slice_rows(0, 1), m.slice_rows(1, 3)};
  EXPECT_EQ(concat_rows(parts), m);
}

TEST(Tensor, InitScaledUniformBounds) {
  Prng p(2);
  const Tensor w = init_scaled_uniform({16, 8}, 16, p);
  for (double v : w.data()) {
    EXPECT_LE(std::abs(v), 0.25);
  }
  EXPECT_THROW(init_scaled_uniform({2, 2}, 0, p), ShapeError);
}

TEST(Tensor, AllFinite) {
  Tensor t({2}, 0.0);
  EXPECT_TRUE(t.all_finite());
  t[1] = NAN;
  EXPECT_FALSE(t.all_finite());
}
