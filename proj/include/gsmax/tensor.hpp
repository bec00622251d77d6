#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "gsmax/prng.hpp"

namespace gsmax {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Extents are positive; the flat buffer
/// always holds exactly product(shape) values.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  /// Rank-1 / rank-2 literals for tests and fixtures.
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }

  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_[1] + c) * shape_[2] + h) * shape_[3] + w];
  }

  /// Same data, new extents; throws ShapeError if the element count differs.
  Tensor reshaped(Shape shape) const;

  /// Rows [begin, end) along axis 0.
  Tensor slice_rows(std::size_t begin, std::size_t end) const;

  /// Samples picked by index along axis 0, in the given order.
  Tensor gather_rows(std::span<const std::size_t> rows) const;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

/// Concatenate along axis 0; trailing extents must agree.
Tensor concat_rows(std::span<const Tensor> parts);

/// (m x k) * (k x n). Each output element accumulates over k left to right,
/// starting from 0.
Tensor matmul(const Tensor& a, const Tensor& b);

/// a^T * b for (k x m), (k x n).
Tensor matmul_tn(const Tensor& a, const Tensor& b);

/// a * b^T for (m x k), (n x k).
Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// Entries i.i.d. uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor init_scaled_uniform(const Shape& shape, std::size_t fan_in, Prng& rng);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace gsmax
