#include "gsmax/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gsmax/errors.hpp"

namespace gsmax {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have rank >= 1");
  for (auto e : shape) {
    if (e == 0) throw ShapeError("zero extent in shape " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_extents(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  check_extents(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw ShapeError("tensor " + shape_string(shape_) + " given " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t m = rows.size();
  const std::size_t n = m ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(m * n);
  for (const auto& row : rows) {
    if (row.size() != n) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({m, n}, std::move(data));
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size()) {
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > shape_.at(0)) throw ShapeError("slice_rows out of range");
  const std::size_t stride = size() / shape_[0];
  Shape s = shape_;
  s[0] = end - begin;
  return Tensor(std::move(s),
                std::vector<double>(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                                    data_.begin() + static_cast<std::ptrdiff_t>(end * stride)));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> rows) const {
  if (rows.empty()) throw ShapeError("gather_rows needs at least one row");
  const std::size_t stride = size() / shape_[0];
  Shape s = shape_;
  s[0] = rows.size();
  std::vector<double> out;
  out.reserve(rows.size() * stride);
  for (auto r : rows) {
    if (r >= shape_[0]) throw ShapeError("gather_rows index out of range");
    const auto first = data_.begin() + static_cast<std::ptrdiff_t>(r * stride);
    out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(stride));
  }
  return Tensor(std::move(s), std::move(out));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  Shape s = parts.front().shape();
  std::size_t rows = 0;
  std::vector<double> data;
  for (const auto& p : parts) {
    if (p.rank() != s.size() || !std::equal(s.begin() + 1, s.end(), p.shape().begin() + 1)) {
      throw ShapeError("concat_rows: trailing extents differ");
    }
    rows += p.dim(0);
    data.insert(data.end(), p.values().begin(), p.values().end());
  }
  s[0] = rows;
  return Tensor(std::move(s), std::move(data));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
  return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0)) {
    throw ShapeError("matmul_tn: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[p * m + i] * b[p * n + j];
      c[i * n + j] = acc;
    }
  }
  return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor c({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[j * k + p];
      c[i * n + j] = acc;
    }
  }
  return c;
}

Tensor init_scaled_uniform(const Shape& shape, std::size_t fan_in, Prng& rng) {
  if (fan_in == 0) throw ShapeError("init_scaled_uniform: fan_in must be >= 1");
  Tensor t(shape);
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  // [-bound, bound): the closed upper end has measure zero.
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw ShapeError("max_abs_diff: shapes differ");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace gsmax
