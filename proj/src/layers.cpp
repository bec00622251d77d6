#include "gsmax/layers.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "gsmax/errors.hpp"

namespace gsmax {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::relu: return "relu";
    case LayerKind::dropout: return "dropout";
    case LayerKind::gsmax: return "gsmax";
    case LayerKind::group_maxout: return "group_maxout";
    case LayerKind::softmax_xent_head: return "softmax_xent_head";
  }
  return "?";
}

LayerKind kind_of(const LayerSpec& spec) {
  return static_cast<LayerKind>(spec.index());
}

GroupSpec GroupingSpec::resolve(std::size_t channels) const {
  if (uniform_size != 0) return GroupSpec::uniform(channels, uniform_size);
  if (groups.group_count() == 0) throw ConfigError("grouped layer has no group spec");
  if (groups.channels() != channels) {
    throw ConfigError("group spec covers " + std::to_string(groups.channels()) + " channels, layer has " +
                      std::to_string(channels));
  }
  return groups;
}

std::string GroupingSpec::to_string() const {
  if (uniform_size != 0) return std::to_string(uniform_size);
  return groups.to_string();
}

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::string_view> split_colon(std::string_view s) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ':') {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::size_t to_size(std::string_view s, std::string_view what) {
  s = trim(s);
  std::size_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || v == 0) {
    throw ConfigError("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

double to_real(std::string_view s, std::string_view what) {
  s = trim(s);
  double v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size() || !std::isfinite(v)) {
    throw ConfigError("bad " + std::string(what) + " '" + std::string(s) + "'");
  }
  return v;
}

GroupingSpec parse_grouping(std::string_view text) {
  text = trim(text);
  GroupingSpec g;
  if (text.find_first_of(" \t{,") == std::string_view::npos) {
    g.uniform_size = to_size(text, "group size");
  } else {
    g.groups = GroupSpec::parse(text);
  }
  return g;
}

}  // namespace

std::string describe(const LayerSpec& spec) {
  struct Visitor {
    std::string operator()(const DenseSpec& s) const { return "dense:" + std::to_string(s.units); }
    std::string operator()(const Conv2dSpec& s) const {
      return "conv:" + std::to_string(s.filters) + ":" + std::to_string(s.kernel) + ":" +
             std::to_string(s.stride) + ":" + (s.padding == Padding::same ? "same" : "valid");
    }
    std::string operator()(const MaxPool2dSpec& s) const {
      return "maxpool:" + std::to_string(s.kernel) + ":" + std::to_string(s.stride);
    }
    std::string operator()(const ReluSpec&) const { return "relu"; }
    std::string operator()(const DropoutSpec& s) const { return "dropout:" + format_double(s.keep); }
    std::string operator()(const GsmaxSpec& s) const {
      return "gsmax:" + s.grouping.to_string() + "@" + format_double(s.params.temperature);
    }
    std::string operator()(const GroupMaxoutSpec& s) const {
      return "group_maxout:" + s.grouping.to_string();
    }
    std::string operator()(const SoftmaxXentHeadSpec&) const { return "softmax_xent_head"; }
  };
  return std::visit(Visitor{}, spec);
}

LayerSpec parse_layer(std::string_view token, const GroupingSpec& default_grouping,
                      double default_temperature) {
  token = trim(token);
  const auto colon = token.find(':');
  const auto name = trim(token.substr(0, colon));
  const auto rest = colon == std::string_view::npos ? std::string_view{} : token.substr(colon + 1);
  const auto args = rest.empty() ? std::vector<std::string_view>{} : split_colon(rest);
  const auto want = [&](std::size_t lo, std::size_t hi) {
    if (args.size() < lo || args.size() > hi) {
      throw ConfigError("layer '" + std::string(token) + "': wrong number of arguments");
    }
  };

  if (name == "dense") {
    want(1, 1);
    return DenseSpec{to_size(args[0], "dense units")};
  }
  if (name == "conv") {
    want(2, 4);
    Conv2dSpec c{to_size(args[0], "conv filters"), to_size(args[1], "conv kernel")};
    if (args.size() > 2) c.stride = to_size(args[2], "conv stride");
    if (args.size() > 3) {
      const auto pad = trim(args[3]);
      if (pad == "same") c.padding = Padding::same;
      else if (pad == "valid") c.padding = Padding::valid;
      else throw ConfigError("bad padding '" + std::string(pad) + "'");
    }
    return c;
  }
  if (name == "maxpool") {
    want(1, 2);
    const auto k = to_size(args[0], "pool kernel");
    return MaxPool2dSpec{k, args.size() > 1 ? to_size(args[1], "pool stride") : k};
  }
  if (name == "relu") {
    want(0, 0);
    return ReluSpec{};
  }
  if (name == "dropout") {
    want(1, 1);
    const double keep = to_real(args[0], "keep probability");
    if (!(keep > 0.0 && keep <= 1.0)) throw ConfigError("dropout keep must be in (0, 1]");
    return DropoutSpec{keep};
  }
  if (name == "gsmax") {
    GsmaxSpec g{default_grouping, {default_temperature}};
    if (!rest.empty()) {
      const auto at = rest.find('@');
      const auto groups = trim(rest.substr(0, at));
      if (!groups.empty()) g.grouping = parse_grouping(groups);
      if (at != std::string_view::npos) g.params.temperature = to_real(rest.substr(at + 1), "temperature");
    }
    if (!(g.params.temperature > 0.0)) throw ConfigError("gsmax temperature must be positive");
    return g;
  }
  if (name == "group_maxout") {
    GroupMaxoutSpec g{default_grouping};
    if (!trim(rest).empty()) g.grouping = parse_grouping(rest);
    return g;
  }
  if (name == "softmax_xent_head" || name == "softmax") {
    want(0, 0);
    return SoftmaxXentHeadSpec{};
  }
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

Shape infer_output_shape(const LayerSpec& spec, const Shape& in) {
  const auto need_image = [&](std::string_view what) {
    if (in.size() != 3) throw ShapeError(std::string(what) + " needs C x H x W input, got " + shape_string(in));
  };
  const auto need_channels = [&](std::string_view what) {
    if (in.size() != 1 && in.size() != 3) {
      throw ShapeError(std::string(what) + " needs C or C x H x W input, got " + shape_string(in));
    }
  };
  struct Visitor {
    const Shape& in;
    decltype(need_image)& image;
    decltype(need_channels)& channels;

    Shape operator()(const DenseSpec& s) const {
      if (s.units == 0) throw ConfigError("dense layer needs units >= 1");
      return {s.units};
    }
    Shape operator()(const Conv2dSpec& s) const {
      image("conv2d");
      if (s.filters == 0) throw ConfigError("conv2d needs filters >= 1");
      const auto g = conv_geometry(in[1], in[2], s.kernel, s.stride, s.padding);
      return {s.filters, g.out_h, g.out_w};
    }
    Shape operator()(const MaxPool2dSpec& s) const {
      image("maxpool2d");
      const auto g = conv_geometry(in[1], in[2], s.kernel, s.stride, Padding::valid);
      return {in[0], g.out_h, g.out_w};
    }
    Shape operator()(const ReluSpec&) const { return in; }
    Shape operator()(const DropoutSpec& s) const {
      if (!(s.keep > 0.0 && s.keep <= 1.0)) throw ConfigError("dropout keep must be in (0, 1]");
      return in;
    }
    Shape operator()(const GsmaxSpec& s) const {
      channels("gsmax");
      s.grouping.resolve(in[0]);
      if (!(s.params.temperature > 0.0)) throw ConfigError("gsmax temperature must be positive");
      return in;
    }
    Shape operator()(const GroupMaxoutSpec& s) const {
      channels("group_maxout");
      Shape out = in;
      out[0] = s.grouping.resolve(in[0]).group_count();
      return out;
    }
    Shape operator()(const SoftmaxXentHeadSpec&) const {
      if (in.size() != 1) throw ShapeError("softmax_xent_head needs a flat logit vector");
      return in;
    }
  };
  return std::visit(Visitor{in, need_image, need_channels}, spec);
}

namespace {

Tensor bias_row_sum(const Tensor& g) {
  Tensor db({g.dim(1)});
  for (std::size_t i = 0; i < g.dim(0); ++i) {
    for (std::size_t j = 0; j < g.dim(1); ++j) db[j] += g.at(i, j);
  }
  return db;
}

class DenseLayer final : public Layer {
 public:
  DenseLayer(std::size_t fan_in, std::size_t units, Prng& rng) {
    params_.push_back(init_scaled_uniform({fan_in, units}, fan_in, rng));
    params_.push_back(Tensor({units}));
  }

  LayerKind kind() const override { return LayerKind::dense; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DenseLayer>(*this); }
  std::vector<std::string> param_names() const override { return {"W", "b"}; }

  Tensor forward(const Tensor& x, bool, Prng&, LayerCache&) const override {
    const auto& w = params_[0];
    const auto& b = params_[1];
    Tensor y = matmul(x.reshaped({x.dim(0), x.size() / x.dim(0)}), w);
    for (std::size_t i = 0; i < y.dim(0); ++i) {
      for (std::size_t j = 0; j < y.dim(1); ++j) y.at(i, j) += b[j];
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor&, const LayerCache&, const Tensor& grad_y,
                  std::vector<Tensor>& param_grads) const override {
    const Tensor x2 = x.reshaped({x.dim(0), x.size() / x.dim(0)});
    param_grads = {matmul_tn(x2, grad_y), bias_row_sum(grad_y)};
    return matmul_nt(grad_y, params_[0]).reshaped(x.shape());
  }
};

class Conv2dLayer final : public Layer {
 public:
  Conv2dLayer(const Conv2dSpec& spec, std::size_t in_channels, Prng& rng) : spec_(spec) {
    const std::size_t fan_in = in_channels * spec.kernel * spec.kernel;
    params_.push_back(init_scaled_uniform({spec.filters, in_channels, spec.kernel, spec.kernel}, fan_in, rng));
    params_.push_back(Tensor({spec.filters}));
  }

  LayerKind kind() const override { return LayerKind::conv2d; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2dLayer>(*this); }
  std::vector<std::string> param_names() const override { return {"W", "b"}; }

  Tensor forward(const Tensor& x, bool, Prng&, LayerCache&) const override {
    Tensor y = conv2d_forward(x, params_[0], spec_.stride, spec_.padding);
    const std::size_t plane = y.dim(2) * y.dim(3);
    for (std::size_t n = 0; n < y.dim(0); ++n) {
      for (std::size_t o = 0; o < y.dim(1); ++o) {
        double* p = y.data().data() + (n * y.dim(1) + o) * plane;
        for (std::size_t i = 0; i < plane; ++i) p[i] += params_[1][o];
      }
    }
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor&, const LayerCache&, const Tensor& grad_y,
                  std::vector<Tensor>& param_grads) const override {
    Tensor db({grad_y.dim(1)});
    const std::size_t plane = grad_y.dim(2) * grad_y.dim(3);
    for (std::size_t n = 0; n < grad_y.dim(0); ++n) {
      for (std::size_t o = 0; o < grad_y.dim(1); ++o) {
        const double* p = grad_y.data().data() + (n * grad_y.dim(1) + o) * plane;
        for (std::size_t i = 0; i < plane; ++i) db[o] += p[i];
      }
    }
    param_grads = {conv2d_backward_filters(grad_y, x, params_[0].shape(), spec_.stride, spec_.padding),
                   std::move(db)};
    return conv2d_backward_input(grad_y, params_[0], x.shape(), spec_.stride, spec_.padding);
  }

 private:
  Conv2dSpec spec_;
};

class MaxPoolLayer final : public Layer {
 public:
  explicit MaxPoolLayer(const MaxPool2dSpec& spec) : spec_(spec) {}

  LayerKind kind() const override { return LayerKind::maxpool2d; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<MaxPoolLayer>(*this); }

  Tensor forward(const Tensor& x, bool, Prng&, LayerCache& cache) const override {
    auto r = maxpool2d_forward(x, spec_.kernel, spec_.stride);
    cache.argmax = std::move(r.argmax);
    return std::move(r.output);
  }

  Tensor backward(const Tensor& x, const Tensor&, const LayerCache& cache, const Tensor& grad_y,
                  std::vector<Tensor>& param_grads) const override {
    param_grads.clear();
    return maxpool2d_backward(grad_y, cache.argmax, x.shape());
  }

 private:
  MaxPool2dSpec spec_;
};

class ReluLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::relu; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ReluLayer>(*this); }

  Tensor forward(const Tensor& x, bool, Prng&, LayerCache&) const override {
    Tensor y = x;
    for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
    return y;
  }

  Tensor backward(const Tensor& x, const Tensor&, const LayerCache&, const Tensor& grad_y,
                  std::vector<Tensor>& param_grads) const override {
    param_grads.clear();
    Tensor g = grad_y;
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!(x[i] > 0.0)) g[i] = 0.0;
    }
    return g;
  }
};

/// Inverted dropout: kept units are scaled by 1/keep during training, eval
/// mode is the identity. The mask is drawn from the forward pass's Prng.
class DropoutLayer final : public Layer {
 public:
  explicit DropoutLayer(double keep) : keep_(keep) {}

  LayerKind kind() const override { return LayerKind::dropout; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<DropoutLayer>(*this); }

  Tensor forward(const Tensor& x, bool training, Prng& rng, LayerCache& cache) const override {
    if (!training) return x;
    cache.mask = Tensor(x.shape());
    Tensor y = x;
    const double scale = 1.0 / keep_;
    for (std::size_t i = 0; i < y.size(); ++i) {
      cache.mask[i] = rng.uniform01() < keep_ ? scale : 0.0;
      y[i] *= cache.mask[i];
    }
    return y;
  }

  Tensor backward(const Tensor&, const Tensor&, const LayerCache& cache, const Tensor& grad_y,
                  std::vector<Tensor>& param_grads) const override {
    param_grads.clear();
    if (cache.mask.shape() != grad_y.shape()) throw StateError("dropout backward without a training forward");
    Tensor g = grad_y;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= cache.mask[i];
    return g;
  }

 private:
  double keep_;
};

class GsmaxLayer final : public Layer {
 public:
  GsmaxLayer(GroupSpec groups, GsmaxParams params) : groups_(std::move(groups)), params_gs_(params) {}

  LayerKind kind() const override { return LayerKind::gsmax; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GsmaxLayer>(*this); }

  Tensor forward(const Tensor& x, bool, Prng&, LayerCache&) const override {
    return gsmax_forward(x, groups_, params_gs_);
  }

  Tensor backward(const Tensor&, const Tensor& y, const LayerCache&, const Tensor& grad_y,
                  std::vector<Tensor>& param_grads) const override {
    param_grads.clear();
    return gsmax_backward(y, grad_y, groups_, params_gs_);
  }

 private:
  GroupSpec groups_;
  GsmaxParams params_gs_;
};

class GroupMaxoutLayer final : public Layer {
 public:
  explicit GroupMaxoutLayer(GroupSpec groups) : groups_(std::move(groups)) {}

  LayerKind kind() const override { return LayerKind::group_maxout; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<GroupMaxoutLayer>(*this); }

  Tensor forward(const Tensor& x, bool, Prng&, LayerCache& cache) const override {
    auto r = group_maxout_forward(x, groups_);
    cache.argmax = std::move(r.argmax);
    return std::move(r.output);
  }

  Tensor backward(const Tensor& x, const Tensor&, const LayerCache& cache, const Tensor& grad_y,
                  std::vector<Tensor>& param_grads) const override {
    param_grads.clear();
    return group_maxout_backward(grad_y, cache.argmax, groups_, x.shape());
  }

 private:
  GroupSpec groups_;
};

class SoftmaxXentHead final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::softmax_xent_head; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<SoftmaxXentHead>(*this); }

  Tensor forward(const Tensor& x, bool, Prng&, LayerCache&) const override { return x; }

  Tensor backward(const Tensor&, const Tensor&, const LayerCache&, const Tensor& grad_y,
                  std::vector<Tensor>& param_grads) const override {
    param_grads.clear();
    return grad_y;
  }
};

}  // namespace

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& in, Prng& rng) {
  infer_output_shape(spec, in);
  struct Visitor {
    const Shape& in;
    Prng& rng;
    std::unique_ptr<Layer> operator()(const DenseSpec& s) const {
      return std::make_unique<DenseLayer>(shape_size(in), s.units, rng);
    }
    std::unique_ptr<Layer> operator()(const Conv2dSpec& s) const {
      return std::make_unique<Conv2dLayer>(s, in[0], rng);
    }
    std::unique_ptr<Layer> operator()(const MaxPool2dSpec& s) const { return std::make_unique<MaxPoolLayer>(s); }
    std::unique_ptr<Layer> operator()(const ReluSpec&) const { return std::make_unique<ReluLayer>(); }
    std::unique_ptr<Layer> operator()(const DropoutSpec& s) const {
      return std::make_unique<DropoutLayer>(s.keep);
    }
    std::unique_ptr<Layer> operator()(const GsmaxSpec& s) const {
      return std::make_unique<GsmaxLayer>(s.grouping.resolve(in[0]), s.params);
    }
    std::unique_ptr<Layer> operator()(const GroupMaxoutSpec& s) const {
      return std::make_unique<GroupMaxoutLayer>(s.grouping.resolve(in[0]));
    }
    std::unique_ptr<Layer> operator()(const SoftmaxXentHeadSpec&) const {
      return std::make_unique<SoftmaxXentHead>();
    }
  };
  return std::visit(Visitor{in, rng}, spec);
}

}  // namespace gsmax
