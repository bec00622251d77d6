#include "gsmax/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gsmax/boltzmann.hpp"
#include "gsmax/errors.hpp"
#include "gsmax/ops.hpp"

namespace gsmax {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

constexpr std::size_t kBatch = 3;

Tensor random_tensor(const Shape& shape, double lo, double hi, Prng& rng) {
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Shape with_batch(const Shape& per_sample) {
  Shape s{kBatch};
  s.insert(s.end(), per_sample.begin(), per_sample.end());
  return s;
}

GradInstance make_instance(const LayerSpec& spec, const Shape& per_sample, Prng& rng) {
  GradInstance inst;
  inst.layer = make_layer(spec, per_sample, rng);
  for (auto& p : inst.layer->params()) {
    for (auto& v : p.data()) v = rng.uniform(-1.0, 1.0);
  }
  inst.x = random_tensor(with_batch(per_sample), -2.0, 2.0, rng);
  return inst;
}

// Smallest gap between the largest and second largest entry over a set of
// index groups.
double top_two_gap(const Tensor& x, const std::vector<std::vector<std::size_t>>& sets) {
  double gap = INFINITY;
  for (const auto& s : sets) {
    if (s.size() < 2) continue;
    std::vector<double> v;
    for (auto i : s) v.push_back(x[i]);
    std::partial_sort(v.begin(), v.begin() + 2, v.end(), std::greater<>());
    gap = std::min(gap, v[0] - v[1]);
  }
  return gap;
}

std::vector<std::vector<std::size_t>> pool_windows(const Shape& shape, std::size_t k, std::size_t stride) {
  const std::size_t n = shape[0], c = shape[1], h = shape[2], w = shape[3];
  const std::size_t oh = (h - k) / stride + 1, ow = (w - k) / stride + 1;
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n * c; ++b) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::vector<std::size_t> win;
        for (std::size_t i = 0; i < k; ++i) {
          for (std::size_t j = 0; j < k; ++j) win.push_back((b * h + y * stride + i) * w + x * stride + j);
        }
        out.push_back(std::move(win));
      }
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> maxout_sets(std::size_t batch, const GroupSpec& spec) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t n = 0; n < batch; ++n) {
    for (const auto& g : spec.groups()) {
      std::vector<std::size_t> s;
      for (auto c : g) s.push_back(n * spec.channels() + c);
      out.push_back(std::move(s));
    }
  }
  return out;
}

GroupingSpec explicit_groups(std::vector<std::size_t> sizes) {
  return GroupingSpec{GroupSpec::contiguous(sizes), 0};
}

GradCheckCase plain(std::string label, LayerSpec spec, Shape per_sample) {
  const auto kind = kind_of(spec);
  return {std::move(label), kind, [spec, per_sample](Prng& rng) -> std::optional<GradInstance> {
            return make_instance(spec, per_sample, rng);
          }};
}

GradCheckCase maxpool_case(std::string label, std::size_t k, std::size_t stride, Shape per_sample) {
  return {std::move(label), LayerKind::maxpool2d, [=](Prng& rng) -> std::optional<GradInstance> {
            auto inst = make_instance(MaxPool2dSpec{k, stride}, per_sample, rng);
            if (top_two_gap(inst.x, pool_windows(inst.x.shape(), k, stride)) < kKinkMargin) return std::nullopt;
            return inst;
          }};
}

GradCheckCase gsmax_case(std::string label, double temperature, GroupingSpec grouping, Shape per_sample) {
  return plain(std::move(label), GsmaxSpec{std::move(grouping), GsmaxParams{temperature}}, std::move(per_sample));
}

std::vector<GradCheckCase> build_registry() {
  std::vector<GradCheckCase> r;
  r.push_back(plain("dense", DenseSpec{4}, {5}));
  r.push_back(plain("dense (image input)", DenseSpec{3}, {2, 3, 3}));
  r.push_back(plain("conv2d valid", Conv2dSpec{3, 3, 1, Padding::valid}, {2, 5, 5}));
  r.push_back(plain("conv2d same stride 2", Conv2dSpec{2, 3, 2, Padding::same}, {2, 6, 5}));
  r.push_back(maxpool_case("maxpool2d 2/2", 2, 2, {2, 4, 4}));
  r.push_back(maxpool_case("maxpool2d 3/1", 3, 1, {1, 5, 5}));
  r.push_back({"relu", LayerKind::relu, [](Prng& rng) -> std::optional<GradInstance> {
                 auto inst = make_instance(ReluSpec{}, {6}, rng);
                 for (double v : inst.x.data()) {
                   if (std::abs(v) < kKinkMargin) return std::nullopt;
                 }
                 return inst;
               }});
  r.push_back({"dropout (fixed mask)", LayerKind::dropout, [](Prng& rng) -> std::optional<GradInstance> {
                 auto inst = make_instance(DropoutSpec{0.6}, {7}, rng);
                 inst.training = true;
                 return inst;
               }});
  for (double t : {0.5, 1.0, 2.0}) {
    std::ostringstream label;
    label << "gsmax T=" << t;
    r.push_back(gsmax_case(label.str(), t, explicit_groups({3, 2, 1, 4}), {10}));
    r.push_back(gsmax_case(label.str() + " (spatial)", t, GroupingSpec{{}, 2}, {4, 2, 2}));
  }
  r.push_back({"group_maxout", LayerKind::group_maxout, [](Prng& rng) -> std::optional<GradInstance> {
                 const auto groups = GroupSpec::contiguous(std::vector<std::size_t>{3, 1, 2});
                 auto inst = make_instance(GroupMaxoutSpec{GroupingSpec{groups, 0}}, {6}, rng);
                 if (top_two_gap(inst.x, maxout_sets(kBatch, groups)) < kKinkMargin) return std::nullopt;
                 return inst;
               }});
  r.push_back({"softmax_xent_head", LayerKind::softmax_xent_head, [](Prng& rng) -> std::optional<GradInstance> {
                 auto inst = make_instance(SoftmaxXentHeadSpec{}, {5}, rng);
                 for (std::size_t i = 0; i < kBatch; ++i) inst.labels.push_back(rng.below(5));
                 return inst;
               }});
  return r;
}

}  // namespace

const std::vector<GradCheckCase>& gradcheck_registry() {
  static const std::vector<GradCheckCase> registry = build_registry();
  return registry;
}

double check_instance(GradInstance& inst, Prng& rng) {
  // Dropout masks are redrawn from the same state on every evaluation.
  const Prng forward_state = rng;
  Layer& layer = *inst.layer;
  LayerCache cache;
  Prng fwd = forward_state;
  const Tensor y = layer.forward(inst.x, inst.training, fwd, cache);
  const bool xent = !inst.labels.empty();
  const Tensor r = random_tensor(y.shape(), -1.0, 1.0, rng);

  const auto loss = [&](const Tensor& x) {
    LayerCache c;
    Prng p = forward_state;
    const Tensor out = layer.forward(x, inst.training, p, c);
    if (xent) return softmax_xent_loss(out, inst.labels).loss;
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += r[i] * out[i];
    return s;
  };

  const Tensor grad_y = xent ? softmax_xent_loss(y, inst.labels).grad : r;
  std::vector<Tensor> param_grads;
  const Tensor grad_x = layer.backward(inst.x, y, cache, grad_y, param_grads);

  const double h = kFiniteDifferenceStep;
  double worst = 0.0;
  for (std::size_t i = 0; i < inst.x.size(); ++i) {
    const double orig = inst.x[i];
    inst.x[i] = orig + h;
    const double up = loss(inst.x);
    inst.x[i] = orig - h;
    const double down = loss(inst.x);
    inst.x[i] = orig;
    worst = std::max(worst, relative_error(grad_x[i], (up - down) / (2 * h)));
  }
  auto& params = layer.params();
  if (param_grads.size() != params.size()) throw StateError("backward returned the wrong number of gradients");
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double orig = params[p][i];
      params[p][i] = orig + h;
      const double up = loss(inst.x);
      params[p][i] = orig - h;
      const double down = loss(inst.x);
      params[p][i] = orig;
      worst = std::max(worst, relative_error(param_grads[p][i], (up - down) / (2 * h)));
    }
  }
  return worst;
}

GradCheckStats run_gradcheck_case(const GradCheckCase& c, std::size_t instances, std::uint64_t seed) {
  GradCheckStats stats{c.label, c.kind};
  Prng rng(seed);
  const std::size_t max_draws = 100 * std::max<std::size_t>(instances, 1);
  for (std::size_t draw = 0; draw < max_draws && stats.instances < instances; ++draw) {
    auto inst = c.draw(rng);
    if (!inst) {
      ++stats.rejected;
      continue;
    }
    stats.max_rel_error = std::max(stats.max_rel_error, check_instance(*inst, rng));
    ++stats.instances;
  }
  return stats;
}

bool OracleCheckReport::passed() const {
  if (!posterior_passed()) return false;
  return std::all_of(gradients.begin(), gradients.end(), [](const GradCheckStats& s) { return s.passed(); });
}

namespace {

GroupSpec random_groups(Prng& rng) {
  const std::size_t hidden = 1 + rng.below(12);
  std::vector<std::size_t> sizes;
  std::size_t used = 0;
  while (used < hidden) {
    const std::size_t s = std::min<std::size_t>(1 + rng.below(4), hidden - used);
    sizes.push_back(s);
    used += s;
  }
  return GroupSpec::contiguous(sizes);
}

}  // namespace

OracleCheckReport run_oracle_check(const OracleCheckOptions& options) {
  if (options.trials == 0) throw ConfigError("oracle-check needs at least one trial");
  OracleCheckReport report;
  report.trials = options.trials;
  Prng rng(options.seed);
  const GsmaxParams unit{1.0};
  for (std::size_t t = 0; t < options.trials; ++t) {
    const GroupSpec groups = random_groups(rng);
    const std::size_t visible = 1 + rng.below(8);
    const auto machine = random_machine(visible, groups, NegInfinity{}, 2.0, rng);
    const auto v = random_binary(visible, rng);
    const auto z_values = machine.hidden_input(v);
    const Tensor z({1, z_values.size()}, z_values);

    const auto exact = enumerate_posterior(machine, v);
    const Tensor p = options.gsmax(z, groups, unit);
    const Tensor ground = ground_state_prob(z, groups, unit);
    if (p.size() != exact.marginals.size()) throw ShapeError("GSMax output size differs from the hidden count");
    for (std::size_t i = 0; i < p.size(); ++i) {
      report.max_marginal_dev = std::max(report.max_marginal_dev, std::abs(p[i] - exact.marginals[i]));
    }
    // The ground state carries whatever the units leave over.
    for (std::size_t g = 0; g < groups.group_count(); ++g) {
      double rest = 1.0;
      for (auto i : groups.members(g)) rest -= p[i];
      const double target = exact.groups[g].valid[0];
      report.max_ground_dev = std::max({report.max_ground_dev, std::abs(ground[g] - target), std::abs(rest - target)});
    }
  }
  if (options.gradients) {
    std::uint64_t case_seed = options.seed;
    for (const auto& c : gradcheck_registry()) {
      report.gradients.push_back(run_gradcheck_case(c, options.grad_instances, ++case_seed));
    }
  }
  return report;
}

std::string format_oracle_report(const OracleCheckReport& r) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific;
  os << "posterior trials=" << r.trials << " max_marginal_dev=" << r.max_marginal_dev
     << " max_ground_dev=" << r.max_ground_dev << (r.posterior_passed() ? " ok" : " FAILED") << '\n';
  for (const auto& g : r.gradients) {
    os << "gradient " << g.label << " instances=" << g.instances << " rejected=" << g.rejected
       << " max_rel_error=" << g.max_rel_error << (g.passed() ? " ok" : " FAILED") << '\n';
  }
  os << (r.passed() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

}  // namespace gsmax
