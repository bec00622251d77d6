#include "gsmax/app/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "gsmax/checkpoint.hpp"
#include "gsmax/errors.hpp"
#include "gsmax/train.hpp"

namespace gsmax::app {

namespace fs = std::filesystem;

RunSeeds derive_seeds(std::uint64_t seed) {
  Prng p(seed);
  RunSeeds s;
  s.data = p.next_u64();
  s.init = p.next_u64();
  s.train = p.next_u64();
  s.holdout = p.next_u64();
  return s;
}

Datasets load_datasets(const RunConfig& c) {
  const auto seeds = derive_seeds(c.seed);
  Datasets d;
  switch (c.data.source) {
    case DataSource::synthetic: {
      auto spec = c.data.synthetic;
      spec.seed = seeds.data;
      auto gen = gen_hierarchical_gaussians(spec);
      d.train = std::move(gen.train);
      d.test = std::move(gen.test);
      break;
    }
    case DataSource::edges: {
      Prng p(seeds.data);
      const auto& e = c.data.edges;
      d.train = edges_as_hierarchical(gen_rotated_edges(e.n_per_orbit, e.patch_size, e.noise_sigma, p.next_u64()));
      d.test = edges_as_hierarchical(gen_rotated_edges(e.test_per_orbit, e.patch_size, e.noise_sigma, p.next_u64()));
      d.test.split = Split::test;
      break;
    }
    case DataSource::cifar10:
    case DataSource::cifar100: {
      const auto variant = c.data.source == DataSource::cifar10 ? CifarVariant::cifar10 : CifarVariant::cifar100;
      d.train = read_cifar_binary(c.data.cifar_train, variant);
      d.test = read_cifar_binary(c.data.cifar_test, variant);
      d.test.split = Split::test;
      break;
    }
  }
  if (c.data.gcn) {
    d.train.samples = gcn_batch(d.train.samples, c.data.gcn_epsilon);
    d.test.samples = gcn_batch(d.test.samples, c.data.gcn_epsilon);
  }
  return d;
}

const std::vector<std::size_t>& targets(const HierarchicalDataset& data, TrainTarget target) {
  return target == TrainTarget::super ? data.super_labels : data.sub_labels;
}

namespace {

std::vector<std::size_t> sub_counts(const Hierarchy& h) {
  std::vector<std::size_t> counts;
  for (std::size_t s = 0; s < h.super_count; ++s) counts.push_back(h.subs_of(s).size());
  return counts;
}

// Penultimate grouping: one group per super-class, sized like the
// hierarchy, or equal groups of group_size.
GroupingSpec super_grouping(const RunConfig& c, const Hierarchy& h) {
  if (c.network.group_size != 0) return GroupingSpec{{}, c.network.group_size};
  h.validate();
  return GroupingSpec{GroupSpec::contiguous(sub_counts(h)), 0};
}

std::size_t penultimate_width(const RunConfig& c, const Hierarchy& h) {
  if (c.network.group_size != 0) return h.super_count * c.network.group_size;
  return h.sub_count();
}

std::size_t class_count(const RunConfig& c, const Hierarchy& h) {
  return c.target == TrainTarget::super ? h.super_count : h.sub_count();
}

std::vector<LayerSpec> preset_layers(const RunConfig& c, const Hierarchy& h) {
  const double t = c.network.temperature;
  const GsmaxParams params{t};
  const auto& name = c.network.preset;
  if (name == "synthetic-mlp") {
    const auto g = super_grouping(c, h);
    return {DenseSpec{c.network.hidden}, ReluSpec{}, DenseSpec{penultimate_width(c, h)}, GsmaxSpec{g, params},
            GroupMaxoutSpec{g}, SoftmaxXentHeadSpec{}};
  }
  if (name == "edges-conv") {
    // First-layer filters compete in pairs.
    const auto g = GroupingSpec{GroupSpec::contiguous(sub_counts(h)), 0};
    return {Conv2dSpec{8, 3, 1, Padding::valid},
            GsmaxSpec{GroupingSpec{{}, c.network.group_size == 0 ? 2 : c.network.group_size}, params},
            MaxPool2dSpec{2, 2},
            DenseSpec{h.sub_count()},
            GsmaxSpec{g, params},
            GroupMaxoutSpec{g},
            SoftmaxXentHeadSpec{}};
  }
  if (name == "appendix-a1") {
    // Channel counts rounded so that the group sizes 2, 11, 8 and 50 divide them.
    const auto gs = [&](std::size_t size) { return GsmaxSpec{GroupingSpec{{}, size}, params}; };
    return {DropoutSpec{0.8},
            Conv2dSpec{192, 8, 1, Padding::same},
            MaxPool2dSpec{4, 2},
            gs(2),
            DropoutSpec{0.5},
            Conv2dSpec{385, 8, 1, Padding::same},
            MaxPool2dSpec{4, 2},
            gs(11),
            DropoutSpec{0.5},
            Conv2dSpec{384, 8, 1, Padding::same},
            MaxPool2dSpec{2, 2},
            gs(8),
            DropoutSpec{0.5},
            DenseSpec{2500},
            gs(50),
            DropoutSpec{0.5},
            DenseSpec{class_count(c, h)},
            SoftmaxXentHeadSpec{}};
  }
  throw ConfigError("unknown network preset '" + name + "'");
}

}  // namespace

std::vector<LayerSpec> control_variant(std::vector<LayerSpec> layers) {
  for (std::size_t i = 1; i < layers.size(); ++i) {
    if (kind_of(layers[i]) != LayerKind::group_maxout) continue;
    if (kind_of(layers[i - 1]) != LayerKind::gsmax) break;
    layers.erase(layers.begin() + static_cast<std::ptrdiff_t>(i - 1));
    return layers;
  }
  throw ConfigError("control mode needs a gsmax layer directly before group_maxout");
}

std::vector<LayerSpec> build_layers(const RunConfig& c, const Hierarchy& h, const Shape& input) {
  std::vector<LayerSpec> layers;
  if (!c.network.preset.empty()) {
    layers = preset_layers(c, h);
  } else {
    const auto grouping = super_grouping(c, h);
    for (const auto& tok : c.network.layers) layers.push_back(parse_layer(tok, grouping, c.network.temperature));
  }
  if (c.control) layers = control_variant(std::move(layers));
  const auto shapes = infer_shapes(input, layers);
  const auto out = shape_size(shapes.back());
  if (out != class_count(c, h)) {
    throw ConfigError("network has " + std::to_string(out) + " outputs for " + std::to_string(class_count(c, h)) +
                      " target classes");
  }
  return layers;
}

Network build_network(const RunConfig& c, const Hierarchy& h, const Shape& input) {
  return Network(input, build_layers(c, h, input), derive_seeds(c.seed).init);
}

GroupSpec penultimate_groups(const Network& net) {
  const auto pen = net.penultimate_layer();
  if (!pen) throw ConfigError("network has no group_maxout layer, so no penultimate grouping");
  const auto& spec = std::get<GroupMaxoutSpec>(net.specs()[*pen + 1]);
  return spec.grouping.resolve(net.output_shape(*pen)[0]);
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

Tensor as_rows(const Tensor& t) { return t.reshaped({t.dim(0), t.size() / t.dim(0)}); }

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

}  // namespace

TrainResult cmd_train(const RunConfig& c) {
  c.validate();
  const auto seeds = derive_seeds(c.seed);
  const auto data = load_datasets(c);
  Network net = build_network(c, data.train.hierarchy, data.train.sample_shape());
  ensure_dir(c.output);

  TrainResult r;
  r.metrics = c.output / kMetricsFile;
  r.checkpoint = c.output / kCheckpointFile;
  r.activations = c.output / kActivationFile;

  TrainConfig tc = c.train;
  tc.seed = seeds.train;
  SgdMomentum opt(net);
  Prng rng(seeds.train);
  BatchTransform transform;
  if (c.data.augment_shift > 0 && data.train.samples.rank() == 4) {
    const auto shift = c.data.augment_shift;
    transform = [shift](const Tensor& x, Prng& p) { return augment_batch(x, shift, p); };
  }
  const auto& train_y = targets(data.train, c.target);
  const auto& test_y = targets(data.test, c.target);

  auto metrics = open_out(r.metrics);
  metrics << "epoch,train_loss,train_super_acc,test_super_acc,lr\n";
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const double loss = train_epoch(net, opt, data.train.samples, train_y, tc, epoch, rng, transform);
    r.final_train_accuracy = classification_accuracy(net, data.train.samples, train_y, c.workers);
    r.final_test_accuracy = classification_accuracy(net, data.test.samples, test_y, c.workers);
    metrics << epoch << ',' << num(loss) << ',' << num(r.final_train_accuracy) << ',' << num(r.final_test_accuracy)
            << ',' << num(learning_rate(tc, epoch)) << '\n';
    metrics.flush();
  }
  if (!metrics) throw IoError("failed writing " + r.metrics.string());

  write_chunks(r.checkpoint, net.state());
  if (const auto pen = net.penultimate_layer()) {
    HierarchicalDataset dump = data.test;
    dump.samples = as_rows(net.evaluate(data.test.samples, *pen, c.workers));
    write_dataset(r.activations, dump);
  } else {
    r.activations.clear();
  }
  return r;
}

namespace {

DiscoverResult run_discovery(const Tensor& acts, const HierarchicalDataset& data, const GroupSpec& groups,
                             bool holdout, std::uint64_t seed) {
  check_alignment(groups, data.hierarchy);
  std::vector<std::size_t> assoc(data.size()), eval;
  std::iota(assoc.begin(), assoc.end(), std::size_t{0});
  if (holdout) {
    Prng p(seed);
    shuffle(assoc.begin(), assoc.end(), p);
    eval.assign(assoc.begin() + static_cast<std::ptrdiff_t>(assoc.size() / 2), assoc.end());
    assoc.resize(assoc.size() / 2);
    std::sort(assoc.begin(), assoc.end());
    std::sort(eval.begin(), eval.end());
  } else {
    eval = assoc;
  }
  const auto a = data.subset(assoc);
  const auto e = data.subset(eval);
  const Tensor a_acts = acts.gather_rows(assoc);
  const Tensor e_acts = acts.gather_rows(eval);

  DiscoverResult r;
  r.table = associate_neurons(a_acts, a.super_labels, a.sub_labels, data.hierarchy, groups);
  r.summary.accuracy = subclass_accuracy(e_acts, e.super_labels, e.sub_labels, r.table);
  r.summary.chance = chance_level(data.hierarchy);
  r.summary.samples = e.size();
  std::size_t modal = 0;
  for (std::size_t n = 0; n < r.table.neuron_count(); ++n) modal += r.table.modal_count(n);
  r.association_bound = static_cast<double>(modal) / static_cast<double>(a.size());
  return r;
}

double read_baseline_accuracy(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open baseline " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    return j.at("accuracy").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_report(const fs::path& dir, DiscoverResult& r, const DiscoverOptions& o) {
  if (o.baseline) r.summary.control_delta = r.summary.accuracy - read_baseline_accuracy(*o.baseline);
  ensure_dir(dir);
  {
    auto csv = open_out(dir / kDiscoveryCsv);
    write_association_csv(csv, r.table);
    if (!csv) throw IoError("failed writing " + (dir / kDiscoveryCsv).string());
  }
  auto json = open_out(dir / kDiscoveryJson);
  json << summary_json(r.summary) << '\n';
  if (!json) throw IoError("failed writing " + (dir / kDiscoveryJson).string());
}

}  // namespace

DiscoverResult discover_on_dump(const HierarchicalDataset& dump, bool holdout, std::uint64_t seed) {
  const auto& h = dump.hierarchy;
  h.validate();
  const Tensor acts = as_rows(dump.samples);
  const std::size_t channels = acts.dim(1);
  GroupSpec groups;
  if (channels == h.sub_count()) {
    groups = GroupSpec::contiguous(sub_counts(h));
  } else if (channels % h.super_count == 0) {
    groups = GroupSpec::uniform(channels, channels / h.super_count);
  } else {
    throw ConfigError(std::to_string(channels) + " neurons cannot be split into " + std::to_string(h.super_count) +
                      " super-class groups");
  }
  return run_discovery(acts, dump, groups, holdout, seed);
}

DiscoverResult cmd_discover(const RunConfig& c, const DiscoverOptions& o) {
  const auto seeds = derive_seeds(c.seed);
  DiscoverResult r;
  if (o.dump) {
    r = discover_on_dump(read_dataset(*o.dump), c.holdout, seeds.holdout);
  } else {
    c.validate();
    const auto data = load_datasets(c);
    Network net = build_network(c, data.test.hierarchy, data.test.sample_shape());
    net.load_state(read_chunks(o.checkpoint.value_or(c.output / kCheckpointFile)));
    const auto groups = penultimate_groups(net);
    const Tensor acts = as_rows(net.evaluate(data.test.samples, *net.penultimate_layer(), c.workers));
    r = run_discovery(acts, data.test, groups, c.holdout, seeds.holdout);
  }
  write_report(c.output, r, o);
  return r;
}

OracleCheckReport cmd_oracle_check(std::size_t trials, std::uint64_t seed) {
  OracleCheckOptions o;
  o.trials = trials;
  o.seed = seed;
  return run_oracle_check(o);
}

RgbImage filter_grid(const Tensor& filters, const GroupSpec& groups) {
  if (filters.rank() != 4 || (filters.dim(1) != 1 && filters.dim(1) != 3)) {
    throw ConfigError("filters must be C_out x {1,3} x h x w, got " + shape_string(filters.shape()));
  }
  if (groups.channels() != filters.dim(0)) throw ConfigError("grouping does not cover every filter");
  const std::size_t ch = filters.dim(1), fh = filters.dim(2), fw = filters.dim(3), per = ch * fh * fw;
  const std::size_t cols = groups.group_count(), rows = groups.max_group_size();
  RgbImage img;
  img.width = cols * fw + cols + 1;
  img.height = rows * fh + rows + 1;
  img.rgb.assign(img.width * img.height * 3, 0);
  for (std::size_t g = 0; g < cols; ++g) {
    const auto& members = groups.members(g);
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto values = filters.data().subspan(members[m] * per, per);
      const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      const double range = *hi - *lo;
      const auto level = [&](double v) -> std::uint8_t {
        if (range == 0.0) return 128;
        return static_cast<std::uint8_t>(std::lround(255.0 * (v - *lo) / range));
      };
      const std::size_t x0 = 1 + g * (fw + 1), y0 = 1 + m * (fh + 1);
      for (std::size_t y = 0; y < fh; ++y) {
        for (std::size_t x = 0; x < fw; ++x) {
          auto* px = &img.rgb[((y0 + y) * img.width + x0 + x) * 3];
          for (std::size_t k = 0; k < 3; ++k) px[k] = level(values[((ch == 3 ? k : 0) * fh + y) * fw + x]);
        }
      }
    }
  }
  return img;
}

LayerFilters layer_filters(const Network& net, std::size_t layer) {
  if (layer >= net.size()) throw ConfigError("layer index " + std::to_string(layer) + " is out of range");
  const Shape in = layer == 0 ? net.input_shape() : net.output_shape(layer - 1);
  const auto kind = kind_of(net.specs()[layer]);
  LayerFilters out;
  if (kind == LayerKind::conv2d) {
    out.filters = net.layer(layer).params().at(0);
  } else if (kind == LayerKind::dense) {
    if (in.size() != 3) throw ConfigError("dense layer input is not image-shaped");
    const Tensor& w = net.layer(layer).params().at(0);
    const std::size_t fan_in = w.dim(0), units = w.dim(1);
    Tensor f({units, in[0], in[1], in[2]});
    for (std::size_t u = 0; u < units; ++u) {
      for (std::size_t i = 0; i < fan_in; ++i) f[u * fan_in + i] = w.at(i, u);
    }
    out.filters = std::move(f);
  } else {
    throw ConfigError("layer " + std::to_string(layer) + " (" + std::string(to_string(kind)) +
                      ") has no filters to visualize");
  }
  if (out.filters.dim(1) != 1 && out.filters.dim(1) != 3) {
    throw ConfigError("filters with " + std::to_string(out.filters.dim(1)) + " channels cannot be drawn");
  }
  const std::size_t n = out.filters.dim(0);
  out.groups = GroupSpec::uniform(n, 1);
  for (std::size_t j = layer + 1; j < net.size(); ++j) {
    const auto& spec = net.specs()[j];
    const auto k = kind_of(spec);
    if (k == LayerKind::dense || k == LayerKind::conv2d) break;
    if (k == LayerKind::gsmax) {
      out.groups = std::get<GsmaxSpec>(spec).grouping.resolve(n);
      break;
    }
    if (k == LayerKind::group_maxout) {
      out.groups = std::get<GroupMaxoutSpec>(spec).grouping.resolve(n);
      break;
    }
  }
  return out;
}

VisualizeResult cmd_visualize_filters(const RunConfig& c, const fs::path& checkpoint, std::size_t layer,
                                      const fs::path& out) {
  c.validate();
  const auto data = load_datasets(c);
  Network net = build_network(c, data.train.hierarchy, data.train.sample_shape());
  net.load_state(read_chunks(checkpoint));
  const auto lf = layer_filters(net, layer);

  VisualizeResult r;
  r.image = out;
  if (out.has_parent_path()) ensure_dir(out.parent_path());
  write_ppm(out, filter_grid(lf.filters, lf.groups));
  if (lf.groups.group_count() >= 2) {
    r.similarity = group_similarity_report(lf.filters, lf.groups);
    auto sim_path = out;
    sim_path.replace_filename("similarity.json");
    auto s = open_out(sim_path);
    s << similarity_json(*r.similarity) << '\n';
    if (!s) throw IoError("failed writing " + sim_path.string());
  }
  return r;
}

void cmd_gen_data(const RunConfig& c) {
  c.validate();
  const auto data = load_datasets(c);
  ensure_dir(c.output);
  write_dataset(c.output / "train.bin", data.train);
  write_dataset(c.output / "test.bin", data.test);
}

}  // namespace gsmax::app
