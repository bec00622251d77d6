#include "gsmax/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "gsmax/checkpoint.hpp"
#include "gsmax/errors.hpp"

namespace gsmax {

Shape HierarchicalDataset::sample_shape() const {
  return Shape(samples.shape().begin() + 1, samples.shape().end());
}

void HierarchicalDataset::validate() const {
  if (super_labels.size() != sub_labels.size() || samples.empty() || samples.dim(0) != super_labels.size()) {
    throw LabelError("dataset label counts do not match the sample count");
  }
  for (std::size_t i = 0; i < super_labels.size(); ++i) {
    const auto sub = sub_labels[i];
    if (sub >= hierarchy.sub_count() || hierarchy.sub_to_super[sub] != super_labels[i] ||
        super_labels[i] >= hierarchy.super_count) {
      throw LabelError("sample " + std::to_string(i) + ": sub-class " + std::to_string(sub) +
                       " is not under super-class " + std::to_string(super_labels[i]));
    }
  }
}

HierarchicalDataset HierarchicalDataset::subset(std::span<const std::size_t> rows) const {
  HierarchicalDataset d;
  d.samples = samples.gather_rows(rows);
  for (auto r : rows) {
    d.super_labels.push_back(super_labels.at(r));
    d.sub_labels.push_back(sub_labels.at(r));
  }
  d.hierarchy = hierarchy;
  d.split = split;
  return d;
}

void SyntheticSpec::validate() const {
  if (subs_per_super.empty()) throw ConfigError("synthetic spec needs at least one super-class");
  for (auto k : subs_per_super) {
    if (k == 0) throw ConfigError("every super-class needs at least one sub-class");
  }
  if (dim == 0) throw ConfigError("synthetic dimension must be positive");
  if (!(sub_separation > 0.0)) throw ConfigError("sub_separation must be positive");
  if (!(super_separation > sub_separation)) throw ConfigError("super_separation must exceed sub_separation");
  if (!(noise_sigma > 0.0)) throw ConfigError("noise_sigma must be positive");
  if (n_per_sub == 0 || n_test_per_sub == 0) throw ConfigError("per-sub sample counts must be positive");
}

namespace {

std::vector<double> random_direction(std::size_t dim, Prng& rng) {
  std::vector<double> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

HierarchicalDataset sample_split(const Tensor& sub_centers, const Hierarchy& h, std::size_t per_sub, double sigma,
                                 Split split, Prng& rng) {
  const std::size_t k = sub_centers.dim(0), dim = sub_centers.dim(1);
  HierarchicalDataset d;
  d.hierarchy = h;
  d.split = split;
  std::vector<double> data;
  data.reserve(k * per_sub * dim);
  for (std::size_t sub = 0; sub < k; ++sub) {
    for (std::size_t i = 0; i < per_sub; ++i) {
      for (std::size_t j = 0; j < dim; ++j) data.push_back(sub_centers.at(sub, j) + sigma * rng.normal());
      d.super_labels.push_back(h.sub_to_super[sub]);
      d.sub_labels.push_back(sub);
    }
  }
  d.samples = Tensor({k * per_sub, dim}, std::move(data));
  return d;
}

}  // namespace

SyntheticData gen_hierarchical_gaussians(const SyntheticSpec& spec) {
  spec.validate();
  Prng rng(spec.seed);
  const auto h = Hierarchy::from_counts(spec.subs_per_super);
  const std::size_t supers = h.super_count, subs = h.sub_count(), dim = spec.dim;

  SyntheticData out;
  out.super_centers = Tensor({supers, dim});
  for (std::size_t s = 0; s < supers; ++s) {
    const auto dir = random_direction(dim, rng);
    for (std::size_t j = 0; j < dim; ++j) out.super_centers.at(s, j) = spec.super_separation * dir[j];
  }
  out.sub_centers = Tensor({subs, dim});
  for (std::size_t k = 0; k < subs; ++k) {
    const auto dir = random_direction(dim, rng);
    for (std::size_t j = 0; j < dim; ++j) {
      out.sub_centers.at(k, j) = out.super_centers.at(h.sub_to_super[k], j) + spec.sub_separation * dir[j];
    }
  }
  out.train = sample_split(out.sub_centers, h, spec.n_per_sub, spec.noise_sigma, Split::train, rng);
  out.test = sample_split(out.sub_centers, h, spec.n_test_per_sub, spec.noise_sigma, Split::test, rng);
  return out;
}

Tensor rotate_patch90(const Tensor& patch, int r) {
  if (patch.rank() != 2 || patch.dim(0) != patch.dim(1)) {
    throw ShapeError("rotate_patch90 needs a square patch, got " + shape_string(patch.shape()));
  }
  const std::size_t n = patch.dim(0);
  const int turns = ((r % 4) + 4) % 4;
  Tensor cur = patch;
  for (int t = 0; t < turns; ++t) {
    Tensor next(cur.shape());
    // Counter-clockwise: out[i][j] = in[j][n-1-i].
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) next.at(i, j) = cur.at(j, n - 1 - i);
    }
    cur = std::move(next);
  }
  return cur;
}

EdgeDataset gen_rotated_edges(std::size_t n_per_orbit, std::size_t patch_size, double noise_sigma,
                              std::uint64_t seed) {
  if (patch_size < 3) throw ConfigError("edge patches need patch_size >= 3");
  if (n_per_orbit == 0) throw ConfigError("n_per_orbit must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise_sigma must be >= 0");
  const std::size_t p = patch_size;

  EdgeDataset d;
  Tensor vertical({p, p});
  Tensor diagonal({p, p});
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      vertical.at(i, j) = j >= p / 2 ? 1.0 : 0.0;
      diagonal.at(i, j) = j > i ? 1.0 : 0.0;
    }
  }
  d.prototypes = {vertical, diagonal};

  Prng rng(seed);
  const std::size_t total = n_per_orbit * 4 * d.prototypes.size();
  std::vector<double> data;
  data.reserve(total * p * p);
  for (std::size_t proto = 0; proto < d.prototypes.size(); ++proto) {
    for (int r = 0; r < 4; ++r) {
      const Tensor rotated = rotate_patch90(d.prototypes[proto], r);
      for (std::size_t k = 0; k < n_per_orbit; ++k) {
        for (double v : rotated.data()) data.push_back(noise_sigma > 0.0 ? v + noise_sigma * rng.normal() : v);
        d.prototype.push_back(proto);
        d.rotation.push_back(r);
      }
    }
  }
  d.patches = Tensor({total, 1, p, p}, std::move(data));
  return d;
}

HierarchicalDataset edges_as_hierarchical(const EdgeDataset& edges) {
  HierarchicalDataset d;
  d.samples = edges.patches;
  d.hierarchy = Hierarchy::uniform(edges.prototypes.size(), 4);
  for (std::size_t i = 0; i < edges.prototype.size(); ++i) {
    d.super_labels.push_back(edges.prototype[i]);
    d.sub_labels.push_back(4 * edges.prototype[i] + static_cast<std::size_t>(edges.rotation[i]));
  }
  d.validate();
  return d;
}

namespace {

void gcn_span(std::span<double> x, double epsilon) {
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::max(std::sqrt(var / n), epsilon);
  for (auto& v : x) v = (v - mean) / sd;
}

}  // namespace

Tensor gcn(const Tensor& image, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("gcn epsilon must be positive");
  Tensor out = image;
  gcn_span(out.data(), epsilon);
  return out;
}

Tensor gcn_batch(const Tensor& batch, double epsilon) {
  if (!(epsilon > 0.0)) throw ConfigError("gcn epsilon must be positive");
  if (batch.rank() < 2) throw ShapeError("gcn_batch needs a leading batch axis");
  Tensor out = batch;
  const std::size_t per = batch.size() / batch.dim(0);
  for (std::size_t i = 0; i < batch.dim(0); ++i) gcn_span(out.data().subspan(i * per, per), epsilon);
  return out;
}

HierarchicalDataset decode_cifar(std::span<const std::uint8_t> bytes, CifarVariant variant) {
  const std::size_t label_bytes = variant == CifarVariant::cifar100 ? 2 : 1;
  const std::size_t record = label_bytes + kCifarPixels;
  if (bytes.empty() || bytes.size() % record != 0) {
    throw FormatError("CIFAR file size " + std::to_string(bytes.size()) + " is not a positive multiple of " +
                      std::to_string(record));
  }
  const std::size_t n = bytes.size() / record;
  const std::size_t supers = variant == CifarVariant::cifar100 ? 20 : 1;
  const std::size_t subs = variant == CifarVariant::cifar100 ? 100 : 10;

  HierarchicalDataset d;
  d.hierarchy.super_count = supers;
  d.hierarchy.sub_to_super.assign(subs, Hierarchy::kUnobserved);
  std::vector<double> pixels(n * kCifarPixels);
  for (std::size_t i = 0; i < n; ++i) {
    const auto* rec = bytes.data() + i * record;
    const std::size_t coarse = variant == CifarVariant::cifar100 ? rec[0] : 0;
    const std::size_t fine = variant == CifarVariant::cifar100 ? rec[1] : rec[0];
    if (coarse >= supers || fine >= subs) {
      throw FormatError("record " + std::to_string(i) + ": label out of range");
    }
    auto& mapped = d.hierarchy.sub_to_super[fine];
    if (mapped != Hierarchy::kUnobserved && mapped != coarse) {
      throw FormatError("record " + std::to_string(i) + ": fine label " + std::to_string(fine) +
                        " appears under two coarse labels");
    }
    mapped = coarse;
    d.super_labels.push_back(coarse);
    d.sub_labels.push_back(fine);
    for (std::size_t p = 0; p < kCifarPixels; ++p) {
      pixels[i * kCifarPixels + p] = static_cast<double>(rec[label_bytes + p]) / 255.0;
    }
  }
  d.samples = Tensor({n, 3, 32, 32}, std::move(pixels));
  d.validate();
  return d;
}

HierarchicalDataset read_cifar_binary(const std::filesystem::path& path, CifarVariant variant) {
  return decode_cifar(read_file_bytes(path), variant);
}

Tensor augment_fixed(const Tensor& image, bool flip, int dy, int dx) {
  if (image.rank() != 3) throw ShapeError("augment expects C x H x W");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      const auto sy = static_cast<std::ptrdiff_t>(y) - dy;
      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const auto sx = static_cast<std::ptrdiff_t>(x) - dx;
        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
        const auto src_x = flip ? w - 1 - static_cast<std::size_t>(sx) : static_cast<std::size_t>(sx);
        out[(ch * h + y) * w + x] = image[(ch * h + static_cast<std::size_t>(sy)) * w + src_x];
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& image, std::size_t max_shift, Prng& rng) {
  if (image.rank() != 3) throw ShapeError("augment expects C x H x W");
  if (max_shift >= image.dim(1)) throw ConfigError("max_shift must be smaller than the image height");
  const bool flip = rng.bernoulli(0.5);
  const auto span = 2 * max_shift + 1;
  const int dy = static_cast<int>(rng.below(span)) - static_cast<int>(max_shift);
  const int dx = static_cast<int>(rng.below(span)) - static_cast<int>(max_shift);
  return augment_fixed(image, flip, dy, dx);
}

Tensor augment_batch(const Tensor& batch, std::size_t max_shift, Prng& rng) {
  if (batch.rank() != 4) throw ShapeError("augment_batch expects N x C x H x W");
  Tensor out(batch.shape());
  const std::size_t per = batch.size() / batch.dim(0);
  const Shape one(batch.shape().begin() + 1, batch.shape().end());
  for (std::size_t i = 0; i < batch.dim(0); ++i) {
    Tensor img(one, std::vector<double>(batch.values().begin() + static_cast<std::ptrdiff_t>(i * per),
                                        batch.values().begin() + static_cast<std::ptrdiff_t>((i + 1) * per)));
    const Tensor a = augment(img, max_shift, rng);
    std::copy(a.values().begin(), a.values().end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * per));
  }
  return out;
}

namespace {

Tensor labels_tensor(const std::vector<std::size_t>& labels) {
  std::vector<double> v(labels.begin(), labels.end());
  return Tensor({labels.size()}, std::move(v));
}

std::vector<std::size_t> labels_from(const Tensor& t) {
  std::vector<std::size_t> out;
  for (double v : t.data()) {
    if (v < 0 || v != std::floor(v)) throw FormatError("label chunk holds a non-integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::filesystem::path sidecar(const std::filesystem::path& path) {
  auto p = path;
  p += ".hierarchy";
  return p;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const HierarchicalDataset& data) {
  data.validate();
  const std::vector<NamedTensor> chunks = {
      {"samples", data.samples},
      {"super_labels", labels_tensor(data.super_labels)},
      {"sub_labels", labels_tensor(data.sub_labels)},
  };
  write_chunks(path, chunks);
  std::ofstream out(sidecar(path));
  if (!out) throw IoError("cannot write " + sidecar(path).string());
  out << data.hierarchy.to_text();
}

HierarchicalDataset read_dataset(const std::filesystem::path& path) {
  const auto chunks = read_chunks(path);
  std::ifstream in(sidecar(path));
  if (!in) throw IoError("cannot open " + sidecar(path).string());
  std::stringstream ss;
  ss << in.rdbuf();
  HierarchicalDataset d;
  d.samples = find_chunk(chunks, "samples");
  d.super_labels = labels_from(find_chunk(chunks, "super_labels"));
  d.sub_labels = labels_from(find_chunk(chunks, "sub_labels"));
  d.hierarchy = Hierarchy::parse(ss.str());
  d.validate();
  return d;
}

}  // namespace gsmax
