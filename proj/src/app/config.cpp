#include "gsmax/app/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gsmax/errors.hpp"

namespace gsmax::app {

std::string_view to_string(DataSource source) {
  switch (source) {
    case DataSource::synthetic: return "synthetic";
    case DataSource::edges: return "edges";
    case DataSource::cifar10: return "cifar10";
    case DataSource::cifar100: return "cifar100";
  }
  return "?";
}

void RunConfig::validate() const {
  train.validate();
  if (workers == 0) throw ConfigError("workers must be at least 1");
  if (network.preset.empty() == network.layers.empty()) {
    throw ConfigError("[network] needs exactly one of 'preset' or 'layers'");
  }
  if (!(network.temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (network.hidden == 0) throw ConfigError("hidden must be positive");
  switch (data.source) {
    case DataSource::synthetic: data.synthetic.validate(); break;
    case DataSource::edges:
      if (data.edges.patch_size < 3 || data.edges.n_per_orbit == 0 || data.edges.test_per_orbit == 0) {
        throw ConfigError("edge data needs patch_size >= 3 and positive per-orbit counts");
      }
      break;
    case DataSource::cifar10:
    case DataSource::cifar100:
      if (data.cifar_train.empty() || data.cifar_test.empty()) {
        throw ConfigError("CIFAR data needs train_path and test_path");
      }
      break;
  }
  if (data.gcn && !(data.gcn_epsilon > 0.0)) throw ConfigError("gcn_epsilon must be positive");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class Parser {
 public:
  Parser(std::size_t line, std::string_view key, std::string_view value) : line_(line), key_(key), value_(value) {}

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("line " + std::to_string(line_) + ": " + key_ + ": " + what);
  }

  std::uint64_t u64() const {
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(value_.data(), value_.data() + value_.size(), v);
    if (ec != std::errc{} || p != value_.data() + value_.size()) fail("expected a non-negative integer");
    return v;
  }

  std::size_t size() const { return static_cast<std::size_t>(u64()); }

  int integer() const {
    int v = 0;
    const auto [p, ec] = std::from_chars(value_.data(), value_.data() + value_.size(), v);
    if (ec != std::errc{} || p != value_.data() + value_.size()) fail("expected an integer");
    return v;
  }

  double real() const {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(value_.data(), value_.data() + value_.size(), v);
    if (ec != std::errc{} || p != value_.data() + value_.size() || !std::isfinite(v)) fail("expected a number");
    return v;
  }

  bool boolean() const {
    if (value_ == "true" || value_ == "1" || value_ == "yes") return true;
    if (value_ == "false" || value_ == "0" || value_ == "no") return false;
    fail("expected true or false");
  }

  std::vector<std::string> words() const {
    std::istringstream in{std::string(value_)};
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    if (out.empty()) fail("expected a list");
    return out;
  }

  std::vector<std::size_t> sizes() const {
    std::vector<std::size_t> out;
    for (const auto& w : words()) {
      std::size_t v = 0;
      const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
      if (ec != std::errc{} || p != w.data() + w.size()) fail("expected a list of integers");
      out.push_back(v);
    }
    return out;
  }

  std::string text() const {
    if (value_.empty()) fail("empty value");
    return std::string(value_);
  }

 private:
  std::size_t line_;
  std::string key_;
  std::string_view value_;
};

void apply(RunConfig& c, const std::string& section, const std::string& key, const Parser& p) {
  if (section == "experiment") {
    if (key == "name") c.name = p.text();
    else if (key == "seed") c.seed = p.u64();
    else if (key == "output") c.output = p.text();
    else if (key == "control") c.control = p.boolean();
    else if (key == "holdout") c.holdout = p.boolean();
    else if (key == "workers") c.workers = p.size();
    else p.fail("unknown key in [experiment]");
  } else if (section == "data") {
    auto& d = c.data;
    if (key == "source") {
      const auto v = p.text();
      if (v == "synthetic") d.source = DataSource::synthetic;
      else if (v == "edges") d.source = DataSource::edges;
      else if (v == "cifar10") d.source = DataSource::cifar10;
      else if (v == "cifar100") d.source = DataSource::cifar100;
      else p.fail("expected synthetic, edges, cifar10 or cifar100");
    } else if (key == "subs_per_super") d.synthetic.subs_per_super = p.sizes();
    else if (key == "dim") d.synthetic.dim = p.size();
    else if (key == "super_separation") d.synthetic.super_separation = p.real();
    else if (key == "sub_separation") d.synthetic.sub_separation = p.real();
    else if (key == "noise_sigma") {
      d.synthetic.noise_sigma = p.real();
      d.edges.noise_sigma = p.real();
    } else if (key == "n_per_sub") d.synthetic.n_per_sub = p.size();
    else if (key == "n_test_per_sub") d.synthetic.n_test_per_sub = p.size();
    else if (key == "n_per_orbit") d.edges.n_per_orbit = p.size();
    else if (key == "test_per_orbit") d.edges.test_per_orbit = p.size();
    else if (key == "patch_size") d.edges.patch_size = p.size();
    else if (key == "train_path") d.cifar_train = p.text();
    else if (key == "test_path") d.cifar_test = p.text();
    else if (key == "gcn") d.gcn = p.boolean();
    else if (key == "gcn_epsilon") d.gcn_epsilon = p.real();
    else if (key == "augment_shift") d.augment_shift = p.size();
    else p.fail("unknown key in [data]");
  } else if (section == "network") {
    auto& n = c.network;
    if (key == "preset") {
      n.preset = p.text();
      if (n.preset != "synthetic-mlp" && n.preset != "edges-conv" && n.preset != "appendix-a1") {
        p.fail("unknown preset '" + n.preset + "'");
      }
    } else if (key == "layers") {
      n.layers = p.words();
      n.preset.clear();
    } else if (key == "group_size") n.group_size = p.size();
    else if (key == "temperature") n.temperature = p.real();
    else if (key == "hidden") n.hidden = p.size();
    else p.fail("unknown key in [network]");
  } else if (section == "train") {
    auto& t = c.train;
    if (key == "epochs") t.epochs = p.integer();
    else if (key == "batch_size") t.batch_size = p.size();
    else if (key == "base_lr") t.base_lr = p.real();
    else if (key == "lr_decay_factor") t.lr_decay_factor = p.real();
    else if (key == "lr_decay_every") t.lr_decay_every_epochs = p.integer();
    else if (key == "momentum") t.momentum = p.real();
    else if (key == "weight_decay") t.weight_decay = p.real();
    else if (key == "target") {
      const auto v = p.text();
      if (v == "super") c.target = TrainTarget::super;
      else if (v == "sub") c.target = TrainTarget::sub;
      else p.fail("expected super or sub");
    } else p.fail("unknown key in [train]");
  } else {
    p.fail("key outside a known section");
  }
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig c;
  bool preset_seen = false, layers_seen = false;
  std::string section;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto at = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(at + "unterminated section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      static const std::set<std::string> known{"experiment", "data", "network", "train"};
      if (!known.contains(section)) throw ConfigError(at + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(at + "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(at + "key '" + key + "' before any section");
    if (!seen.insert(section + "." + key).second) throw ConfigError(at + "repeated key '" + key + "'");
    preset_seen |= section == "network" && key == "preset";
    layers_seen |= section == "network" && key == "layers";
    if (preset_seen && layers_seen) throw ConfigError(at + "[network] takes either 'preset' or 'layers', not both");
    apply(c, section, key, Parser(line_no, key, value));
    if (end == text.size()) break;
  }
  c.validate();
  return c;
}

RunConfig read_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

}  // namespace

std::string format_config(const RunConfig& c) {
  std::ostringstream os;
  const auto b = [](bool v) { return v ? "true" : "false"; };
  os << "[experiment]\n"
     << "name = " << c.name << "\nseed = " << c.seed << "\noutput = " << c.output.string()
     << "\ncontrol = " << b(c.control) << "\nholdout = " << b(c.holdout) << "\nworkers = " << c.workers << "\n\n";
  const auto& d = c.data;
  os << "[data]\nsource = " << to_string(d.source) << '\n';
  switch (d.source) {
    case DataSource::synthetic:
      os << "subs_per_super = " << join(d.synthetic.subs_per_super) << "\ndim = " << d.synthetic.dim
         << "\nsuper_separation = " << num(d.synthetic.super_separation)
         << "\nsub_separation = " << num(d.synthetic.sub_separation)
         << "\nnoise_sigma = " << num(d.synthetic.noise_sigma) << "\nn_per_sub = " << d.synthetic.n_per_sub
         << "\nn_test_per_sub = " << d.synthetic.n_test_per_sub << '\n';
      break;
    case DataSource::edges:
      os << "n_per_orbit = " << d.edges.n_per_orbit << "\ntest_per_orbit = " << d.edges.test_per_orbit
         << "\npatch_size = " << d.edges.patch_size << "\nnoise_sigma = " << num(d.edges.noise_sigma) << '\n';
      break;
    case DataSource::cifar10:
    case DataSource::cifar100:
      os << "train_path = " << d.cifar_train.string() << "\ntest_path = " << d.cifar_test.string() << '\n';
      break;
  }
  os << "gcn = " << b(d.gcn) << "\ngcn_epsilon = " << num(d.gcn_epsilon) << "\naugment_shift = " << d.augment_shift
     << "\n\n[network]\n";
  if (!c.network.preset.empty()) os << "preset = " << c.network.preset << '\n';
  else os << "layers = " << join(c.network.layers) << '\n';
  os << "group_size = " << c.network.group_size << "\ntemperature = " << num(c.network.temperature)
     << "\nhidden = " << c.network.hidden << "\n\n";
  const auto& t = c.train;
  os << "[train]\nepochs = " << t.epochs << "\nbatch_size = " << t.batch_size << "\nbase_lr = " << num(t.base_lr)
     << "\nlr_decay_factor = " << num(t.lr_decay_factor) << "\nlr_decay_every = " << t.lr_decay_every_epochs
     << "\nmomentum = " << num(t.momentum) << "\nweight_decay = " << num(t.weight_decay)
     << "\ntarget = " << (c.target == TrainTarget::super ? "super" : "sub") << '\n';
  return os.str();
}

}  // namespace gsmax::app
