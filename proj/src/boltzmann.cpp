#include "gsmax/boltzmann.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "gsmax/errors.hpp"

namespace gsmax {

void BoltzmannMachine::validate() const {
  if (b.empty()) throw ShapeError("machine has no hidden units");
  if (c.empty()) throw ShapeError("machine has no visible units");
  if (w_v.shape() != Shape{c.size(), b.size()}) {
    throw ShapeError("Wv is " + shape_string(w_v.shape()) + ", expected " + shape_string({c.size(), b.size()}));
  }
  if (groups.channels() != b.size()) throw ShapeError("group spec does not cover the hidden units");
  if (const auto* p = std::get_if<double>(&penalty); p && !(*p <= 0.0 && std::isfinite(*p))) {
    throw ConfigError("finite penalty must be <= 0");
  }
}

Tensor BoltzmannMachine::hidden_coupling() const {
  const auto* p = std::get_if<double>(&penalty);
  if (!p) throw UnsupportedError("dense Wh is undefined for the symbolic -inf penalty");
  const std::size_t h = hidden();
  Tensor wh({h, h});
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < h; ++j) {
      if (i != j && groups.group_of(i) == groups.group_of(j)) wh.at(i, j) = *p;
    }
  }
  return wh;
}

std::vector<double> BoltzmannMachine::hidden_input(std::span<const std::uint8_t> v) const {
  if (v.size() != visible()) throw ShapeError("visible vector has wrong length");
  std::vector<double> z(b);
  for (std::size_t i = 0; i < hidden(); ++i) {
    for (std::size_t k = 0; k < visible(); ++k) {
      if (v[k]) z[i] += w_v.at(k, i);
    }
  }
  return z;
}

std::vector<double> GroupPosterior::as_distribution() const {
  std::vector<double> d = valid;
  d.push_back(forbidden);
  return d;
}

namespace {

// Group state of a joint bitmask: 0 = ground, k = only member k-1 on,
// members + 1 = forbidden.
std::size_t group_state(const GroupSpec& groups, std::size_t g, std::uint32_t mask) {
  const auto& members = groups.members(g);
  std::size_t on = 0, which = 0;
  for (std::size_t k = 0; k < members.size(); ++k) {
    if (mask >> members[k] & 1u) {
      ++on;
      which = k + 1;
    }
  }
  if (on == 0) return 0;
  if (on == 1) return which;
  return members.size() + 1;
}

void check_enumerable(const BoltzmannMachine& m, std::span<const std::uint8_t> v) {
  m.validate();
  if (m.hidden() > kMaxEnumeratedHidden) {
    throw SizeError("enumeration limited to " + std::to_string(kMaxEnumeratedHidden) + " hidden units, got " +
                    std::to_string(m.hidden()));
  }
  if (v.size() != m.visible()) throw ShapeError("visible vector has wrong length");
}

PosteriorDistribution from_joint(const BoltzmannMachine& m, const std::vector<double>& joint) {
  const std::size_t h = m.hidden();
  PosteriorDistribution post;
  post.marginals.assign(h, 0.0);
  for (std::size_t g = 0; g < m.groups.group_count(); ++g) {
    post.groups.push_back({std::vector<double>(m.groups.members(g).size() + 1, 0.0), 0.0});
  }
  for (std::uint32_t mask = 0; mask < joint.size(); ++mask) {
    const double p = joint[mask];
    for (std::size_t i = 0; i < h; ++i) {
      if (mask >> i & 1u) post.marginals[i] += p;
    }
    for (std::size_t g = 0; g < post.groups.size(); ++g) {
      const auto s = group_state(m.groups, g, mask);
      auto& table = post.groups[g];
      if (s < table.valid.size()) table.valid[s] += p;
      else table.forbidden += p;
    }
  }
  return post;
}

}  // namespace

std::vector<double> enumerate_joint(const BoltzmannMachine& m, std::span<const std::uint8_t> v) {
  check_enumerable(m, v);
  const std::size_t h = m.hidden();
  const std::size_t states = std::size_t{1} << h;
  const auto z = m.hidden_input(v);
  const auto* finite = std::get_if<double>(&m.penalty);

  // log-weight per state; forbidden states under the symbolic penalty are
  // flagged and excluded rather than given a -inf weight.
  std::vector<double> logw(states, 0.0);
  std::vector<std::uint8_t> allowed(states, 1);
  double top = -std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < states; ++mask) {
    double e = 0.0;
    for (std::size_t i = 0; i < h; ++i) {
      if (mask >> i & 1u) e += z[i];
    }
    for (std::size_t g = 0; g < m.groups.group_count(); ++g) {
      const auto& members = m.groups.members(g);
      std::size_t on = 0;
      for (auto i : members) on += mask >> i & 1u;
      if (on < 2) continue;
      if (!finite) {
        allowed[mask] = 0;
        break;
      }
      // Ordered pairs (i, j), i != j, both on: on * (on - 1) of them.
      e += *finite * static_cast<double>(on * (on - 1));
    }
    logw[mask] = e;
    if (allowed[mask]) top = std::max(top, e);
  }
  std::vector<double> joint(states, 0.0);
  double total = 0.0;
  for (std::size_t s = 0; s < states; ++s) {
    if (allowed[s]) total += (joint[s] = std::exp(logw[s] - top));
  }
  for (auto& p : joint) p /= total;
  return joint;
}

PosteriorDistribution enumerate_posterior(const BoltzmannMachine& m, std::span<const std::uint8_t> v) {
  check_enumerable(m, v);
  if (!m.symbolic()) return from_joint(m, enumerate_joint(m, v));

  // Per-group enumeration of {e_0, ..., e_|g|}: log-weights 0 and
  // b_i + v^T Wv_i, computed from the machine directly.
  PosteriorDistribution post;
  post.marginals.assign(m.hidden(), 0.0);
  for (const auto& members : m.groups.groups()) {
    std::vector<double> logw(members.size() + 1, 0.0);
    for (std::size_t k = 0; k < members.size(); ++k) {
      const std::size_t i = members[k];
      double e = m.b[i];
      for (std::size_t r = 0; r < m.visible(); ++r) e += static_cast<double>(v[r]) * m.w_v.at(r, i);
      logw[k + 1] = e;
    }
    const double top = *std::max_element(logw.begin(), logw.end());
    GroupPosterior table{std::vector<double>(logw.size()), 0.0};
    double total = 0.0;
    for (std::size_t s = 0; s < logw.size(); ++s) total += (table.valid[s] = std::exp(logw[s] - top));
    for (auto& p : table.valid) p /= total;
    for (std::size_t k = 0; k < members.size(); ++k) post.marginals[members[k]] = table.valid[k + 1];
    post.groups.push_back(std::move(table));
  }
  return post;
}

GibbsResult gibbs_sample(const BoltzmannMachine& m, std::span<const std::uint8_t> v, std::size_t sweeps,
                         std::size_t burn_in, Prng& rng) {
  m.validate();
  const auto* finite = std::get_if<double>(&m.penalty);
  if (!finite) throw UnsupportedError("Gibbs sampling needs a finite penalty; use enumerate_posterior");
  if (sweeps <= burn_in) throw RangeError("sweeps must exceed burn_in");
  const std::size_t h = m.hidden();
  if (h > 32) throw SizeError("Gibbs sampler state tracking limited to 32 hidden units");
  const auto z = m.hidden_input(v);

  std::vector<std::size_t> on_in_group(m.groups.group_count(), 0);
  std::vector<std::uint8_t> state(h, 0);
  std::vector<std::size_t> unit_counts(h, 0);
  std::vector<std::vector<std::size_t>> group_counts;
  for (const auto& g : m.groups.groups()) group_counts.emplace_back(g.size() + 2, 0);

  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t i = 0; i < h; ++i) {
      const std::size_t g = m.groups.group_of(i);
      const std::size_t others = on_in_group[g] - state[i];
      // Symmetric Wh: both (i, j) and (j, i) enter the exponent.
      const double field = z[i] + 2.0 * *finite * static_cast<double>(others);
      const double p_on = field >= 0.0 ? 1.0 / (1.0 + std::exp(-field)) : std::exp(field) / (1.0 + std::exp(field));
      const std::uint8_t next = rng.uniform01() < p_on ? 1 : 0;
      on_in_group[g] = others + next;
      state[i] = next;
    }
    if (sweep < burn_in) continue;
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < h; ++i) {
      unit_counts[i] += state[i];
      mask |= static_cast<std::uint32_t>(state[i]) << i;
    }
    for (std::size_t g = 0; g < group_counts.size(); ++g) ++group_counts[g][group_state(m.groups, g, mask)];
  }

  GibbsResult r;
  r.samples = sweeps - burn_in;
  const double inv = 1.0 / static_cast<double>(r.samples);
  for (auto c : unit_counts) r.marginals.push_back(static_cast<double>(c) * inv);
  for (const auto& counts : group_counts) {
    GroupPosterior table;
    for (std::size_t s = 0; s + 1 < counts.size(); ++s) table.valid.push_back(static_cast<double>(counts[s]) * inv);
    table.forbidden = static_cast<double>(counts.back()) * inv;
    r.groups.push_back(std::move(table));
  }
  return r;
}

double tv_distance(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ShapeError("tv_distance: supports differ");
  double sp = 0.0, sq = 0.0, d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    sp += p[i];
    sq += q[i];
    d += std::abs(p[i] - q[i]);
  }
  if (std::abs(sp - 1.0) > 1e-9 || std::abs(sq - 1.0) > 1e-9) {
    throw RangeError("tv_distance: inputs must each sum to 1");
  }
  return 0.5 * d;
}

double max_group_tv(const std::vector<GroupPosterior>& a, const std::vector<GroupPosterior>& b) {
  if (a.size() != b.size()) throw ShapeError("max_group_tv: group counts differ");
  double worst = 0.0;
  for (std::size_t g = 0; g < a.size(); ++g) {
    worst = std::max(worst, tv_distance(a[g].as_distribution(), b[g].as_distribution()));
  }
  return worst;
}

namespace {

std::vector<std::string> content_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

std::vector<double> numbers(const std::string& line, std::size_t expected, const std::string& what) {
  std::istringstream in(line);
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw FormatError("machine file: bad number '" + tok + "' in " + what);
    }
    if (used != tok.size() || !std::isfinite(v)) throw FormatError("machine file: bad number '" + tok + "' in " + what);
    out.push_back(v);
  }
  if (expected && out.size() != expected) {
    throw FormatError("machine file: " + what + " needs " + std::to_string(expected) + " values, got " +
                      std::to_string(out.size()));
  }
  return out;
}

std::size_t whole(double v, const std::string& what) {
  if (v < 1 || v != std::floor(v)) throw FormatError("machine file: " + what + " must be a positive integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

BoltzmannMachine parse_machine(const std::string& text) {
  const auto lines = content_lines(text);
  if (lines.size() < 5) throw FormatError("machine file: too few lines");
  const auto dims = numbers(lines[0], 2, "dimensions");
  const std::size_t vis = whole(dims[0], "V"), hid = whole(dims[1], "H");
  if (lines.size() != 5 + vis) {
    throw FormatError("machine file: expected " + std::to_string(5 + vis) + " content lines, got " +
                      std::to_string(lines.size()));
  }
  std::vector<std::size_t> sizes;
  for (double s : numbers(lines[1], 0, "group sizes")) sizes.push_back(whole(s, "group size"));

  BoltzmannMachine m;
  try {
    m.groups = GroupSpec::contiguous(sizes);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("machine file: ") + e.what());
  }
  if (m.groups.channels() != hid) throw FormatError("machine file: group sizes do not sum to H");

  std::istringstream pen(lines[2]);
  std::string tok, extra;
  pen >> tok;
  if (pen >> extra) throw FormatError("machine file: penalty line has extra tokens");
  if (tok == "-inf" || tok == "-infinity") {
    m.penalty = NegInfinity{};
  } else {
    const double p = numbers(tok, 1, "penalty")[0];
    if (p > 0.0) throw FormatError("machine file: penalty must be <= 0");
    m.penalty = p;
  }
  m.b = numbers(lines[3], hid, "b");
  m.c = numbers(lines[4], vis, "c");
  std::vector<double> w;
  for (std::size_t r = 0; r < vis; ++r) {
    const auto row = numbers(lines[5 + r], hid, "Wv row " + std::to_string(r));
    w.insert(w.end(), row.begin(), row.end());
  }
  m.w_v = Tensor({vis, hid}, std::move(w));
  return m;
}

std::string format_machine(const BoltzmannMachine& m) {
  m.validate();
  std::ostringstream os;
  os.precision(17);
  const auto row = [&](std::span<const double> values) {
    for (std::size_t i = 0; i < values.size(); ++i) os << (i ? " " : "") << values[i];
    os << '\n';
  };
  os << m.visible() << ' ' << m.hidden() << '\n';
  for (std::size_t g = 0; g < m.groups.group_count(); ++g) os << (g ? " " : "") << m.groups.members(g).size();
  os << '\n';
  if (m.symbolic()) os << "-inf\n";
  else os << std::get<double>(m.penalty) << '\n';
  row(m.b);
  row(m.c);
  for (std::size_t r = 0; r < m.visible(); ++r) row(m.w_v.data().subspan(r * m.hidden(), m.hidden()));
  return os.str();
}

BoltzmannMachine read_machine(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_machine(ss.str());
}

BoltzmannMachine random_machine(std::size_t visible, const GroupSpec& groups, Penalty penalty, double scale,
                                Prng& rng) {
  BoltzmannMachine m;
  m.groups = groups;
  m.penalty = penalty;
  m.b.resize(groups.channels());
  for (auto& x : m.b) x = rng.uniform(-scale, scale);
  m.c.assign(visible, 0.0);
  m.w_v = Tensor({visible, groups.channels()});
  for (auto& x : m.w_v.data()) x = rng.uniform(-scale, scale);
  m.validate();
  return m;
}

std::vector<std::uint8_t> random_binary(std::size_t n, Prng& rng) {
  std::vector<std::uint8_t> v(n);
  for (auto& x : v) x = rng.bernoulli(0.5) ? 1 : 0;
  return v;
}

}  // namespace gsmax
