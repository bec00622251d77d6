#include "gsmax/hierarchy.hpp"

#include <sstream>

#include "gsmax/errors.hpp"

namespace gsmax {

std::vector<std::size_t> Hierarchy::subs_of(std::size_t s) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < sub_to_super.size(); ++k) {
    if (sub_to_super[k] == s) out.push_back(k);
  }
  return out;
}

bool Hierarchy::is_complete() const {
  if (super_count == 0 || sub_to_super.empty()) return false;
  std::vector<bool> seen(super_count, false);
  for (auto s : sub_to_super) {
    if (s >= super_count) return false;
    seen[s] = true;
  }
  for (bool b : seen) {
    if (!b) return false;
  }
  return true;
}

void Hierarchy::validate() const {
  if (!is_complete()) {
    throw ConfigError("hierarchy must map every sub-class to one of " + std::to_string(super_count) +
                      " super-classes, each with at least one sub-class");
  }
}

Hierarchy Hierarchy::uniform(std::size_t supers, std::size_t subs_per_super) {
  std::vector<std::size_t> counts(supers, subs_per_super);
  return from_counts(counts);
}

Hierarchy Hierarchy::from_counts(std::span<const std::size_t> subs_per_super) {
  Hierarchy h;
  h.super_count = subs_per_super.size();
  for (std::size_t s = 0; s < subs_per_super.size(); ++s) {
    h.sub_to_super.insert(h.sub_to_super.end(), subs_per_super[s], s);
  }
  h.validate();
  return h;
}

std::string Hierarchy::to_text() const {
  std::ostringstream os;
  os << super_count << '\n';
  for (std::size_t s = 0; s < super_count; ++s) os << (s ? " " : "") << subs_of(s).size();
  os << '\n';
  for (std::size_t k = 0; k < sub_to_super.size(); ++k) {
    os << (k ? " " : "");
    if (sub_to_super[k] == kUnobserved) os << '-';
    else os << sub_to_super[k];
  }
  os << '\n';
  return os.str();
}

Hierarchy Hierarchy::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) lines.push_back(line);
  }
  if (lines.size() != 3) throw FormatError("hierarchy file needs exactly 3 lines");
  Hierarchy h;
  {
    std::istringstream l(lines[0]);
    if (!(l >> h.super_count) || h.super_count == 0) throw FormatError("hierarchy: bad super count");
  }
  std::vector<std::size_t> counts;
  {
    std::istringstream l(lines[1]);
    std::size_t c = 0;
    while (l >> c) counts.push_back(c);
    if (!l.eof() || counts.size() != h.super_count) throw FormatError("hierarchy: bad per-super sub counts");
  }
  {
    std::istringstream l(lines[2]);
    std::string tok;
    while (l >> tok) {
      if (tok == "-") {
        h.sub_to_super.push_back(kUnobserved);
        continue;
      }
      std::size_t used = 0;
      unsigned long v = 0;
      try {
        v = std::stoul(tok, &used);
      } catch (const std::exception&) {
        throw FormatError("hierarchy: bad sub_to_super entry '" + tok + "'");
      }
      if (used != tok.size() || v >= h.super_count) throw FormatError("hierarchy: bad sub_to_super entry '" + tok + "'");
      h.sub_to_super.push_back(v);
    }
  }
  for (std::size_t s = 0; s < h.super_count; ++s) {
    if (h.subs_of(s).size() != counts[s]) throw FormatError("hierarchy: sub counts disagree with sub_to_super");
  }
  return h;
}

double chance_level(const Hierarchy& h) {
  h.validate();
  // sum_s 1/n_s kept as an exact reduced fraction num/den.
  using u128 = unsigned __int128;
  const auto gcd = [](u128 a, u128 b) {
    while (b != 0) {
      const u128 t = a % b;
      a = b;
      b = t;
    }
    return a;
  };
  u128 num = 0, den = 1;
  for (std::size_t s = 0; s < h.super_count; ++s) {
    const u128 n = h.subs_of(s).size();
    num = num * n + den;
    den *= n;
    const u128 g = gcd(num, den);
    num /= g;
    den /= g;
  }
  den *= h.super_count;
  const u128 g = gcd(num, den);
  num /= g;
  den /= g;
  // Both operands exact in a double: the single division rounds correctly.
  constexpr u128 exact = u128{1} << 53;
  if (num < exact && den < exact) return static_cast<double>(num) / static_cast<double>(den);
  return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
}

}  // namespace gsmax
