#include "gsmax/groups.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "gsmax/errors.hpp"

namespace gsmax {
namespace {

std::size_t parse_index(std::string_view tok) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
    throw ConfigError("bad group entry '" + std::string(tok) + "'");
  }
  return v;
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == ','; }

}  // namespace

GroupSpec GroupSpec::contiguous(std::span<const std::size_t> sizes) {
  std::vector<std::vector<std::size_t>> groups;
  std::size_t next = 0;
  for (auto s : sizes) {
    if (s == 0) throw ConfigError("group sizes must be positive");
    std::vector<std::size_t> g(s);
    for (auto& c : g) c = next++;
    groups.push_back(std::move(g));
  }
  return from_indices(std::move(groups));
}

GroupSpec GroupSpec::uniform(std::size_t channels, std::size_t group_size) {
  if (group_size == 0 || channels == 0 || channels % group_size != 0) {
    throw ConfigError("group size " + std::to_string(group_size) + " does not divide " +
                      std::to_string(channels) + " channels");
  }
  std::vector<std::size_t> sizes(channels / group_size, group_size);
  return contiguous(sizes);
}

GroupSpec GroupSpec::from_indices(std::vector<std::vector<std::size_t>> groups) {
  if (groups.empty()) throw ConfigError("group spec has no groups");
  std::size_t total = 0;
  for (const auto& g : groups) {
    if (g.empty()) throw ConfigError("empty group");
    total += g.size();
  }
  GroupSpec spec;
  constexpr std::size_t unset = static_cast<std::size_t>(-1);
  spec.group_of_.assign(total, unset);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    for (auto c : groups[gi]) {
      if (c >= total) throw ConfigError("channel " + std::to_string(c) + " outside 0.." + std::to_string(total - 1));
      if (spec.group_of_[c] != unset) throw ConfigError("channel " + std::to_string(c) + " in two groups");
      spec.group_of_[c] = gi;
    }
  }
  spec.groups_ = std::move(groups);
  return spec;
}

GroupSpec GroupSpec::parse(std::string_view text) {
  std::vector<std::vector<std::size_t>> lists;
  std::vector<std::size_t> sizes;
  std::size_t i = 0;
  while (i < text.size()) {
    if (is_space(text[i])) {
      ++i;
    } else if (text[i] == '{') {
      const auto close = text.find('}', i);
      if (close == std::string_view::npos) throw ConfigError("unterminated '{' in group spec");
      std::vector<std::size_t> g;
      auto body = text.substr(i + 1, close - i - 1);
      std::size_t j = 0;
      while (j < body.size()) {
        if (is_space(body[j])) { ++j; continue; }
        std::size_t k = j;
        while (k < body.size() && !is_space(body[k])) ++k;
        g.push_back(parse_index(body.substr(j, k - j)));
        j = k;
      }
      lists.push_back(std::move(g));
      i = close + 1;
    } else {
      std::size_t k = i;
      while (k < text.size() && !is_space(text[k]) && text[k] != '{') ++k;
      sizes.push_back(parse_index(text.substr(i, k - i)));
      i = k;
    }
  }
  if (!lists.empty() && !sizes.empty()) throw ConfigError("group spec mixes sizes and index lists");
  if (!lists.empty()) return from_indices(std::move(lists));
  if (sizes.empty()) throw ConfigError("empty group spec");
  return contiguous(sizes);
}

std::string GroupSpec::to_string() const {
  std::ostringstream os;
  const bool contig = is_contiguous();
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (g) os << ' ';
    if (contig) {
      os << groups_[g].size();
    } else {
      os << '{';
      for (std::size_t k = 0; k < groups_[g].size(); ++k) os << (k ? "," : "") << groups_[g][k];
      os << '}';
    }
  }
  return os.str();
}

std::size_t GroupSpec::max_group_size() const {
  std::size_t m = 0;
  for (const auto& g : groups_) m = std::max(m, g.size());
  return m;
}

bool GroupSpec::is_contiguous() const {
  std::size_t next = 0;
  for (const auto& g : groups_) {
    for (auto c : g) {
      if (c != next++) return false;
    }
  }
  return true;
}

}  // namespace gsmax
