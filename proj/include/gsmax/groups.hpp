#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gsmax {

/// Partition of a layer's channels {0..C-1} into disjoint, non-empty
/// competition groups.
class GroupSpec {
 public:
  GroupSpec() = default;

  /// Consecutive runs of the given sizes: {3,2} -> {0,1,2},{3,4}.
  static GroupSpec contiguous(std::span<const std::size_t> sizes);

  /// channels / group_size groups of equal size; group_size must divide channels.
  static GroupSpec uniform(std::size_t channels, std::size_t group_size);

  /// Explicit member lists. Throws ConfigError unless they partition 0..C-1.
  static GroupSpec from_indices(std::vector<std::vector<std::size_t>> groups);

  /// Accepts the two textual forms produced by to_string():
  ///   "3 3 3 3"          contiguous sizes
  ///   "{0,2} {1,3}"      explicit index lists
  static GroupSpec parse(std::string_view text);
  std::string to_string() const;

  std::size_t channels() const { return group_of_.size(); }
  std::size_t group_count() const { return groups_.size(); }
  const std::vector<std::size_t>& members(std::size_t g) const { return groups_.at(g); }
  const std::vector<std::vector<std::size_t>>& groups() const { return groups_; }
  std::size_t group_of(std::size_t channel) const { return group_of_.at(channel); }
  std::size_t max_group_size() const;
  bool is_contiguous() const;

  friend bool operator==(const GroupSpec&, const GroupSpec&) = default;

 private:
  std::vector<std::vector<std::size_t>> groups_;
  std::vector<std::size_t> group_of_;
};

}  // namespace gsmax
