#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace gsmax {

/// Two-level label structure: every sub-class belongs to one super-class.
struct Hierarchy {
  /// Marks a sub-class id that no sample has been seen with (readers only).
  static constexpr std::size_t kUnobserved = std::numeric_limits<std::size_t>::max();

  std::size_t super_count = 0;
  std::vector<std::size_t> sub_to_super;

  std::size_t sub_count() const { return sub_to_super.size(); }

  /// Sub-class ids of super-class s, ascending.
  std::vector<std::size_t> subs_of(std::size_t s) const;

  /// Every sub maps to a valid super and every super has at least one sub.
  bool is_complete() const;

  /// Throws ConfigError unless is_complete().
  void validate() const;

  /// k sub-classes per super, sub ids assigned super by super.
  static Hierarchy uniform(std::size_t supers, std::size_t subs_per_super);
  static Hierarchy from_counts(std::span<const std::size_t> subs_per_super);

  /// Sidecar text: "S", then per-super sub counts, then the sub_to_super
  /// list, one line each ("-" for unobserved subs).
  std::string to_text() const;
  static Hierarchy parse(const std::string& text);

  friend bool operator==(const Hierarchy&, const Hierarchy&) = default;
};

/// Mean over super-classes of 1 / (number of sub-classes), rounded once
/// from the exact rational value.
double chance_level(const Hierarchy& h);

}  // namespace gsmax
