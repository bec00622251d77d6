#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "gsmax/groups.hpp"
#include "gsmax/hierarchy.hpp"
#include "gsmax/tensor.hpp"

namespace gsmax {

inline constexpr std::size_t kUnassigned = std::numeric_limits<std::size_t>::max();

/// Returned by classify_subclass when the winning neuron has no label.
inline constexpr std::size_t kInvalidPrediction = std::numeric_limits<std::size_t>::max();

/// Penultimate neurons mapped to sub-classes by majority vote. Group g of
/// `neurons` belongs to super-class g.
struct AssociationTable {
  GroupSpec neurons;
  Hierarchy hierarchy;
  /// votes[c][k]: samples of sub-class k for which neuron c won its group.
  std::vector<std::vector<std::size_t>> votes;
  std::vector<std::size_t> assigned;
  bool finalized = false;

  std::size_t neuron_count() const { return votes.size(); }
  std::size_t vote_total(std::size_t neuron) const;

  /// Votes for the assigned label, 0 for an unassigned neuron.
  std::size_t modal_count(std::size_t neuron) const;

  /// Sets every assigned label to its vote mode, ties to the lowest sub id;
  /// neurons without votes stay kUnassigned.
  void finalize();
};

/// Throws ConfigError unless `neurons` has one group per super-class.
void check_alignment(const GroupSpec& neurons, const Hierarchy& h);

/// Every sample votes, with its sub-class label, for the neuron with the
/// largest activation among its super-class's group (ties to the lowest
/// channel index). Returns a finalized table. Throws LabelError for labels
/// outside the hierarchy or inconsistent with it, ShapeError if the
/// activation width does not match `neurons`.
AssociationTable associate_neurons(const Tensor& activations, std::span<const std::size_t> super_labels,
                                   std::span<const std::size_t> sub_labels, const Hierarchy& h,
                                   const GroupSpec& neurons);

/// Assigned label of the group winner for one activation row (length C),
/// or kInvalidPrediction. Throws StateError if the table is not finalized.
std::size_t classify_subclass(std::span<const double> activation_row, std::size_t super_label,
                              const AssociationTable& table);

/// Fraction of samples whose predicted sub-class equals the true one.
double subclass_accuracy(const Tensor& activations, std::span<const std::size_t> super_labels,
                         std::span<const std::size_t> sub_labels, const AssociationTable& table);

struct SimilarityReport {
  double within = 0.0;  // mean |cos| over same-group pairs
  double across = 0.0;  // mean |cos| over pairs from different groups
  std::size_t within_pairs = 0;
  std::size_t across_pairs = 0;
  /// Mean |cos| within each group; NaN for single-member groups.
  std::vector<double> per_group;
};

/// filters: C_out x fan_in (rank > 2 is flattened after axis 0). Needs at
/// least two groups; throws NumericError on a zero-norm filter.
SimilarityReport group_similarity_report(const Tensor& filters, const GroupSpec& spec);

/// "neuron,group,assigned,votes" rows; assigned is "-" when unassigned,
/// votes lists "sub:count" for every sub-class of the group's super-class.
void write_association_csv(std::ostream& out, const AssociationTable& table);

struct DiscoverySummary {
  double accuracy = 0.0;
  double chance = 0.0;
  std::optional<double> control_delta;
  std::size_t samples = 0;
};

/// One line of JSON, control_delta null when absent.
std::string summary_json(const DiscoverySummary& summary);

std::string similarity_json(const SimilarityReport& report);

}  // namespace gsmax
