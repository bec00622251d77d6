#include "gsmax/discovery.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "gsmax/errors.hpp"

namespace gsmax {

std::size_t AssociationTable::vote_total(std::size_t neuron) const {
  std::size_t total = 0;
  for (auto v : votes.at(neuron)) total += v;
  return total;
}

std::size_t AssociationTable::modal_count(std::size_t neuron) const {
  const auto label = assigned.at(neuron);
  return label == kUnassigned ? 0 : votes[neuron][label];
}

void AssociationTable::finalize() {
  assigned.assign(votes.size(), kUnassigned);
  for (std::size_t c = 0; c < votes.size(); ++c) {
    std::size_t best = 0;
    for (std::size_t k = 0; k < votes[c].size(); ++k) {
      if (votes[c][k] > best) {
        best = votes[c][k];
        assigned[c] = k;
      }
    }
  }
  finalized = true;
}

void check_alignment(const GroupSpec& neurons, const Hierarchy& h) {
  h.validate();
  if (neurons.group_count() != h.super_count) {
    throw ConfigError("penultimate layer has " + std::to_string(neurons.group_count()) + " groups but the hierarchy has " +
                      std::to_string(h.super_count) + " super-classes");
  }
}

namespace {

void check_activations(const Tensor& activations, std::size_t n_labels, const GroupSpec& neurons) {
  if (activations.rank() != 2 || activations.dim(1) != neurons.channels()) {
    throw ShapeError("activations " + shape_string(activations.shape()) + " do not match " +
                     std::to_string(neurons.channels()) + " neurons");
  }
  if (activations.dim(0) != n_labels) throw ShapeError("activation rows do not match the label count");
}

void check_labels(std::span<const std::size_t> super_labels, std::span<const std::size_t> sub_labels,
                  const Hierarchy& h) {
  if (super_labels.size() != sub_labels.size()) throw LabelError("super and sub label counts differ");
  for (std::size_t i = 0; i < super_labels.size(); ++i) {
    if (super_labels[i] >= h.super_count || sub_labels[i] >= h.sub_count() ||
        h.sub_to_super[sub_labels[i]] != super_labels[i]) {
      throw LabelError("sample " + std::to_string(i) + " has labels (" + std::to_string(super_labels[i]) + ", " +
                       std::to_string(sub_labels[i]) + ") outside the hierarchy");
    }
  }
}

std::size_t group_winner(std::span<const double> row, const std::vector<std::size_t>& members) {
  std::size_t best = members.front();
  for (auto c : members) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

}  // namespace

AssociationTable associate_neurons(const Tensor& activations, std::span<const std::size_t> super_labels,
                                   std::span<const std::size_t> sub_labels, const Hierarchy& h,
                                   const GroupSpec& neurons) {
  check_alignment(neurons, h);
  check_labels(super_labels, sub_labels, h);
  check_activations(activations, super_labels.size(), neurons);

  AssociationTable t;
  t.neurons = neurons;
  t.hierarchy = h;
  t.votes.assign(neurons.channels(), std::vector<std::size_t>(h.sub_count(), 0));
  const std::size_t c = neurons.channels();
  for (std::size_t i = 0; i < super_labels.size(); ++i) {
    const auto row = activations.data().subspan(i * c, c);
    ++t.votes[group_winner(row, neurons.members(super_labels[i]))][sub_labels[i]];
  }
  t.finalize();
  return t;
}

std::size_t classify_subclass(std::span<const double> activation_row, std::size_t super_label,
                              const AssociationTable& table) {
  if (!table.finalized) throw StateError("association table has not been finalized");
  if (activation_row.size() != table.neurons.channels()) throw ShapeError("activation row has the wrong length");
  if (super_label >= table.neurons.group_count()) throw LabelError("super-class label out of range");
  return table.assigned[group_winner(activation_row, table.neurons.members(super_label))];
}

double subclass_accuracy(const Tensor& activations, std::span<const std::size_t> super_labels,
                         std::span<const std::size_t> sub_labels, const AssociationTable& table) {
  if (!table.finalized) throw StateError("association table has not been finalized");
  check_labels(super_labels, sub_labels, table.hierarchy);
  check_activations(activations, super_labels.size(), table.neurons);
  if (super_labels.empty()) throw LabelError("no samples to evaluate");
  const std::size_t c = table.neurons.channels();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < super_labels.size(); ++i) {
    const auto predicted = classify_subclass(activations.data().subspan(i * c, c), super_labels[i], table);
    if (predicted == sub_labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(super_labels.size());
}

SimilarityReport group_similarity_report(const Tensor& filters, const GroupSpec& spec) {
  if (spec.group_count() < 2) throw ConfigError("similarity report needs at least two groups");
  if (filters.rank() < 2 || filters.dim(0) != spec.channels()) {
    throw ShapeError("filters " + shape_string(filters.shape()) + " do not match " +
                     std::to_string(spec.channels()) + " grouped channels");
  }
  const std::size_t n = filters.dim(0), fan_in = filters.size() / n;
  std::vector<double> norms(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < fan_in; ++j) s += filters[i * fan_in + j] * filters[i * fan_in + j];
    norms[i] = std::sqrt(s);
    if (norms[i] == 0.0) throw NumericError("filter " + std::to_string(i) + " has zero norm");
  }
  const auto abs_cos = [&](std::size_t a, std::size_t b) {
    double dot = 0.0;
    for (std::size_t j = 0; j < fan_in; ++j) dot += filters[a * fan_in + j] * filters[b * fan_in + j];
    return std::abs(dot / (norms[a] * norms[b]));
  };

  SimilarityReport r;
  std::vector<double> group_sum(spec.group_count(), 0.0);
  std::vector<std::size_t> group_pairs(spec.group_count(), 0);
  double within = 0.0, across = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double v = abs_cos(a, b);
      const auto g = spec.group_of(a);
      if (g == spec.group_of(b)) {
        within += v;
        ++r.within_pairs;
        group_sum[g] += v;
        ++group_pairs[g];
      } else {
        across += v;
        ++r.across_pairs;
      }
    }
  }
  const double nan = std::nan("");
  r.within = r.within_pairs ? within / static_cast<double>(r.within_pairs) : nan;
  r.across = r.across_pairs ? across / static_cast<double>(r.across_pairs) : nan;
  for (std::size_t g = 0; g < spec.group_count(); ++g) {
    r.per_group.push_back(group_pairs[g] ? group_sum[g] / static_cast<double>(group_pairs[g]) : nan);
  }
  return r;
}

void write_association_csv(std::ostream& out, const AssociationTable& table) {
  out << "neuron,group,assigned,votes\n";
  for (std::size_t c = 0; c < table.neuron_count(); ++c) {
    const auto g = table.neurons.group_of(c);
    out << c << ',' << g << ',';
    if (table.assigned.at(c) == kUnassigned) out << '-';
    else out << table.assigned[c];
    out << ',';
    bool first = true;
    for (auto k : table.hierarchy.subs_of(g)) {
      out << (first ? "" : " ") << k << ':' << table.votes[c][k];
      first = false;
    }
    out << '\n';
  }
}

namespace {

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

std::string summary_json(const DiscoverySummary& s) {
  nlohmann::ordered_json j;
  j["accuracy"] = s.accuracy;
  j["chance"] = s.chance;
  j["control_delta"] = s.control_delta ? nlohmann::json(*s.control_delta) : nlohmann::json(nullptr);
  j["samples"] = s.samples;
  return j.dump();
}

std::string similarity_json(const SimilarityReport& r) {
  nlohmann::ordered_json j;
  j["within"] = number_or_null(r.within);
  j["across"] = number_or_null(r.across);
  j["within_pairs"] = r.within_pairs;
  j["across_pairs"] = r.across_pairs;
  auto per = nlohmann::json::array();
  for (double v : r.per_group) per.push_back(number_or_null(v));
  j["per_group"] = per;
  return j.dump();
}

}  // namespace gsmax
