#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gsmax/groups.hpp"
#include "gsmax/gsmax.hpp"
#include "gsmax/layers.hpp"
#include "gsmax/prng.hpp"
#include "gsmax/tensor.hpp"

namespace gsmax {

inline constexpr double kFiniteDifferenceStep = 1e-5;
/// Instances with a max/relu decision closer than this are rejected.
inline constexpr double kKinkMargin = 1e-4;
inline constexpr double kGradientTolerance = 1e-6;
/// Denominator floor of the relative error, so entries whose gradient is
/// ~0 are compared absolutely.
inline constexpr double kRelativeErrorFloor = 1e-2;
inline constexpr double kPosteriorTolerance = 1e-12;

/// |a - n| / max(|a|, |n|, kRelativeErrorFloor).
double relative_error(double analytic, double numeric);

/// One randomly drawn layer instance. The loss is sum(r * y) with random r,
/// or the softmax cross-entropy on `labels` for the head.
struct GradInstance {
  std::unique_ptr<Layer> layer;
  Tensor x;
  bool training = false;
  std::vector<std::size_t> labels;
};

struct GradCheckCase {
  std::string label;
  LayerKind kind;
  /// Builds an instance from rng; std::nullopt if it lies too close to a kink.
  std::function<std::optional<GradInstance>(Prng&)> draw;
};

/// Every differentiable layer configuration that oracle-check certifies.
const std::vector<GradCheckCase>& gradcheck_registry();

struct GradCheckStats {
  std::string label;
  LayerKind kind;
  std::size_t instances = 0;
  std::size_t rejected = 0;
  double max_rel_error = 0.0;
  bool passed() const { return instances > 0 && max_rel_error < kGradientTolerance; }
};

/// Max relative error of one instance over all input and parameter entries,
/// central differences with kFiniteDifferenceStep.
double check_instance(GradInstance& instance, Prng& rng);

/// Draws until `instances` non-rejected instances were checked.
GradCheckStats run_gradcheck_case(const GradCheckCase& c, std::size_t instances, std::uint64_t seed);

using GsmaxFn = std::function<Tensor(const Tensor&, const GroupSpec&, const GsmaxParams&)>;

struct OracleCheckOptions {
  std::size_t trials = 100;
  std::uint64_t seed = 1;
  std::size_t grad_instances = 20;
  bool gradients = true;
  /// Implementation under test for the posterior comparison.
  GsmaxFn gsmax = gsmax_forward;
};

struct OracleCheckReport {
  std::size_t trials = 0;
  double max_marginal_dev = 0.0;
  double max_ground_dev = 0.0;
  std::vector<GradCheckStats> gradients;
  bool posterior_passed() const { return max_marginal_dev < kPosteriorTolerance && max_ground_dev < kPosteriorTolerance; }
  bool passed() const;
};

/// Random competitive machines (H <= 12, group sizes <= 4, b and Wv uniform
/// in [-2, 2], random binary v): GSMax at T = 1 against exact enumeration,
/// then the gradient suite over the registry.
OracleCheckReport run_oracle_check(const OracleCheckOptions& options);

std::string format_oracle_report(const OracleCheckReport& report);

}  // namespace gsmax
