#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gsmax/groups.hpp"
#include "gsmax/prng.hpp"
#include "gsmax/tensor.hpp"

namespace gsmax {

/// The within-group coupling of minus infinity, kept symbolic so that no
/// floating -inf ever enters the arithmetic.
struct NegInfinity {
  friend bool operator==(NegInfinity, NegInfinity) = default;
};

/// Within-group coupling: a finite value <= 0 or the symbolic limit.
using Penalty = std::variant<double, NegInfinity>;

/// Binary Boltzmann machine over visible v (length V) and hidden h (length H)
///
///   p(h, v) ∝ exp(b^T h + c^T v + v^T Wv h + h^T Wh h)
///
/// where Wh[i][j] = penalty for i != j in the same group and 0 otherwise.
/// Wh is the full symmetric matrix, so a co-active pair in one group
/// contributes 2 * penalty to the exponent.
struct BoltzmannMachine {
  std::vector<double> b;  // hidden bias, H
  std::vector<double> c;  // visible bias, V
  Tensor w_v;             // V x H
  GroupSpec groups;       // over hidden units
  Penalty penalty = NegInfinity{};

  std::size_t visible() const { return c.size(); }
  std::size_t hidden() const { return b.size(); }
  bool symbolic() const { return std::holds_alternative<NegInfinity>(penalty); }

  /// Throws ShapeError / ConfigError on inconsistent sizes or penalty > 0.
  void validate() const;

  /// Dense Wh; only defined for finite penalties (throws UnsupportedError).
  Tensor hidden_coupling() const;

  /// b + v^T Wv: the GSMax pre-activation for clamped v.
  std::vector<double> hidden_input(std::span<const std::uint8_t> v) const;
};

/// Posterior of one group over its states. valid[0] is the ground state
/// (no unit on), valid[k] the state where only member k-1 is on. forbidden
/// is the total mass of states with two or more members on (always 0 for
/// the symbolic penalty).
struct GroupPosterior {
  std::vector<double> valid;
  double forbidden = 0.0;

  /// valid followed by forbidden, for distance computations.
  std::vector<double> as_distribution() const;
};

struct PosteriorDistribution {
  std::vector<GroupPosterior> groups;
  /// p(h_i = 1 | v) per hidden unit.
  std::vector<double> marginals;
};

inline constexpr std::size_t kMaxEnumeratedHidden = 20;

/// Exact p(h | v). With the symbolic penalty only the |g|+1 valid states
/// of each group are enumerated (the posterior factorises over groups);
/// with a finite penalty all 2^H states are enumerated and marginalised.
/// Throws SizeError for H > 20.
PosteriorDistribution enumerate_posterior(const BoltzmannMachine& m, std::span<const std::uint8_t> v);

/// Full joint p(h | v) over the 2^H hidden states, indexed by the bitmask
/// sum_i h_i 2^i. States forbidden by a symbolic penalty get exactly 0.
std::vector<double> enumerate_joint(const BoltzmannMachine& m, std::span<const std::uint8_t> v);

struct GibbsResult {
  std::vector<double> marginals;
  /// Per group: visit frequencies in the same layout as GroupPosterior.
  std::vector<GroupPosterior> groups;
  std::size_t samples = 0;
};

/// Single-site Gibbs sampling of h given clamped v, units updated in index
/// order each sweep, starting from h = 0:
///
///   p(h_i = 1 | rest) = sigmoid(b_i + (v^T Wv)_i + 2 sum_j Wh_ij h_j)
///
/// Statistics are collected after each of the sweeps following burn_in.
/// Throws UnsupportedError for the symbolic penalty, RangeError unless
/// sweeps > burn_in.
GibbsResult gibbs_sample(const BoltzmannMachine& m, std::span<const std::uint8_t> v, std::size_t sweeps,
                         std::size_t burn_in, Prng& rng);

/// 0.5 * sum |p_i - q_i|. Throws ShapeError on differing support sizes and
/// RangeError if either side does not sum to 1 within 1e-9.
double tv_distance(std::span<const double> p, std::span<const double> q);

/// Largest TV distance over corresponding groups.
double max_group_tv(const std::vector<GroupPosterior>& a, const std::vector<GroupPosterior>& b);

/// Machine definition file (whitespace-separated decimals, '#' comments):
///
///   V H
///   <group sizes, contiguous, summing to H>
///   <penalty: a number <= 0 or -inf>
///   <b: H values>
///   <c: V values>
///   <Wv: V lines of H values>
BoltzmannMachine parse_machine(const std::string& text);
std::string format_machine(const BoltzmannMachine& m);
BoltzmannMachine read_machine(const std::filesystem::path& path);

/// Random machine with b and Wv uniform in [-scale, scale], c = 0.
BoltzmannMachine random_machine(std::size_t visible, const GroupSpec& groups, Penalty penalty, double scale,
                                Prng& rng);

std::vector<std::uint8_t> random_binary(std::size_t n, Prng& rng);

}  // namespace gsmax
