#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gsmax/boltzmann.hpp"
#include "gsmax/errors.hpp"
#include "gsmax/gsmax.hpp"

using namespace gsmax;

namespace {

// Brute-force joint over all 2^H states straight from the energy, without
// any group structure: the independent oracle for enumerate_*.
std::vector<double> brute_joint(const BoltzmannMachine& m, std::span<const std::uint8_t> v) {
  const std::size_t h = m.hidden();
  const double pen = m.symbolic() ? 0.0 : std::get<double>(m.penalty);
  std::vector<long double> w(std::size_t{1} << h);
  long double z = 0;
  for (std::size_t s = 0; s < w.size(); ++s) {
    bool forbidden = false;
    long double e = 0;
    for (std::size_t i = 0; i < h; ++i) {
      if (!(s >> i & 1)) continue;
      e += m.b[i];
      for (std::size_t a = 0; a < m.visible(); ++a) e += v[a] * m.w_v.at(a, i);
      for (std::size_t j = 0; j < h; ++j) {
        if (j == i || !(s >> j & 1) || m.groups.group_of(i) != m.groups.group_of(j)) continue;
        forbidden = true;
        e += pen;
      }
    }
    for (std::size_t a = 0; a < m.visible(); ++a) e += v[a] * m.c[a];
    w[s] = forbidden && m.symbolic() ? 0.0L : std::exp(e);
    z += w[s];
  }
  std::vector<double> out(w.size());
  for (std::size_t s = 0; s < w.size(); ++s) out[s] = static_cast<double>(w[s] / z);
  return out;
}

}  // namespace

TEST(Posterior, SymbolicGroupsMatchGsmaxAtUnitTemperature) {
  Prng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::size_t> sizes(1 + rng.below(5));
    for (auto& s : sizes) s = 1 + rng.below(4);
    const auto spec = GroupSpec::contiguous(sizes);
    const auto m = random_machine(1 + rng.below(6), spec, NegInfinity{}, 3.0, rng);
    const auto v = random_binary(m.visible(), rng);
    const auto post = enumerate_posterior(m, v);
    const auto in = m.hidden_input(v);
    const Tensor z({1, in.size()}, std::vector<double>(in));
    const Tensor p = gsmax_forward(z, spec, {1.0});
    const Tensor g = ground_state_prob(z, spec, {1.0});
    for (std::size_t k = 0; k < spec.group_count(); ++k) {
      EXPECT_EQ(post.groups[k].forbidden, 0.0);
      EXPECT_NEAR(post.groups[k].valid[0], g[k], 1e-12);
      const auto& mem = spec.members(k);
      for (std::size_t j = 0; j < mem.size(); ++j) EXPECT_NEAR(post.groups[k].valid[j + 1], p[mem[j]], 1e-12);
    }
  }
}

TEST(Posterior, AgreesWithBruteForceEnergy) {
  Prng rng(2);
  for (int t = 0; t < 40; ++t) {
    const auto spec = GroupSpec::contiguous(std::vector<std::size_t>{1 + rng.below(3), 1 + rng.below(3), 2});
    const Penalty pen = t % 2 ? Penalty{NegInfinity{}} : Penalty{-rng.uniform(0.0, 4.0)};
    const auto m = random_machine(3, spec, pen, 1.5, rng);
    const auto v = random_binary(3, rng);
    const auto joint = enumerate_joint(m, v);
    const auto oracle = brute_joint(m, v);
    ASSERT_EQ(joint.size(), oracle.size());
    for (std::size_t s = 0; s < joint.size(); ++s) EXPECT_NEAR(joint[s], oracle[s], 1e-12);
    const auto post = enumerate_posterior(m, v);
    for (std::size_t i = 0; i < m.hidden(); ++i) {
      double marg = 0;
      for (std::size_t s = 0; s < oracle.size(); ++s) marg += (s >> i & 1) ? oracle[s] : 0.0;
      EXPECT_NEAR(post.marginals[i], marg, 1e-12);
    }
  }
}

TEST(Posterior, SymbolicJointFactorisesOverGroups) {
  Prng rng(3);
  const auto spec = GroupSpec::contiguous(std::vector<std::size_t>{2, 3, 1});
  const auto m = random_machine(4, spec, NegInfinity{}, 2.0, rng);
  const auto v = random_binary(4, rng);
  const auto joint = enumerate_joint(m, v);
  const auto post = enumerate_posterior(m, v);
  for (std::size_t s = 0; s < joint.size(); ++s) {
    double prod = 1.0;
    for (std::size_t k = 0; k < spec.group_count() && prod > 0; ++k) {
      std::size_t on = 0, which = 0;
      const auto& mem = spec.members(k);
      for (std::size_t j = 0; j < mem.size(); ++j)
        if (s >> mem[j] & 1) ++on, which = j + 1;
      prod = on > 1 ? 0.0 : prod * post.groups[k].valid[on ? which : 0];
    }
    EXPECT_NEAR(joint[s], prod, 1e-14);
  }
}

TEST(Posterior, FinitePenaltiesApproachTheSymbolicLimit) {
  Prng rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto spec = GroupSpec::contiguous(std::vector<std::size_t>{3, 2, 3});
    auto m = random_machine(4, spec, NegInfinity{}, 2.0, rng);
    const auto v = random_binary(4, rng);
    const auto limit = enumerate_posterior(m, v).groups;
    double previous = INFINITY;
    for (double pen : {-5.0, -10.0, -20.0, -30.0}) {
      m.penalty = pen;
      const double tv = max_group_tv(enumerate_posterior(m, v).groups, limit);
      EXPECT_LT(tv, previous) << pen;
      previous = tv;
    }
    EXPECT_LT(previous, 1e-10);
  }
}

TEST(Gibbs, MatchesEnumerationForFinitePenalty) {
  Prng rng(5);
  const auto spec = GroupSpec::contiguous(std::vector<std::size_t>{2, 3});
  const auto m = random_machine(3, spec, Penalty{-1.5}, 1.0, rng);
  const auto v = random_binary(3, rng);
  Prng chain(6);
  const auto gibbs = gibbs_sample(m, v, 60000, 1000, chain);
  const auto exact = enumerate_posterior(m, v);
  EXPECT_EQ(gibbs.samples, 59000u);
  for (std::size_t i = 0; i < m.hidden(); ++i) EXPECT_NEAR(gibbs.marginals[i], exact.marginals[i], 0.02);
  EXPECT_LT(max_group_tv(gibbs.groups, exact.groups), 0.03);
}

TEST(Gibbs, RejectsSymbolicPenaltyAndBadSweeps) {
  Prng rng(7);
  const auto spec = GroupSpec::uniform(2, 2);
  auto m = random_machine(2, spec, NegInfinity{}, 1.0, rng);
  const auto v = random_binary(2, rng);
  EXPECT_THROW(gibbs_sample(m, v, 10, 1, rng), UnsupportedError);
  m.penalty = -1.0;
  EXPECT_THROW(gibbs_sample(m, v, 10, 10, rng), RangeError);
}

TEST(Enumeration, RejectsLargeFinitePenaltyMachines) {
  Prng rng(8);
  const auto m = random_machine(2, GroupSpec::uniform(21, 3), Penalty{-1.0}, 1.0, rng);
  EXPECT_THROW(enumerate_posterior(m, random_binary(2, rng)), SizeError);
}

TEST(TvDistance, Basics) {
  const std::vector<double> p{0.5, 0.5}, q{1.0, 0.0}, r{0.2, 0.3, 0.5}, bad{0.5, 0.6};
  EXPECT_EQ(tv_distance(p, p), 0.0);
  EXPECT_NEAR(tv_distance(p, q), 0.5, 1e-15);
  EXPECT_THROW(tv_distance(p, r), ShapeError);
  EXPECT_THROW(tv_distance(p, bad), RangeError);
}

TEST(MachineText, RoundTripAndErrors) {
  Prng rng(9);
  for (const Penalty pen : {Penalty{NegInfinity{}}, Penalty{-2.5}}) {
    const auto m = random_machine(3, GroupSpec::contiguous(std::vector<std::size_t>{2, 1}), pen, 1.0, rng);
    const auto back = parse_machine(format_machine(m));
    EXPECT_EQ(back.b, m.b);
    EXPECT_EQ(back.c, m.c);
    EXPECT_EQ(back.w_v, m.w_v);
    EXPECT_EQ(back.groups, m.groups);
    EXPECT_EQ(back.penalty, m.penalty);
  }
  const auto m = parse_machine("# tiny\n1 2\n2\n-inf\n0.5 -0.5\n0\n1 2\n");
  EXPECT_TRUE(m.symbolic());
  EXPECT_EQ(m.w_v.at(0, 1), 2.0);
  EXPECT_THROW(parse_machine("1 2\n2\n1.0\n0 0\n0\n1 1\n"), FormatError);  // positive penalty
  EXPECT_THROW(parse_machine("1 2\n3\n-inf\n0 0\n0\n1 1\n"), FormatError);  // sizes do not sum to H
  EXPECT_THROW(parse_machine("1 2\n2\n-inf\n0 0\n0\n1\n"), FormatError);    // truncated
}

TEST(Machine, HiddenCouplingIsSymmetricWithinGroups) {
  Prng rng(10);
  const auto m = random_machine(1, GroupSpec::contiguous(std::vector<std::size_t>{2, 1}), Penalty{-3.0}, 1.0, rng);
  const Tensor wh = m.hidden_coupling();
  EXPECT_EQ(wh.at(0, 1), -3.0);
  EXPECT_EQ(wh.at(1, 0), -3.0);
  EXPECT_EQ(wh.at(0, 0), 0.0);
  EXPECT_EQ(wh.at(0, 2), 0.0);
  auto s = m;
  s.penalty = NegInfinity{};
  EXPECT_THROW(s.hidden_coupling(), UnsupportedError);
}
