#include <gtest/gtest.h>

#include <cmath>

#include "learndyn/builtin_games.hpp"
#include "learndyn/chain_analysis.hpp"

using namespace learndyn;

namespace {

const Kernel kBoth[] = {Kernel::LogLinear, Kernel::Metropolis};

StateIndex idx(const GameDefinition& g, const ActionProfile& a) { return g.space().index(a); }

GameDefinition large_random_game(std::size_t players, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> phi(std::size_t{1} << players);
  for (auto& v : phi) v = std::floor(rng.uniform01() * 1e6) / 1e5;
  return builtin::identical_interest(std::vector<std::size_t>(players, 2), phi, "large");
}

}  // namespace

TEST(Gibbs, G2ClosedForm) {
  const auto pi = gibbs(builtin::g2(), 1.0);
  const double e = std::exp(1.0);
  const double want = std::pow(e, 4) / (1 + e + e * e + std::pow(e, 4));
  EXPECT_NEAR(pi.probabilities[3], want, 1e-15);
  EXPECT_NEAR(pi.probabilities[3], 0.8309, 1e-4);
}

TEST(Gibbs, UniformPotentialGivesUniform) {
  const auto g = builtin::identical_interest({3, 2}, std::vector<double>(6, 1.5));
  for (double p : gibbs(g, 0.3).probabilities) EXPECT_NEAR(p, 1.0 / 6.0, 1e-15);
}

TEST(Gibbs, LowTemperatureConcentratesAtMaximizer) {
  EXPECT_GE(gibbs(builtin::g2(), 1e-3).probabilities[3], 1.0 - 1e-9);
  // Large potentials must not overflow.
  const auto g = builtin::identical_interest({2}, {5000.0, 5001.0});
  const auto pi = gibbs(g, 0.01).probabilities;
  EXPECT_TRUE(std::isfinite(pi[0]));
  EXPECT_NEAR(pi[1], 1.0, 1e-15);
}

TEST(Gibbs, MissingPotential) {
  const auto g = GameDefinition::from_table({2}, {{0.0}, {1.0}});
  EXPECT_THROW(gibbs(g, 1.0), PreconditionError);
}

TEST(Stationary, G2MatchesGibbsForBothKernels) {
  const auto g2 = builtin::g2();
  const auto pi = gibbs(g2, 1.0).probabilities;
  for (auto k : kBoth) {
    const auto m = build_transition_model(g2, k, 1.0);
    const auto st = stationary_solve(m);
    EXPECT_LE(total_variation(st.probabilities, pi), 1e-8) << kernel_name(k);
    EXPECT_LE(stationary_residual(m, st.probabilities), 1e-10);
    ASSERT_TRUE(st.kernel.has_value());
    EXPECT_EQ(*st.kernel, k);
  }
}

TEST(Stationary, RandomGamesMatchGibbs) {
  for (const auto& g : builtin::random_game_set())
    for (auto k : kBoth)
      for (double T : {0.2, 1.0, 5.0}) {
        const auto st = stationary_solve(build_transition_model(g, k, T));
        double sum = 0.0;
        for (double p : st.probabilities) {
          EXPECT_GE(p, 0.0);
          sum += p;
        }
        EXPECT_NEAR(sum, 1.0, 1e-12);
        EXPECT_LE(total_variation(st.probabilities, gibbs(g, T).probabilities), 1e-8) << g.name();
      }
}

TEST(Stationary, SingleStateChainIsPointMass) {
  const auto g = builtin::identical_interest({1}, {2.0});
  const auto st = stationary_solve(build_transition_model(g, Kernel::Metropolis, 1.0));
  ASSERT_EQ(st.probabilities.size(), 1u);
  EXPECT_EQ(st.probabilities[0], 1.0);
}

TEST(Stationary, SparsePathAgreesWithDense) {
  const auto g = builtin::random_potential_game(31);
  for (auto k : kBoth) {
    const auto m = build_transition_model(g, k, 0.7);
    EXPECT_LE(total_variation(detail::sparse_stationary(m), detail::gth_solve(m)), 1e-10);
  }
}

TEST(Stationary, LargeChainUsesIterativeSolver) {
  const auto g = large_random_game(13, 4);
  ASSERT_GT(g.space().size(), kDenseSolveLimit);
  const auto m = build_transition_model(g, Kernel::Metropolis, 2.0);
  const auto st = stationary_solve(m);
  EXPECT_LE(stationary_residual(m, st.probabilities), 1e-10);
  EXPECT_LE(total_variation(st.probabilities, gibbs(g, 2.0).probabilities), 1e-8);
}

TEST(HittingTimes, G3MetropolisByHand) {
  const auto m = build_transition_model(builtin::g3(), Kernel::Metropolis, 1.0);
  const auto h = exact_hitting_times(m, {2});
  EXPECT_NEAR(h[1], 3.0, 1e-12);
  EXPECT_NEAR(h[0], 3.0, 1e-12);
  EXPECT_EQ(h[2], 0.0);
}

TEST(HittingTimes, ZeroOnTargetAndFixedPoint) {
  for (const auto& g : builtin::random_game_set(8))
    for (auto k : kBoth) {
      const auto m = build_transition_model(g, k, 0.5);
      const auto nash = enumerate_nash(g).members;
      const auto h = exact_hitting_times(m, nash);
      const auto target = state_mask(m.size(), nash);
      for (StateIndex s = 0; s < m.size(); ++s) {
        if (target[s]) {
          EXPECT_EQ(h[s], 0.0);
          continue;
        }
        double rhs = 1.0 + m.stay_probability(s) * h[s];
        for (const auto& e : m.row(s)) rhs += e.probability * h[e.target];
        EXPECT_NEAR(h[s], rhs, 1e-9 * std::max(1.0, h[s])) << g.name();
      }
    }
}

TEST(HittingTimes, LargeChainIterativeSolve) {
  const auto g = large_random_game(13, 8);
  const auto m = build_transition_model(g, Kernel::Metropolis, 3.0);
  const auto nash = enumerate_nash(g).members;
  const auto h = exact_hitting_times(m, nash);
  const auto target = state_mask(m.size(), nash);
  double worst = 0.0;
  for (StateIndex s = 0; s < m.size(); ++s) {
    double rhs = target[s] ? 0.0 : 1.0 + m.stay_probability(s) * h[s];
    if (!target[s])
      for (const auto& e : m.row(s)) rhs += e.probability * h[e.target];
    worst = std::max(worst, std::abs(h[s] - rhs));
  }
  double top = 0.0;
  for (double v : h) top = std::max(top, v);
  EXPECT_LE(worst, 1e-9 * std::max(1.0, top));
}

TEST(HittingTimes, RejectsEmptyTarget) {
  const auto m = build_transition_model(builtin::g3(), Kernel::Metropolis, 1.0);
  EXPECT_THROW(exact_hitting_times(m, {}), ArgumentError);
}

TEST(HittingTimes, MonteCarloAgreesWithinThreeStandardErrors) {
  const auto g2 = builtin::g2();
  for (auto k : kBoth) {
    const auto m = build_transition_model(g2, k, 1.0);
    const auto h = exact_hitting_times(m, {idx(g2, {1, 1})});
    const auto mc = monte_carlo_hitting(m, {0, 0}, {idx(g2, {1, 1})}, 10000, 42);
    EXPECT_EQ(mc.censored, 0u);
    EXPECT_NEAR(mc.mean, h[0], 3 * mc.std_error) << kernel_name(k);
  }
}

TEST(HittingTimes, MonteCarloStartingInTarget) {
  const auto m = build_transition_model(builtin::g3(), Kernel::LogLinear, 1.0);
  const auto mc = monte_carlo_hitting(m, {2}, {2}, 5, 1);
  EXPECT_EQ(mc.mean, 0.0);
  EXPECT_EQ(mc.samples.size(), 5u);
}

TEST(HittingTimes, CensoredTrialsAreCounted) {
  const auto m = build_transition_model(builtin::g3(), Kernel::Metropolis, 0.05);
  const auto mc = monte_carlo_hitting(m, {2}, {0}, 20, 9, 5);
  EXPECT_EQ(mc.censored, 20u);
  EXPECT_TRUE(mc.samples.empty());
}

TEST(Welch, OneSidedPValues) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> b = {6, 7, 8, 9, 10};
  // t = -5 with 8 degrees of freedom.
  EXPECT_NEAR(welch_one_sided_less(a, b), 5.25e-4, 1e-5);
  EXPECT_NEAR(welch_one_sided_less(a, b) + welch_one_sided_less(b, a), 1.0, 1e-12);
  EXPECT_THROW(welch_one_sided_less({1}, b), ArgumentError);
}

TEST(ZeroCost, G2Examples) {
  const auto g2 = builtin::g2();
  const auto ml = zero_cost_stats(build_transition_model(g2, Kernel::Metropolis, 1.0));
  const auto lll = zero_cost_stats(build_transition_model(g2, Kernel::LogLinear, 1.0));
  const auto s00 = idx(g2, {0, 0});
  EXPECT_EQ(ml.sigma[s00], 2u);
  EXPECT_EQ(ml.xi[s00], 2u);
  EXPECT_EQ(lll.sigma[s00], 2u);
  const auto ne = idx(g2, {1, 1});
  EXPECT_EQ(ml.sigma[ne], 0u);
  EXPECT_EQ(ml.xi[ne], 0u);
  EXPECT_TRUE(ml.successors[ne].empty());
}

TEST(ZeroCost, StructuralProperties) {
  for (const auto& g : builtin::random_game_set()) {
    const auto nash = enumerate_nash(g).members;
    const auto ml = zero_cost_stats(build_transition_model(g, Kernel::Metropolis, 1.0), nash);
    const auto lll = zero_cost_stats(build_transition_model(g, Kernel::LogLinear, 1.0), nash);
    for (StateIndex s = 0; s < g.space().size(); ++s) {
      EXPECT_LE(ml.sigma[s], lll.sigma[s]) << g.name();
      EXPECT_GE(ml.xi[s], ml.sigma[s]);
      EXPECT_GE(lll.xi[s], lll.sigma[s]);
      if (!ml.in_target[s]) {
        EXPECT_FALSE(ml.successors[s].empty());
        EXPECT_GE(ml.sigma[s], 1u);
      }
      for (auto t : lll.successors[s])
        EXPECT_NE(std::find(ml.successors[s].begin(), ml.successors[s].end(), t), ml.successors[s].end());
    }
  }
}

TEST(ZeroCost, WrongTargetIsInvariantViolation) {
  const auto g2 = builtin::g2();
  const auto m = build_transition_model(g2, Kernel::Metropolis, 1.0);
  // (0,0) has improving moves, so it cannot be an absorbing target state.
  EXPECT_THROW(zero_cost_stats(m, {idx(g2, {0, 0}), idx(g2, {1, 1})}), InvariantViolation);
  // Without (1,1) in the target the top state reaches nothing.
  EXPECT_THROW(zero_cost_stats(m, {idx(g2, {0, 0})}), InvariantViolation);
}

TEST(Bound, G2Metropolis) {
  const auto m = build_transition_model(builtin::g2(), Kernel::Metropolis, 1.0);
  const auto b = hitting_bound(m, zero_cost_stats(m));
  EXPECT_EQ(b.eta, 2u);
  EXPECT_DOUBLE_EQ(b.gamma, 0.25);
  EXPECT_DOUBLE_EQ(b.bound, 32.0);
  EXPECT_NEAR(b.log_bound, std::log(32.0), 1e-12);
  EXPECT_FALSE(b.eta_out_of_range);
}

TEST(Bound, G2LogLinearLowTemperature) {
  const auto m = build_transition_model(builtin::g2(), Kernel::LogLinear, 0.01);
  const auto b = hitting_bound(m, zero_cost_stats(m));
  EXPECT_EQ(b.eta, 2u);
  EXPECT_NEAR(b.bound, 8.0, 1e-9);
}

TEST(Bound, ClosedFormMatchesQuadrature) {
  // Midpoint rule on the floor-exponent integrand, grid not aligned with eta.
  for (auto k : kBoth) {
    const auto m = build_transition_model(builtin::g2(), k, 1.0);
    const auto b = hitting_bound(m, zero_cost_stats(m));
    const double eta = static_cast<double>(b.eta);
    const double q = 1.0 - std::pow(b.gamma, eta);
    const double h = 0.0137;
    double integral = 0.0;
    for (double t = 0.5 * h;; t += h) {
      const double f = std::pow(q, std::floor(t / eta));
      integral += f * h;
      if (f < 1e-14) break;
    }
    EXPECT_NEAR(integral, b.bound, 2 * h) << kernel_name(k);
  }
}

TEST(Bound, DominatesExactHittingTimes) {
  std::vector<GameDefinition> games = builtin::random_game_set();
  games.insert(games.begin(), builtin::g2());
  for (const auto& g : games)
    for (auto k : kBoth)
      for (double T : {0.1, 0.5, 2.0}) {
        const auto m = build_transition_model(g, k, T);
        const auto nash = enumerate_nash(g).members;
        const auto b = hitting_bound(m, zero_cost_stats(m, nash));
        const auto h = exact_hitting_times(m, nash);
        const double worst = *std::max_element(h.begin(), h.end());
        EXPECT_LE(std::log(worst), b.log_bound + 1e-12) << g.name() << " " << kernel_name(k) << " T=" << T;
      }
}

TEST(Mplr, G2) {
  const auto v = mplr_condition(builtin::g2(), 1.0);
  ASSERT_TRUE(v.mplr.has_value());
  EXPECT_DOUBLE_EQ(*v.mplr, 1.0);
  EXPECT_EQ(v.lhs, 2.0);
  const auto cold = mplr_condition(builtin::g2(), 0.01);
  EXPECT_TRUE(cold.holds);
  // Right-hand side (1/2)(2 Z_max) = Z_max, which tends to 1.
  EXPECT_NEAR(cold.rhs(), 1.0, 1e-9);
}

TEST(Mplr, SinglePlayerGames) {
  const auto g3 = builtin::g3();
  const auto lll = build_transition_model(g3, Kernel::LogLinear, 1.0);
  const auto ml = build_transition_model(g3, Kernel::Metropolis, 1.0);
  const auto ls = zero_cost_stats(lll);
  const auto ms = zero_cost_stats(ml);
  for (StateIndex s : {0u, 1u}) {
    EXPECT_EQ(ls.xi[s], 1u);
    EXPECT_EQ(ls.sigma[s], 1u);
  }
  const auto v = mplr_condition(lll, ls, ms);
  ASSERT_TRUE(v.mplr.has_value());
  EXPECT_LE(*v.mplr, 1.0);
}

TEST(Mplr, UndefinedWhenEveryStateIsNash) {
  const auto g = builtin::identical_interest({1, 1}, {0.0});
  const auto v = mplr_condition(g, 1.0);
  EXPECT_FALSE(v.mplr.has_value());
  EXPECT_FALSE(v.argmax.has_value());
}

TEST(Mplr, RejectsSwappedModels) {
  const auto g2 = builtin::g2();
  const auto ml = build_transition_model(g2, Kernel::Metropolis, 1.0);
  const auto s = zero_cost_stats(ml);
  EXPECT_THROW(mplr_condition(ml, s, s), ArgumentError);
}
