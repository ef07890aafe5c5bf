#include <gtest/gtest.h>

#include <functional>

#include "learndyn/builtin_games.hpp"
#include "learndyn/cycles.hpp"

using namespace learndyn;

namespace {

const Kernel kBoth[] = {Kernel::LogLinear, Kernel::Metropolis};

CycleHierarchy hierarchy(const GameDefinition& g, Kernel k) { return decompose(build_transition_model(g, k, 1.0)); }

std::vector<std::vector<StateIndex>> partition(const CycleHierarchy& h, std::size_t k) {
  std::vector<std::vector<StateIndex>> out;
  for (auto id : h.level(k).cycles) out.push_back(h.node(id).members);
  return out;
}

// Best bottleneck over all simple paths, by brute force.
double brute_altitude(const CostGraph& g, StateIndex x, StateIndex y) {
  double best = -kInfinity;
  std::vector<char> on_path(g.size(), 0);
  std::function<void(StateIndex, double)> dfs = [&](StateIndex u, double bottleneck) {
    if (u == y) {
      best = std::max(best, bottleneck);
      return;
    }
    on_path[u] = 1;
    for (const auto& [v, cost] : g.row(u))
      if (!on_path[v]) dfs(v, std::min(bottleneck, g.potential(u) - cost));
    on_path[u] = 0;
  };
  dfs(x, kInfinity);
  return best;
}

std::vector<GameDefinition> small_games() {
  std::vector<GameDefinition> out;
  const std::vector<std::vector<std::size_t>> shapes = {{2, 2}, {2, 3}, {3, 2}, {2, 2, 2}, {8}, {4, 2}};
  std::uint64_t seed = 500;
  for (const auto& shape : shapes)
    for (int rep = 0; rep < 4; ++rep) {
      Rng rng(seed++);
      std::size_t count = 1;
      for (auto m : shape) count *= m;
      std::vector<double> phi(count);
      for (StateIndex s = 0; s < count; ++s) phi[s] = static_cast<double>(s) * 2.0 + 1.0;
      for (std::size_t k = count; k > 1; --k) std::swap(phi[k - 1], phi[rng.below(k)]);
      out.push_back(builtin::identical_interest(shape, phi));
    }
  return out;
}

std::vector<GameDefinition> full_set() {
  auto games = builtin::random_game_set();
  games.insert(games.begin(), builtin::g3());
  games.insert(games.begin(), builtin::g2());
  return games;
}

}  // namespace

TEST(Decompose, G3MetropolisWorkedExample) {
  const auto h = hierarchy(builtin::g3(), Kernel::Metropolis);
  ASSERT_EQ(h.depth(), 2u);
  EXPECT_EQ(partition(h, 1), (std::vector<std::vector<StateIndex>>{{0}, {1, 2}}));
  const auto id = h.find({1, 2});
  ASSERT_TRUE(id.has_value());
  const auto& c = h.node(*id);
  EXPECT_EQ(c.exit_height, 3.0);
  EXPECT_EQ(c.mixing_height, 2.0);
  EXPECT_EQ(c.potential, 3.0);
  EXPECT_EQ(c.order, 1u);
  // V^1({1,2},{0}) = H_m + min(V(1,0) - H_e(1), V(2,0) - H_e(2)) = 2 + min(1 - 0, 3 - 2).
  const auto& lv = h.level(1);
  EXPECT_EQ(lv.cost(1, 0), 2.0 + std::min(1.0 - 0.0, 3.0 - 2.0));
  EXPECT_EQ(lv.cost(1, 0), 3.0);
  EXPECT_EQ(lv.reduced_cost(1, 0), 0.0);
  EXPECT_EQ(partition(h, 2), (std::vector<std::vector<StateIndex>>{{0, 1, 2}}));
  EXPECT_TRUE(std::isinf(h.node(h.root()).exit_height));
}

TEST(Decompose, G3LogLinearWorkedExample) {
  const auto h = hierarchy(builtin::g3(), Kernel::LogLinear);
  EXPECT_EQ(partition(h, 1), (std::vector<std::vector<StateIndex>>{{0}, {1, 2}}));
  const auto& c = h.node(*h.find({1, 2}));
  EXPECT_EQ(c.exit_height, 2.0 + std::min(3.0, 1.0));
  EXPECT_EQ(c.exit_height, 3.0);
}

TEST(Decompose, SingleClosedClassAtLevelZero) {
  // Equal potentials and symmetric unit costs: everything is one cycle at once.
  const auto g = CostGraph::from_matrix({{0, 1, 1}, {1, 0, 1}, {1, 1, 0}}, {5, 5, 5});
  const auto h = decompose(g);
  EXPECT_EQ(h.depth(), 1u);
  EXPECT_EQ(partition(h, 1), (std::vector<std::vector<StateIndex>>{{0, 1, 2}}));
  EXPECT_EQ(h.node(h.root()).mixing_height, 1.0);
  EXPECT_EQ(h.node(h.root()).children.size(), 3u);
}

TEST(Decompose, SingleStateSpace) {
  const auto h = decompose(CostGraph({1.0}, {{}}));
  EXPECT_EQ(h.depth(), 0u);
  EXPECT_EQ(h.node(h.root()).mixing_height, 0.0);
}

TEST(Decompose, ReducibleGraphIsRejected) {
  const auto g = CostGraph({0, 1}, {{{1, 0.0}}, {}});
  EXPECT_THROW(decompose(g), PreconditionError);
}

TEST(Decompose, NonReversibleGraphIsRejected) {
  const auto g = CostGraph::from_matrix({{0, 1, 2}, {2, 0, 1}, {1, 2, 0}}, {0, 0, 0});
  EXPECT_FALSE(check_weak_reversibility(g).passed);
  EXPECT_THROW(decompose(g), PreconditionError);
}

TEST(Decompose, LevelsArePartitionsAndCoarsen) {
  for (const auto& g : full_set())
    for (auto k : kBoth) {
      const auto h = hierarchy(g, k);
      const std::size_t n = g.space().size();
      EXPECT_EQ(h.level(0).size(), n);
      EXPECT_EQ(h.level(h.depth()).size(), 1u);
      EXPECT_LE(h.depth(), n);
      for (std::size_t lv = 0; lv <= h.depth(); ++lv) {
        std::vector<int> seen(n, 0);
        for (const auto& m : partition(h, lv))
          for (auto s : m) ++seen[s];
        for (int c : seen) EXPECT_EQ(c, 1) << g.name() << " level " << lv;
        if (lv + 1 <= h.depth())
          for (std::size_t p = 0; p < h.level(lv).size(); ++p) {
            const auto& members = h.node(h.level(lv).cycles[p]).members;
            const auto q = h.position(lv + 1, members.front());
            for (auto s : members) EXPECT_EQ(h.position(lv + 1, s), q);
          }
      }
    }
}

TEST(Decompose, NodeInvariants) {
  for (const auto& g : full_set())
    for (auto k : kBoth) {
      const auto h = hierarchy(g, k);
      for (std::size_t id = 0; id < h.nodes().size(); ++id) {
        const auto& c = h.node(id);
        double top = -kInfinity;
        for (auto s : c.members) top = std::max(top, g.potential(s));
        EXPECT_EQ(c.potential, top);
        if (c.size() == 1) {
          EXPECT_EQ(c.mixing_height, 0.0);
          EXPECT_TRUE(c.children.empty());
          continue;
        }
        std::vector<StateIndex> joined;
        double h_m = 0.0;
        for (auto ch : c.children) {
          const auto& child = h.node(ch);
          EXPECT_LT(child.order, c.order);
          EXPECT_EQ(child.parent, std::optional<std::size_t>(id));
          joined.insert(joined.end(), child.members.begin(), child.members.end());
          h_m = std::max(h_m, child.exit_height);
        }
        std::sort(joined.begin(), joined.end());
        EXPECT_EQ(joined, c.members);
        EXPECT_EQ(c.mixing_height, h_m) << g.name();
      }
    }
}

TEST(Decompose, CarriedOverRowsUnchanged) {
  for (const auto& g : full_set())
    for (auto k : kBoth) {
      const auto h = hierarchy(g, k);
      for (std::size_t lv = 0; lv + 1 <= h.depth(); ++lv) {
        const auto& cur = h.level(lv);
        const auto& next = h.level(lv + 1);
        for (std::size_t i = 0; i < cur.size(); ++i) {
          const auto id = cur.cycles[i];
          const auto p = h.position(lv + 1, h.node(id).members.front());
          if (next.cycles[p] != id) continue;  // merged into a bigger cycle
          for (std::size_t q = 0; q < next.size(); ++q) {
            if (q == p) continue;
            double want = kInfinity;
            for (std::size_t j = 0; j < cur.size(); ++j)
              if (h.position(lv + 1, h.node(cur.cycles[j]).members.front()) == q) want = std::min(want, cur.cost(i, j));
            EXPECT_EQ(next.cost(p, q), want) << g.name();
          }
        }
      }
    }
}

TEST(Altitude, G3MetropolisExamples) {
  const auto g = CostGraph::from_model(build_transition_model(builtin::g3(), Kernel::Metropolis, 1.0));
  EXPECT_EQ(communication_altitude(g, 1, 2), 1.0);
  EXPECT_EQ(communication_altitude(g, 2, 1), 1.0);
  EXPECT_EQ(communication_altitude(g, 2, 0), 0.0);
  EXPECT_THROW(communication_altitude(g, 1, 1), ArgumentError);
}

TEST(Altitude, DisconnectedPairIsError) {
  const auto g = CostGraph({0, 1}, {{}, {}});
  EXPECT_THROW(communication_altitude(g, 0, 1), PreconditionError);
}

TEST(Altitude, MatchesExhaustivePathEnumeration) {
  for (const auto& game : small_games()) {
    ASSERT_LE(game.space().size(), 8u);
    for (auto k : kBoth) {
      const auto g = CostGraph::from_model(build_transition_model(game, k, 1.0));
      const AltitudeTable alt(g);
      for (StateIndex x = 0; x < g.size(); ++x)
        for (StateIndex y = 0; y < g.size(); ++y)
          if (x != y) EXPECT_EQ(alt.at(x, y), brute_altitude(g, x, y));
    }
  }
}

TEST(Structure, G3MetropolisIdentities) {
  const auto h = hierarchy(builtin::g3(), Kernel::Metropolis);
  const AltitudeTable alt(h.graph());
  const auto& c = h.node(*h.find({1, 2}));
  EXPECT_EQ(alt.cycle_altitude(c), 1.0);
  EXPECT_EQ(alt.cycle_altitude(c), c.potential - c.mixing_height);
  EXPECT_EQ(h.node(1).potential - h.node(1).exit_height, 1.0);
  EXPECT_EQ(h.node(2).potential - h.node(2).exit_height, 1.0);
  EXPECT_TRUE(std::isinf(alt.cycle_altitude(h.node(0))));

  const auto rep = verify_structure(h, alt, Kernel::Metropolis);
  EXPECT_TRUE(rep.passed());
  EXPECT_FALSE(rep.check("ml_mixing_height").skipped);
  EXPECT_GT(rep.check("ml_mixing_height").checked, 0u);
  EXPECT_EQ(c.mixing_height, 3.0 - std::min(1.0, 3.0));

  bool found = false;
  for (const auto& d : rep.exit_heights)
    if (h.node(d.node).members == std::vector<StateIndex>{1, 2}) {
      found = true;
      EXPECT_EQ(d.cda, 3.0);
      EXPECT_EQ(d.min_form, 1.0);
      EXPECT_EQ(d.max_form, 3.0);
    }
  EXPECT_TRUE(found);
  EXPECT_FALSE(rep.min_form_matches);
  EXPECT_TRUE(rep.max_form_matches);
}

TEST(Structure, HoldsOnFullGameSet) {
  for (const auto& g : full_set())
    for (auto k : kBoth) {
      const auto h = hierarchy(g, k);
      const auto rep = verify_structure(h, AltitudeTable(h.graph()), k);
      for (const auto& c : rep.checks) EXPECT_TRUE(c.passed) << g.name() << " " << kernel_name(k) << " " << c.name;
      EXPECT_EQ(rep.check("ml_mixing_height").skipped, k != Kernel::Metropolis);
    }
}

TEST(Structure, SmallestCommonCycle) {
  const auto h = hierarchy(builtin::g3(), Kernel::Metropolis);
  EXPECT_EQ(h.node(h.smallest_common(1, 2)).members, (std::vector<StateIndex>{1, 2}));
  EXPECT_EQ(h.smallest_common(0, 2), h.root());
}

TEST(Compare, G3SharedCycle) {
  const auto lll = hierarchy(builtin::g3(), Kernel::LogLinear);
  const auto ml = hierarchy(builtin::g3(), Kernel::Metropolis);
  const auto cmp = compare_hierarchies(lll, ml);
  EXPECT_TRUE(cmp.passed());
  bool found = false;
  for (const auto& s : cmp.shared)
    if (s.members == std::vector<StateIndex>{1, 2}) {
      found = true;
      EXPECT_EQ(s.exit_lll, 3.0);
      EXPECT_EQ(s.exit_ml, 3.0);
    }
  EXPECT_TRUE(found);
}

TEST(Compare, DominanceOnRandomGames) {
  for (const auto& g : builtin::random_game_set()) {
    const auto cmp = compare_hierarchies(hierarchy(g, Kernel::LogLinear), hierarchy(g, Kernel::Metropolis));
    EXPECT_EQ(cmp.exit_dominance.failures, 0u) << g.name();
    EXPECT_EQ(cmp.mixing_dominance.failures, 0u) << g.name();
    EXPECT_EQ(cmp.altitude_dominance.failures, 0u) << g.name();
    EXPECT_GE(cmp.shared.size(), g.space().size() + 1);  // singletons and the root
  }
}

TEST(Compare, UnsharedCyclesAreListed) {
  // Hand-made hierarchies over the same potentials with different groupings.
  const std::vector<double> phi = {0, 0, 0};
  const auto a = decompose(CostGraph::from_matrix({{0, 1, 2}, {1, 0, 2}, {2, 2, 0}}, phi));
  const auto b = decompose(CostGraph::from_matrix({{0, 2, 2}, {2, 0, 1}, {2, 1, 0}}, phi));
  const auto cmp = compare_hierarchies(a, b);
  EXPECT_EQ(cmp.only_lll, (std::vector<std::vector<StateIndex>>{{0, 1}}));
  EXPECT_EQ(cmp.only_ml, (std::vector<std::vector<StateIndex>>{{1, 2}}));
}

TEST(Compare, MismatchedSpacesRejected) {
  EXPECT_THROW(compare_hierarchies(hierarchy(builtin::g2(), Kernel::LogLinear), hierarchy(builtin::g3(), Kernel::Metropolis)),
               ArgumentError);
}

TEST(ExitValidation, G3MetropolisSlopeMatchesExitHeight) {
  const auto r = empirical_exit_validation(builtin::g3(), Kernel::Metropolis, {1, 2}, {0.5, 0.4, 0.3, 0.25, 0.2}, 2000, 2024);
  EXPECT_FALSE(r.truncated);
  EXPECT_EQ(r.start, 1u);
  EXPECT_NEAR(r.slope, 3.0, 0.15 * 3.0);
  EXPECT_GE(r.points.back().visited_all_fraction, 0.9);
  EXPECT_GE(r.points.back().visited_all_fraction, r.points.front().visited_all_fraction);
  EXPECT_GT(r.r_squared, 0.95);
}

TEST(ExitValidation, SingletonOfNonMaximumIsFlat) {
  const auto r = empirical_exit_validation(builtin::g3(), Kernel::Metropolis, {0}, {0.5, 0.4, 0.3, 0.25, 0.2}, 2000, 3);
  EXPECT_NEAR(r.slope, 0.0, 0.05);
  EXPECT_NEAR(r.points.front().mean, 1.5, 0.1);
}

TEST(ExitValidation, DeterministicPerSeed) {
  const auto a = empirical_exit_validation(builtin::g3(), Kernel::LogLinear, {1, 2}, {0.5, 0.3}, 200, 11);
  const auto b = empirical_exit_validation(builtin::g3(), Kernel::LogLinear, {1, 2}, {0.5, 0.3}, 200, 11);
  EXPECT_EQ(a.slope, b.slope);
  EXPECT_EQ(a.points[1].mean, b.points[1].mean);
}

TEST(ExitValidation, ArgumentChecks) {
  const auto g3 = builtin::g3();
  EXPECT_THROW(empirical_exit_validation(g3, Kernel::Metropolis, {}, {0.5, 0.2}, 10, 1), ArgumentError);
  EXPECT_THROW(empirical_exit_validation(g3, Kernel::Metropolis, {1, 2}, {0.2, 0.5}, 10, 1), ArgumentError);
  EXPECT_THROW(empirical_exit_validation(g3, Kernel::Metropolis, {1, 2}, {0.5}, 10, 1), ArgumentError);
}

TEST(ExitValidation, TruncationIsFlagged) {
  const auto r = empirical_exit_validation(builtin::g3(), Kernel::Metropolis, {1, 2}, {0.5, 0.2}, 20, 1, {}, 1);
  EXPECT_TRUE(r.truncated);
  EXPECT_GT(r.points.back().truncated, 0u);
}

TEST(Dot, G3MetropolisLevels) {
  const auto h = hierarchy(builtin::g3(), Kernel::Metropolis);
  const auto level0 = export_dot(h, 0);
  EXPECT_EQ(level0.find("subgraph"), std::string::npos);
  EXPECT_NE(level0.find("digraph level_0"), std::string::npos);
  for (const char* node : {"s0 [", "s1 [", "s2 ["}) EXPECT_NE(level0.find(node), std::string::npos);

  const auto level1 = export_dot(h, 1);
  EXPECT_NE(level1.find("cluster_0"), std::string::npos);
  EXPECT_NE(level1.find("cluster_1"), std::string::npos);
  EXPECT_EQ(level1.find("cluster_2"), std::string::npos);
  EXPECT_NE(level1.find("s1 -> s0 [label=\"3/0\", ltail=cluster_1, lhead=cluster_0]"), std::string::npos) << level1;
  EXPECT_NE(level1.find("H_e=3, H_m=2, φ=3"), std::string::npos);
  EXPECT_EQ(export_dot(h, 1), level1);
}
