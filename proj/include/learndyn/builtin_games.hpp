#ifndef LEARNDYN_BUILTIN_GAMES_HPP
#define LEARNDYN_BUILTIN_GAMES_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "learndyn/game.hpp"
#include "learndyn/rng.hpp"

namespace learndyn::builtin {

/// Two players, two actions, identical interest: phi(0,0)=0, phi(1,0)=1,
/// phi(0,1)=2, phi(1,1)=4 and U_i = phi.
inline GameDefinition g2() {
  std::vector<double> phi = {0.0, 1.0, 2.0, 4.0};  // indices (0,0),(1,0),(0,1),(1,1)
  std::vector<std::vector<double>> u;
  for (double v : phi) u.push_back({v, v});
  return GameDefinition::from_table({2, 2}, std::move(u), phi, "G2");
}

/// One player, three actions with U(0)=0, U(1)=1, U(2)=3.
inline GameDefinition g3() {
  std::vector<double> phi = {0.0, 1.0, 3.0};
  std::vector<std::vector<double>> u;
  for (double v : phi) u.push_back({v});
  return GameDefinition::from_table({3}, std::move(u), phi, "G3");
}

/// Identical-interest game U_i = phi over an arbitrary potential table.
inline GameDefinition identical_interest(std::vector<std::size_t> action_sizes, std::vector<double> phi,
                                         std::string name = "identical-interest") {
  std::vector<std::vector<double>> u;
  const std::size_t n = action_sizes.size();
  for (double v : phi) u.emplace_back(n, v);
  return GameDefinition::from_table(std::move(action_sizes), std::move(u), std::move(phi), std::move(name));
}

struct RandomGameParams {
  std::size_t min_players = 2;
  std::size_t max_players = 3;
  std::size_t min_actions = 2;
  std::size_t max_actions = 3;
  int dummy_range = 3;  // per-player opponent-only term drawn from [-r, r]
};

/// Random exact potential game with integer utilities
///   U_i(a) = phi(a) + d_i(a_{-i})
/// where phi is a random permutation of strictly increasing integers, so
/// Hamming neighbors never share a potential value.
///
/// Draw order: player count; each action-set size; increments 1..3 for the
/// sorted potential levels; Fisher-Yates shuffle (from the last slot down);
/// then d_i for every player i and every profile with a_i = 0, in index order.
inline GameDefinition random_potential_game(std::uint64_t seed, const RandomGameParams& params = {}) {
  Rng rng(seed);
  const std::size_t n = params.min_players + rng.below(params.max_players - params.min_players + 1);
  std::vector<std::size_t> sizes(n);
  for (auto& m : sizes) m = params.min_actions + rng.below(params.max_actions - params.min_actions + 1);
  ProfileSpace space(sizes);
  const std::size_t count = space.size();

  std::vector<double> levels(count);
  double level = 0.0;
  for (auto& v : levels) {
    level += 1.0 + static_cast<double>(rng.below(3));
    v = level;
  }
  for (std::size_t k = count; k > 1; --k) std::swap(levels[k - 1], levels[rng.below(k)]);

  const int range = params.dummy_range;
  std::vector<std::vector<double>> dummy(n, std::vector<double>(count, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (StateIndex s = 0; s < count; ++s)
      if (space.action_of(s, i) == 0)
        dummy[i][s] = static_cast<double>(static_cast<int>(rng.below(2 * range + 1)) - range);

  std::vector<std::vector<double>> u(count, std::vector<double>(n));
  for (StateIndex s = 0; s < count; ++s)
    for (std::size_t i = 0; i < n; ++i) u[s][i] = levels[s] + dummy[i][space.with_action(s, i, 0)];

  return GameDefinition::from_table(std::move(sizes), std::move(u), std::move(levels),
                                    "random-" + std::to_string(seed));
}

/// The seeded random games used across the property and acceptance suites.
inline std::vector<GameDefinition> random_game_set(std::size_t count = 20, std::uint64_t base_seed = 1000) {
  std::vector<GameDefinition> games;
  for (std::size_t k = 0; k < count; ++k) games.push_back(random_potential_game(base_seed + k));
  return games;
}

}  // namespace learndyn::builtin

#endif  // LEARNDYN_BUILTIN_GAMES_HPP
