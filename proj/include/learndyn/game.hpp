#ifndef LEARNDYN_GAME_HPP
#define LEARNDYN_GAME_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "learndyn/errors.hpp"
#include "learndyn/profile.hpp"

namespace learndyn {

inline constexpr std::size_t kDefaultStateCap = std::size_t{1} << 20;
inline constexpr double kDefaultTieTolerance = 1e-9;

/// A finite strategic game: player count, action-set sizes, a utility oracle
/// and an optional potential oracle. Immutable after construction.
class GameDefinition {
 public:
  using UtilityFn = std::function<double(std::size_t player, const ActionProfile&)>;
  using PotentialFn = std::function<double(const ActionProfile&)>;

  GameDefinition(std::vector<std::size_t> action_sizes, UtilityFn utility,
                 std::optional<PotentialFn> potential = std::nullopt, std::string name = {})
      : space_(std::move(action_sizes)),
        utility_(std::move(utility)),
        potential_(std::move(potential)),
        name_(std::move(name)) {
    if (!utility_) throw ArgumentError("game requires a utility oracle");
  }

  /// Game backed by dense tables. utilities[s][i] is U_i at profile index s.
  static GameDefinition from_table(std::vector<std::size_t> action_sizes,
                                   std::vector<std::vector<double>> utilities,
                                   std::optional<std::vector<double>> potential = std::nullopt,
                                   std::string name = {}) {
    ProfileSpace space(action_sizes);
    if (utilities.size() != space.size())
      throw ArgumentError("utility table has " + std::to_string(utilities.size()) + " rows, expected " +
                          std::to_string(space.size()));
    for (const auto& row : utilities)
      if (row.size() != space.players())
        throw ArgumentError("utility table row must have one entry per player");
    if (potential && potential->size() != space.size())
      throw ArgumentError("potential table size does not match the joint action space");

    auto table = std::make_shared<const std::vector<std::vector<double>>>(std::move(utilities));
    UtilityFn u = [table, space](std::size_t i, const ActionProfile& a) {
      return (*table)[space.index(a)][i];
    };
    std::optional<PotentialFn> phi;
    if (potential) {
      auto ptable = std::make_shared<const std::vector<double>>(std::move(*potential));
      phi = [ptable, space](const ActionProfile& a) { return (*ptable)[space.index(a)]; };
    }
    return GameDefinition(std::move(action_sizes), std::move(u), std::move(phi), std::move(name));
  }

  const ProfileSpace& space() const noexcept { return space_; }
  std::size_t players() const noexcept { return space_.players(); }
  const std::vector<std::size_t>& action_sizes() const noexcept { return space_.action_sizes(); }
  const std::string& name() const noexcept { return name_; }

  double utility(std::size_t player, const ActionProfile& a) const {
    if (player >= players())
      throw ArgumentError("player index " + std::to_string(player) + " out of range");
    space_.require_valid(a);
    return utility_(player, a);
  }

  double utility(std::size_t player, StateIndex s) const { return utility(player, space_.profile(s)); }

  bool has_potential() const noexcept { return potential_.has_value(); }

  double potential(const ActionProfile& a) const {
    if (!potential_) throw PreconditionError("game '" + name_ + "' has no potential oracle");
    space_.require_valid(a);
    return (*potential_)(a);
  }

  double potential(StateIndex s) const { return potential(space_.profile(s)); }

  /// Potential values for every profile index.
  std::vector<double> potential_table(std::size_t cap = kDefaultStateCap) const {
    require_enumerable(cap);
    std::vector<double> out(space_.size());
    for (StateIndex s = 0; s < out.size(); ++s) out[s] = potential(s);
    return out;
  }

  void require_enumerable(std::size_t cap = kDefaultStateCap) const {
    if (space_.size() > cap) throw CapacityError("joint action space too large to enumerate", space_.size(), cap);
  }

  /// Same utilities, different potential oracle (used to build counterexamples).
  GameDefinition with_potential(std::optional<PotentialFn> potential) const {
    GameDefinition g = *this;
    g.potential_ = std::move(potential);
    return g;
  }

 private:
  ProfileSpace space_;
  UtilityFn utility_;
  std::optional<PotentialFn> potential_;
  std::string name_;
};

/// U_i(alpha, a_{-i}) for every alpha in A_i.
inline std::vector<double> utilities_over_actions(const GameDefinition& game, std::size_t player,
                                                  const ActionProfile& a) {
  const std::size_t m = game.space().action_count(player);
  std::vector<double> u(m);
  ActionProfile b = a;
  for (std::size_t alpha = 0; alpha < m; ++alpha) {
    b[player] = alpha;
    u[alpha] = game.utility(player, b);
  }
  return u;
}

/// B_i(a_{-i}): actions within `tol` of the best utility. Never empty.
inline std::vector<std::size_t> best_response_set(const GameDefinition& game, std::size_t player,
                                                  const ActionProfile& a, double tol = kDefaultTieTolerance) {
  if (player >= game.players()) throw ArgumentError("player index out of range");
  game.space().require_valid(a);
  const auto u = utilities_over_actions(game, player, a);
  double best = u[0];
  for (double v : u) best = v > best ? v : best;
  std::vector<std::size_t> out;
  for (std::size_t alpha = 0; alpha < u.size(); ++alpha)
    if (u[alpha] >= best - tol) out.push_back(alpha);
  return out;
}

inline bool is_nash(const GameDefinition& game, const ActionProfile& a, double tol = kDefaultTieTolerance) {
  game.space().require_valid(a);
  for (std::size_t i = 0; i < game.players(); ++i) {
    const double current = game.utility(i, a);
    ActionProfile b = a;
    for (std::size_t alpha = 0; alpha < game.space().action_count(i); ++alpha) {
      b[i] = alpha;
      if (game.utility(i, b) > current + tol) return false;
    }
  }
  return true;
}

/// The exact set of pure Nash equilibria, as sorted profile indices.
struct NashSet {
  std::vector<StateIndex> members;

  bool contains(StateIndex s) const {
    for (auto m : members)
      if (m == s) return true;
    return false;
  }
  std::size_t size() const noexcept { return members.size(); }
};

inline NashSet enumerate_nash(const GameDefinition& game, std::size_t cap = kDefaultStateCap,
                              double tol = kDefaultTieTolerance) {
  game.require_enumerable(cap);
  NashSet out;
  for (StateIndex s = 0; s < game.space().size(); ++s)
    if (is_nash(game, game.space().profile(s), tol)) out.members.push_back(s);
  return out;
}

struct PotentialCheck {
  bool holds = true;
  // First violating unilateral deviation: player deviates from `profile` to `alternative`.
  std::optional<std::size_t> player;
  std::optional<ActionProfile> profile;
  std::optional<std::size_t> alternative;
  double discrepancy = 0.0;
};

/// Exhaustively checks U_i(alpha,a_-i) - U_i(alt,a_-i) == phi(alpha,a_-i) - phi(alt,a_-i).
inline PotentialCheck verify_potential(const GameDefinition& game, double tol = 0.0,
                                       std::size_t cap = kDefaultStateCap) {
  if (!game.has_potential()) throw PreconditionError("verify_potential: game has no potential oracle");
  game.require_enumerable(cap);
  const auto& space = game.space();
  for (StateIndex s = 0; s < space.size(); ++s) {
    const ActionProfile a = space.profile(s);
    const double phi_a = game.potential(a);
    for (std::size_t i = 0; i < game.players(); ++i) {
      const double u_a = game.utility(i, a);
      for (std::size_t alt = 0; alt < space.action_count(i); ++alt) {
        if (alt == a[i]) continue;
        const ActionProfile b = a.with(i, alt);
        const double diff = (u_a - game.utility(i, b)) - (phi_a - game.potential(b));
        if (std::abs(diff) > tol) return {false, i, a, alt, diff};
      }
    }
  }
  return {};
}

/// Without a player: all profiles at Hamming distance 1. With a player i:
/// N_h(a, i), every profile that differs from a at most in coordinate i (a included).
inline std::vector<ActionProfile> neighborhood(const ProfileSpace& space, const ActionProfile& a,
                                               std::optional<std::size_t> player = std::nullopt) {
  space.require_valid(a);
  std::vector<ActionProfile> out;
  if (player) {
    if (*player >= space.players()) throw ArgumentError("player index out of range");
    for (std::size_t alpha = 0; alpha < space.action_count(*player); ++alpha)
      out.push_back(a.with(*player, alpha));
    return out;
  }
  for (std::size_t i = 0; i < space.players(); ++i)
    for (std::size_t alpha = 0; alpha < space.action_count(i); ++alpha)
      if (alpha != a[i]) out.push_back(a.with(i, alpha));
  return out;
}

inline std::vector<ActionProfile> neighborhood(const GameDefinition& game, const ActionProfile& a,
                                               std::optional<std::size_t> player = std::nullopt) {
  return neighborhood(game.space(), a, player);
}

/// Profiles with no Hamming-1 neighbor of strictly higher potential.
inline std::vector<StateIndex> potential_local_maxima(const GameDefinition& game, double tol = kDefaultTieTolerance,
                                                      std::size_t cap = kDefaultStateCap) {
  game.require_enumerable(cap);
  std::vector<StateIndex> out;
  const auto& space = game.space();
  for (StateIndex s = 0; s < space.size(); ++s) {
    const ActionProfile a = space.profile(s);
    const double phi = game.potential(a);
    bool local_max = true;
    for (const auto& b : neighborhood(space, a))
      if (game.potential(b) > phi + tol) {
        local_max = false;
        break;
      }
    if (local_max) out.push_back(s);
  }
  return out;
}

}  // namespace learndyn

#endif  // LEARNDYN_GAME_HPP
