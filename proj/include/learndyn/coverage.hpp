#ifndef LEARNDYN_COVERAGE_HPP
#define LEARNDYN_COVERAGE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "learndyn/errors.hpp"
#include "learndyn/game.hpp"
#include "learndyn/rng.hpp"

namespace learndyn::coverage {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Sensors on the grid {0..d}x{0..d}. Action k of sensor i is the sensing
/// radius radii_options[i][k]; action 0 is always radius 0 ("off").
struct SensorConfig {
  int d = 0;
  std::vector<Point2> locations;
  std::vector<std::vector<double>> radii_options;
  double alpha = 1.0;
  double comm_range = 0.0;  // recorded only

  std::size_t sensors() const noexcept { return locations.size(); }

  void validate() const {
    if (d < 0) throw ArgumentError("grid extent d must be nonnegative");
    if (locations.empty()) throw ArgumentError("coverage game needs at least one sensor");
    if (radii_options.size() != locations.size())
      throw ArgumentError("one radius list per sensor is required");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must lie in (0, 1]");
    for (std::size_t i = 0; i < locations.size(); ++i) {
      const auto& p = locations[i];
      if (p.x < 0.0 || p.y < 0.0 || p.x > d || p.y > d)
        throw ArgumentError("sensor " + std::to_string(i) + " lies outside [0,d]^2");
      const auto& r = radii_options[i];
      if (r.empty() || r[0] != 0.0)
        throw ArgumentError("sensor " + std::to_string(i) + ": first action must be radius 0");
      for (std::size_t k = 1; k < r.size(); ++k)
        if (!(r[k] > r[k - 1])) throw ArgumentError("sensor " + std::to_string(i) + ": radii must be strictly increasing");
    }
  }

  std::vector<std::size_t> action_sizes() const {
    std::vector<std::size_t> out;
    for (const auto& r : radii_options) out.push_back(r.size());
    return out;
  }
};

/// Lattice offsets (dx,dy) with dx^2 + dy^2 <= r^2. Position independent.
inline long r_max_points(double r) {
  if (r < 0.0) throw ArgumentError("radius must be nonnegative");
  const long bound = static_cast<long>(std::floor(r));
  const double r2 = r * r;
  long count = 0;
  for (long dx = -bound; dx <= bound; ++dx)
    for (long dy = -bound; dy <= bound; ++dy)
      if (static_cast<double>(dx * dx + dy * dy) <= r2) ++count;
  return count;
}

inline bool in_footprint(const Point2& sensor, double radius, int gx, int gy) {
  const double dx = sensor.x - gx;
  const double dy = sensor.y - gy;
  return dx * dx + dy * dy <= radius * radius;
}

inline void require_profile(const SensorConfig& config, const ActionProfile& a) {
  if (a.size() != config.sensors()) throw ArgumentError("profile length does not match sensor count");
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] >= config.radii_options[i].size())
      throw ArgumentError("sensor " + std::to_string(i) + ": invalid action " + std::to_string(a[i]));
}

/// c(p): some sensor that is on covers grid point (gx, gy).
inline bool covered(const SensorConfig& config, int gx, int gy, const ActionProfile& a) {
  require_profile(config, a);
  if (gx < 0 || gy < 0 || gx > config.d || gy > config.d) throw ArgumentError("point is not on the grid");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] == 0) continue;
    if (in_footprint(config.locations[i], config.radii_options[i][a[i]], gx, gy)) return true;
  }
  return false;
}

inline long total_coverage(const SensorConfig& config, const ActionProfile& a) {
  require_profile(config, a);
  long count = 0;
  for (int gx = 0; gx <= config.d; ++gx)
    for (int gy = 0; gy <= config.d; ++gy)
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != 0 && in_footprint(config.locations[i], config.radii_options[i][a[i]], gx, gy)) {
          ++count;
          break;
        }
  return count;
}

/// C_i(a_i) = ceil(alpha * R_max(radius)); zero when off.
inline long sensor_cost(const SensorConfig& config, std::size_t i, std::size_t action) {
  if (i >= config.sensors()) throw ArgumentError("sensor index out of range");
  if (action >= config.radii_options[i].size()) throw ArgumentError("invalid action for sensor " + std::to_string(i));
  if (action == 0) return 0;
  // Guard against alpha * count landing a hair above an integer.
  const double scaled = config.alpha * static_cast<double>(r_max_points(config.radii_options[i][action]));
  return static_cast<long>(std::ceil(scaled - 1e-9));
}

inline double global_payoff(const SensorConfig& config, const ActionProfile& a) {
  long cost = 0;
  for (std::size_t i = 0; i < a.size(); ++i) cost += sensor_cost(config, i, a[i]);
  return static_cast<double>(total_coverage(config, a) - cost);
}

/// [U(a) - U(r_0, a_-i)] - C_i(a_i) = G(a) - G(r_0, a_-i).
inline double marginal_utility(const SensorConfig& config, std::size_t i, const ActionProfile& a) {
  require_profile(config, a);
  if (i >= config.sensors()) throw ArgumentError("sensor index out of range");
  if (a[i] == 0) return 0.0;
  const ActionProfile off = a.with(i, 0);
  return static_cast<double>(total_coverage(config, a) - total_coverage(config, off) - sensor_cost(config, i, a[i]));
}

/// Fast evaluator of G over profiles. For every grid point, the sensors able
/// to reach it and the smallest action index that does.
class PayoffEvaluator {
 public:
  explicit PayoffEvaluator(const SensorConfig& config) : space_(config.action_sizes()) {
    for (int gx = 0; gx <= config.d; ++gx)
      for (int gy = 0; gy <= config.d; ++gy) {
        std::vector<std::pair<std::size_t, std::size_t>> reach;
        for (std::size_t i = 0; i < config.sensors(); ++i) {
          const auto& radii = config.radii_options[i];
          for (std::size_t k = 1; k < radii.size(); ++k)
            if (in_footprint(config.locations[i], radii[k], gx, gy)) {
              reach.emplace_back(i, k);
              break;
            }
        }
        if (!reach.empty()) points_.push_back(std::move(reach));
      }
    costs_.resize(config.sensors());
    for (std::size_t i = 0; i < config.sensors(); ++i)
      for (std::size_t k = 0; k < config.radii_options[i].size(); ++k) costs_[i].push_back(sensor_cost(config, i, k));
  }

  double payoff(const ActionProfile& a) const {
    long cov = 0;
    for (const auto& reach : points_)
      for (const auto& [i, k] : reach)
        if (a[i] >= k) {
          ++cov;
          break;
        }
    long cost = 0;
    for (std::size_t i = 0; i < a.size(); ++i) cost += costs_[i][a[i]];
    return static_cast<double>(cov - cost);
  }

  const ProfileSpace& space() const noexcept { return space_; }

 private:
  ProfileSpace space_;
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> points_;
  std::vector<std::vector<long>> costs_;
};

/// Sensor coverage game: utilities are marginal contributions with base
/// action r_0, so the global payoff G is an exact potential.
class CoverageGame {
 public:
  static constexpr std::size_t kMemoCap = std::size_t{1} << 16;

  explicit CoverageGame(SensorConfig config, std::string name = "coverage")
      : config_((config.validate(), std::move(config))), game_(make_game(config_, std::move(name))) {}

  const SensorConfig& config() const noexcept { return config_; }
  const GameDefinition& game() const noexcept { return game_; }

 private:
  static GameDefinition make_game(const SensorConfig& config, std::string name) {
    auto eval = std::make_shared<const PayoffEvaluator>(config);
    const ProfileSpace& space = eval->space();
    // Memo filled once, before the oracle is shared; read-only afterwards.
    std::shared_ptr<const std::vector<double>> memo;
    if (space.size() <= kMemoCap) {
      std::vector<double> table(space.size());
      for (StateIndex s = 0; s < table.size(); ++s) table[s] = eval->payoff(space.profile(s));
      memo = std::make_shared<const std::vector<double>>(std::move(table));
    }
    auto payoff = [eval, memo](const ActionProfile& a) {
      return memo ? (*memo)[eval->space().index(a)] : eval->payoff(a);
    };
    GameDefinition::UtilityFn u = [payoff](std::size_t i, const ActionProfile& a) {
      if (a[i] == 0) return 0.0;
      return payoff(a) - payoff(a.with(i, 0));
    };
    return GameDefinition(config.action_sizes(), std::move(u), GameDefinition::PotentialFn(payoff), std::move(name));
  }

  SensorConfig config_;
  GameDefinition game_;
};

/// Uniform sensor locations over [0,d]^2. Draw order: x then y for sensor
/// 0, then sensor 1, ...; each coordinate is uniform01() * d.
inline SensorConfig random_sensor_config(int d, std::size_t n, const std::vector<double>& radii, double alpha,
                                         std::uint64_t seed, double comm_range = 0.0) {
  Rng rng(seed);
  SensorConfig cfg;
  cfg.d = d;
  cfg.alpha = alpha;
  cfg.comm_range = comm_range;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform01() * d;
    const double y = rng.uniform01() * d;
    cfg.locations.push_back({x, y});
    cfg.radii_options.push_back(radii);
  }
  cfg.validate();
  return cfg;
}

/// Sensor positions of the three-sensor on/off case study.
inline std::vector<Point2> three_sensor_locations() { return {{9.03, 3.98}, {8.4, 1.4}, {1.96, 6.35}}; }

inline SensorConfig three_sensor_config(double radius, double alpha = 0.2) {
  SensorConfig cfg;
  cfg.d = 10;
  cfg.alpha = alpha;
  cfg.locations = three_sensor_locations();
  cfg.radii_options.assign(3, {0.0, radius});
  cfg.validate();
  return cfg;
}

struct CalibrationResult {
  std::optional<int> radius;
  std::vector<int> rejected;  // radii tried before the accepted one
};

/// Smallest integer radius in [lo, hi] for which the on/off game over the
/// given locations has Nash set exactly `expected_nash`, `expected_maximizer`
/// is the strict potential maximizer, and no two Hamming neighbors tie in G.
inline CalibrationResult calibrate_on_off_radius(const std::vector<Point2>& locations, int d, double alpha,
                                                 const std::vector<ActionProfile>& expected_nash,
                                                 const ActionProfile& expected_maximizer, int lo = 1, int hi = 6) {
  CalibrationResult out;
  for (int r = lo; r <= hi; ++r) {
    SensorConfig cfg;
    cfg.d = d;
    cfg.alpha = alpha;
    cfg.locations = locations;
    cfg.radii_options.assign(locations.size(), {0.0, static_cast<double>(r)});
    CoverageGame cg(cfg);
    const auto& game = cg.game();
    const auto& space = game.space();

    std::vector<StateIndex> want;
    for (const auto& p : expected_nash) want.push_back(space.index(p));
    std::sort(want.begin(), want.end());
    bool ok = enumerate_nash(game).members == want;

    const StateIndex top = space.index(expected_maximizer);
    const double g_top = game.potential(top);
    for (StateIndex s = 0; ok && s < space.size(); ++s)
      if (s != top && game.potential(s) >= g_top) ok = false;

    for (StateIndex s = 0; ok && s < space.size(); ++s)
      for (std::size_t i = 0; ok && i < space.players(); ++i)
        for (std::size_t k = 0; ok && k < space.action_count(i); ++k) {
          const StateIndex t = space.with_action(s, i, k);
          if (t != s && game.potential(s) == game.potential(t)) ok = false;
        }

    if (ok) {
      out.radius = r;
      return out;
    }
    out.rejected.push_back(r);
  }
  return out;
}

}  // namespace learndyn::coverage

#endif  // LEARNDYN_COVERAGE_HPP
