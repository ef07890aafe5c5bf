#ifndef LEARNDYN_FIXTURES_HPP
#define LEARNDYN_FIXTURES_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "learndyn/builtin_games.hpp"
#include "learndyn/coverage.hpp"
#include "learndyn/errors.hpp"
#include "learndyn/game.hpp"

namespace learndyn {

using json = nlohmann::json;

// Game fixture documents (JSON):
//   {"type": "table", "name": ..., "action_sizes": [..],
//    "utilities": [[U_0, U_1, ...] per profile index], "potential": [..] (optional)}
//   {"type": "builtin", "name": "G2" | "G3" | "random", "seed": N (random only)}
//   {"type": "coverage", "name": ..., "d": 10, "alpha": 0.2, "comm_range": 0,
//    "sensors": [{"x": .., "y": .., "radii": [0, r1, ...]}, ...]}

namespace detail {

inline const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(where + ": missing field '" + key + "'");
  return *it;
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
  const auto& v = field(j, key, where);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  return get<T>(j, key, where);
}

}  // namespace detail

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline coverage::SensorConfig sensor_config_from_json(const json& j, const std::string& where = "game") {
  using detail::get;
  coverage::SensorConfig cfg;
  cfg.d = get<int>(j, "d", where);
  cfg.alpha = get<double>(j, "alpha", where);
  cfg.comm_range = detail::get_or<double>(j, "comm_range", where, 0.0);
  const auto& sensors = detail::field(j, "sensors", where);
  if (!sensors.is_array() || sensors.empty()) throw ConfigError(where + ".sensors: expected a nonempty array");
  for (std::size_t i = 0; i < sensors.size(); ++i) {
    const std::string at = where + ".sensors[" + std::to_string(i) + "]";
    cfg.locations.push_back({get<double>(sensors[i], "x", at), get<double>(sensors[i], "y", at)});
    cfg.radii_options.push_back(get<std::vector<double>>(sensors[i], "radii", at));
  }
  try {
    cfg.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return cfg;
}

inline json sensor_config_to_json(const coverage::SensorConfig& cfg, const std::string& name = "coverage") {
  json sensors = json::array();
  for (std::size_t i = 0; i < cfg.sensors(); ++i)
    sensors.push_back({{"x", cfg.locations[i].x}, {"y", cfg.locations[i].y}, {"radii", cfg.radii_options[i]}});
  return {{"type", "coverage"}, {"name", name}, {"d", cfg.d}, {"alpha", cfg.alpha},
          {"comm_range", cfg.comm_range}, {"sensors", sensors}};
}

/// A loaded game plus, for coverage fixtures, the sensor configuration.
struct LoadedGame {
  GameDefinition game;
  std::optional<coverage::SensorConfig> sensors;
};

inline LoadedGame game_from_json(const json& j, const std::string& where = "game") {
  using detail::get;
  const auto type = get<std::string>(j, "type", where);
  if (type == "builtin") {
    const auto name = get<std::string>(j, "name", where);
    if (name == "G2") return {builtin::g2(), std::nullopt};
    if (name == "G3") return {builtin::g3(), std::nullopt};
    if (name == "random") return {builtin::random_potential_game(get<std::uint64_t>(j, "seed", where)), std::nullopt};
    throw ConfigError(where + ".name: unknown built-in game '" + name + "'");
  }
  if (type == "table") {
    const auto sizes = get<std::vector<std::size_t>>(j, "action_sizes", where);
    const auto utilities = get<std::vector<std::vector<double>>>(j, "utilities", where);
    std::optional<std::vector<double>> potential;
    if (j.contains("potential")) potential = get<std::vector<double>>(j, "potential", where);
    try {
      return {GameDefinition::from_table(sizes, utilities, potential, detail::get_or<std::string>(j, "name", where, "table")),
              std::nullopt};
    } catch (const ArgumentError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  if (type == "coverage") {
    auto cfg = sensor_config_from_json(j, where);
    coverage::CoverageGame cg(cfg, detail::get_or<std::string>(j, "name", where, "coverage"));
    return {cg.game(), cfg};
  }
  throw ConfigError(where + ".type: unknown fixture type '" + type + "'");
}

/// Dense table fixture for any enumerable game.
inline json game_to_json(const GameDefinition& game, std::size_t cap = kDefaultStateCap) {
  game.require_enumerable(cap);
  const auto& space = game.space();
  json u = json::array();
  for (StateIndex s = 0; s < space.size(); ++s) {
    json row = json::array();
    for (std::size_t i = 0; i < game.players(); ++i) row.push_back(game.utility(i, s));
    u.push_back(row);
  }
  json out = {{"type", "table"}, {"name", game.name()}, {"action_sizes", space.action_sizes()}, {"utilities", u}};
  if (game.has_potential()) out["potential"] = game.potential_table(cap);
  return out;
}

}  // namespace learndyn

#endif  // LEARNDYN_FIXTURES_HPP
