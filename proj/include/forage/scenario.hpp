#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "forage/engine.hpp"
#include "forage/error.hpp"

namespace forage {

// Scenario files are JSON documents with a closed schema: unknown keys are
// rejected with the offending path so typos never silently fall back to
// defaults. Only "map" is required.
//
// {
//   "name": "greedy",                      // optional report label
//   "map": "maps/open40.map",              // path, relative to this file
//   "seed": 12345,
//   "episodes": 100,
//   "horizon": 150,
//   "teams": {
//     "scouts":   {"count": 2, "speed": 2, "sensing_radius": 4.0},
//     "foragers": {"count": 2, "speed": 1, "sensing_radius": 0.0}
//   },
//   "spawn": {"k_mean": 100, "k_std": 15, "k_min": 10, "k_max": 200,
//             "spread_std": 3.0},
//   "drift": {"w_wind": 1.0, "w_rand": 1.0, "dt": 1.0,
//             "wind_max": 0.05, "rand_max": 0.05},
//   "idleness": {"forgetting": 0.95, "mode": "observe"},
//   "policies": {"scouts": "greedy", "foragers": "greedy"},
//   "levy": {"alpha": 1.5, "cap": 20.0},
//   "start": {"mode": "uniform"} | {"mode": "fixed", "cell": [i, j]},
//   "output_dir": "out"
// }
struct Scenario {
  std::string name;
  std::string map_path;
  std::shared_ptr<const GridMap> map;
  std::uint64_t seed = 0;
  int episodes = 100;
  int horizon = 150;
  TeamConfig teams;
  SpawnParams spawn;
  DriftParams drift;
  double forgetting = 0.95;
  IdlenessMode idleness_mode = IdlenessMode::Observe;
  std::string scout_policy = "greedy";
  std::string forager_policy = "greedy";
  LevyParams levy;
  std::optional<NodeId> start_cell;
  std::string output_dir = "out";

  EpisodeConfig episode_config() const {
    EpisodeConfig cfg;
    cfg.map = map;
    cfg.teams = teams;
    cfg.spawn = spawn;
    cfg.drift = drift;
    cfg.horizon = horizon;
    cfg.master_seed = seed;
    cfg.forgetting = forgetting;
    cfg.idleness_mode = idleness_mode;
    cfg.scout_policy = scout_policy;
    cfg.forager_policy = forager_policy;
    cfg.levy = levy;
    cfg.start_cell = start_cell;
    cfg.algorithm_label = name;
    return cfg;
  }
};

namespace scenario_detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::set<std::string>& known,
                           const std::string& path) {
  if (!obj.is_object())
    throw ConfigError(path + ": expected a JSON object");
  for (const auto& [key, value] : obj.items())
    if (!known.count(key))
      throw ConfigError(path + "." + key + ": unknown key");
}

template <typename T>
T get_or(const json& obj, const std::string& key, T fallback,
         const std::string& path) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const std::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

inline TeamSpec parse_team(const json& j, TeamSpec d, const std::string& path) {
  reject_unknown(j, {"count", "speed", "sensing_radius"}, path);
  d.count = get_or(j, "count", d.count, path);
  d.speed = get_or(j, "speed", d.speed, path);
  d.sensing_radius = get_or(j, "sensing_radius", d.sensing_radius, path);
  return d;
}

}  // namespace scenario_detail

inline Scenario load_scenario(const std::string& path) {
  using scenario_detail::get_or;
  using scenario_detail::reject_unknown;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const std::exception& e) {
    throw ConfigError("scenario " + path + ": invalid JSON: " + e.what());
  }
  reject_unknown(j,
                 {"name", "map", "seed", "episodes", "horizon", "teams",
                  "spawn", "drift", "idleness", "policies", "levy", "start",
                  "output_dir"},
                 "scenario");

  Scenario s;
  if (!j.contains("map"))
    throw ConfigError("scenario.map: required field is missing");
  s.map_path = j.at("map").get<std::string>();
  std::filesystem::path resolved = s.map_path;
  if (resolved.is_relative())
    resolved = std::filesystem::path(path).parent_path() / resolved;
  std::ifstream map_in(resolved);
  if (!map_in)
    throw ConfigError("scenario.map: cannot open map file '" +
                      resolved.string() + "'");
  std::string text((std::istreambuf_iterator<char>(map_in)),
                   std::istreambuf_iterator<char>());
  s.map = std::make_shared<const GridMap>(GridMap::from_text(text));

  s.name = get_or<std::string>(j, "name", "", "scenario");
  s.seed = get_or<std::uint64_t>(j, "seed", 0, "scenario");
  s.episodes = get_or(j, "episodes", s.episodes, "scenario");
  s.horizon = get_or(j, "horizon", s.horizon, "scenario");
  if (s.episodes < 1) throw ConfigError("scenario.episodes: must be >= 1");
  if (s.horizon < 1) throw ConfigError("scenario.horizon: must be >= 1");

  if (j.contains("teams")) {
    reject_unknown(j.at("teams"), {"scouts", "foragers"}, "scenario.teams");
    if (j.at("teams").contains("scouts"))
      s.teams.scouts = scenario_detail::parse_team(
          j.at("teams").at("scouts"), s.teams.scouts, "scenario.teams.scouts");
    if (j.at("teams").contains("foragers"))
      s.teams.foragers =
          scenario_detail::parse_team(j.at("teams").at("foragers"),
                                      s.teams.foragers,
                                      "scenario.teams.foragers");
  }
  if (j.contains("spawn")) {
    const auto& sp = j.at("spawn");
    reject_unknown(sp, {"k_mean", "k_std", "k_min", "k_max", "spread_std"},
                   "scenario.spawn");
    s.spawn.k_mean = get_or(sp, "k_mean", s.spawn.k_mean, "scenario.spawn");
    s.spawn.k_std = get_or(sp, "k_std", s.spawn.k_std, "scenario.spawn");
    s.spawn.k_min = get_or(sp, "k_min", s.spawn.k_min, "scenario.spawn");
    s.spawn.k_max = get_or(sp, "k_max", s.spawn.k_max, "scenario.spawn");
    s.spawn.spread_std =
        get_or(sp, "spread_std", s.spawn.spread_std, "scenario.spawn");
  }
  if (j.contains("drift")) {
    const auto& dr = j.at("drift");
    reject_unknown(dr, {"w_wind", "w_rand", "dt", "wind_max", "rand_max"},
                   "scenario.drift");
    s.drift.w_wind = get_or(dr, "w_wind", s.drift.w_wind, "scenario.drift");
    s.drift.w_rand = get_or(dr, "w_rand", s.drift.w_rand, "scenario.drift");
    s.drift.dt = get_or(dr, "dt", s.drift.dt, "scenario.drift");
    s.drift.wind_max =
        get_or(dr, "wind_max", s.drift.wind_max, "scenario.drift");
    s.drift.rand_max =
        get_or(dr, "rand_max", s.drift.rand_max, "scenario.drift");
  }
  if (j.contains("idleness")) {
    const auto& idl = j.at("idleness");
    reject_unknown(idl, {"forgetting", "mode"}, "scenario.idleness");
    s.forgetting = get_or(idl, "forgetting", s.forgetting, "scenario.idleness");
    std::string mode =
        get_or<std::string>(idl, "mode", "observe", "scenario.idleness");
    auto m = idleness_mode_from_name(mode);
    if (!m)
      throw ConfigError(
          "scenario.idleness.mode: must be 'observe' or 'visit'");
    s.idleness_mode = *m;
  }
  if (j.contains("policies")) {
    const auto& pol = j.at("policies");
    reject_unknown(pol, {"scouts", "foragers"}, "scenario.policies");
    s.scout_policy =
        get_or<std::string>(pol, "scouts", s.scout_policy, "scenario.policies");
    s.forager_policy = get_or<std::string>(pol, "foragers", s.forager_policy,
                                           "scenario.policies");
  }
  if (j.contains("levy")) {
    const auto& lv = j.at("levy");
    reject_unknown(lv, {"alpha", "cap"}, "scenario.levy");
    s.levy.alpha = get_or(lv, "alpha", s.levy.alpha, "scenario.levy");
    s.levy.cap = get_or(lv, "cap", s.levy.cap, "scenario.levy");
  }
  if (j.contains("start")) {
    const auto& st = j.at("start");
    reject_unknown(st, {"mode", "cell"}, "scenario.start");
    std::string mode =
        get_or<std::string>(st, "mode", "uniform", "scenario.start");
    if (mode == "fixed") {
      if (!st.contains("cell"))
        throw ConfigError("scenario.start.cell: required for fixed mode");
      auto cell = st.at("cell");
      if (!cell.is_array() || cell.size() != 2)
        throw ConfigError("scenario.start.cell: expected [i, j]");
      s.start_cell = NodeId{cell.at(0).get<int>(), cell.at(1).get<int>()};
      if (!s.map->navigable(*s.start_cell))
        throw ConfigError("scenario.start.cell: not a navigable cell");
    } else if (mode != "uniform") {
      throw ConfigError("scenario.start.mode: must be 'uniform' or 'fixed'");
    }
  }
  s.output_dir = get_or<std::string>(j, "output_dir", s.output_dir, "scenario");

  // surfaces range errors (speeds, radii, spawn bounds) at load time
  s.episode_config().validate();
  return s;
}

}  // namespace forage
