#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forage/error.hpp"
#include "forage/grid_map.hpp"

namespace forage {

enum class Team : int { Scout = 0, Forager = 1 };  // canonical team order

inline std::string_view team_name(Team t) {
  return t == Team::Scout ? "scout" : "forager";
}

struct AgentState {
  int id = 0;
  Team team = Team::Scout;
  NodeId position{};
};

struct TeamSpec {
  int count = 2;
  int speed = 1;             // edges per step
  double sensing_radius = 0; // cells; 0 means own cell only

  void validate(std::string_view label) const {
    if (count < 0) throw ConfigError(std::string(label) + ".count must be >= 0");
    if (speed != 1 && speed != 2)
      throw ConfigError(std::string(label) + ".speed must be 1 or 2");
    if (sensing_radius < 0)
      throw ConfigError(std::string(label) + ".sensing_radius must be >= 0");
  }
};

struct TeamConfig {
  TeamSpec scouts{2, 2, 4.0};
  TeamSpec foragers{2, 1, 0.0};

  const TeamSpec& for_team(Team t) const {
    return t == Team::Scout ? scouts : foragers;
  }
  int total_agents() const { return scouts.count + foragers.count; }
  void validate() const {
    scouts.validate("teams.scouts");
    foragers.validate("teams.foragers");
  }
};

// The uniform 9-element action set shared by both teams. Directions come
// first in canonical order; STAY is last. Infeasible directions are never
// masked, they just degrade through apply_move's early stop.
enum class Action : int { N = 0, NE, E, SE, S, SW, W, NW, Stay };
inline constexpr int kNumActions = 9;

inline std::string_view action_name(Action a) {
  if (a == Action::Stay) return "STAY";
  return kDirName[static_cast<int>(a)];
}

inline std::optional<Action> action_from_name(std::string_view s) {
  if (s == "STAY") return Action::Stay;
  for (int k = 0; k < kNumDirs; ++k)
    if (kDirName[k] == s) return static_cast<Action>(k);
  return std::nullopt;
}

struct MoveResult {
  NodeId final_pos{};
  std::optional<NodeId> via;  // intermediate cell when two edges are taken
  int edges = 0;
};

// Applies a directional action as `speed` successive single-edge traversals
// in the same direction, stopping at the last valid cell when a traversal
// would leave the navigable area. Blocked moves degrade, they never fail.
inline MoveResult apply_move(const GridMap& map, NodeId from, Action action,
                             int speed) {
  if (!map.navigable(from))
    throw std::domain_error("apply_move: position not navigable");
  if (action == Action::Stay) return {from, std::nullopt, 0};
  const auto [di, dj] = kDirOffset[static_cast<int>(action)];
  NodeId pos = from;
  std::optional<NodeId> via;
  int edges = 0;
  for (int s = 0; s < speed; ++s) {
    NodeId next{pos.i + di, pos.j + dj};
    if (!map.navigable(next)) break;
    if (s == 0 && speed > 1) via = next;
    pos = next;
    ++edges;
  }
  if (edges < 2) via.reset();
  return {pos, via, edges};
}

// Navigable cells whose center lies strictly within `rho` (Euclidean, cell
// units) of the position's center. rho = 0 is the single-node special case.
// Returned as sorted cell indices.
inline std::vector<int> field_of_view(const GridMap& map, NodeId position,
                                      double rho) {
  if (!map.navigable(position))
    throw std::domain_error("field_of_view: position not navigable");
  if (rho <= 0.0) return {map.index(position)};
  std::vector<int> out;
  const int r = static_cast<int>(std::ceil(rho));
  const double rho2 = rho * rho;
  for (int di = -r; di <= r; ++di) {
    for (int dj = -r; dj <= r; ++dj) {
      if (di * di + dj * dj >= rho2) continue;
      NodeId n{position.i + di, position.j + dj};
      if (map.navigable(n)) out.push_back(map.index(n));
    }
  }
  return out;
}

enum class IdlenessMode : int { Observe = 0, Visit = 1 };

inline std::string_view idleness_mode_name(IdlenessMode m) {
  return m == IdlenessMode::Observe ? "observe" : "visit";
}

inline std::optional<IdlenessMode> idleness_mode_from_name(std::string_view s) {
  if (s == "observe") return IdlenessMode::Observe;
  if (s == "visit") return IdlenessMode::Visit;
  return std::nullopt;
}

// Idleness value for a cell whose last reset was `age` steps ago.
// Monotone in age, bounded in [0,1), zero right after a reset.
inline double idleness_value(double forgetting, int age) {
  return 1.0 - std::pow(forgetting, static_cast<double>(age));
}

// The team-wide belief: estimated counts, last-observation steps and per-cell
// idleness ages. Cells sync to ground truth whenever any agent sees them;
// unseen cells keep whatever stale value they had.
class SharedModel {
 public:
  SharedModel(const GridMap& map, double forgetting)
      : w_(map.width()),
        forgetting_(forgetting),
        estimate_(map.cell_count(), 0),
        last_seen_(map.cell_count(), -1),
        age_(map.cell_count(), 0) {
    if (forgetting <= 0.0 || forgetting >= 1.0)
      throw ConfigError("idleness forgetting factor must lie in (0,1)");
  }

  int estimate_at(int idx) const { return estimate_[idx]; }
  int estimate(NodeId n) const { return estimate_[n.i * w_ + n.j]; }
  int last_seen_at(int idx) const { return last_seen_[idx]; }
  int age_at(int idx) const { return age_[idx]; }
  double forgetting() const { return forgetting_; }
  double idleness_at(int idx) const {
    return idleness_value(forgetting_, age_[idx]);
  }

  bool any_estimate_positive() const {
    for (int v : estimate_)
      if (v > 0) return true;
    return false;
  }

  // `visible` and `reset` are sorted cell-index sets. Visible cells sync to
  // truth; reset cells zero their idleness age (under "observe" reset ==
  // visible, under "visit" reset == physically occupied cells); every other
  // navigable cell ages by one.
  void update(const GridMap& map, const std::vector<int>& truth,
              const std::vector<int>& visible, const std::vector<int>& reset,
              int t) {
    for (int idx : visible) {
      estimate_[idx] = truth[idx];
      last_seen_[idx] = t;
    }
    std::size_t r = 0;
    for (NodeId n : map.navigable_nodes()) {
      int idx = map.index(n);
      while (r < reset.size() && reset[r] < idx) ++r;
      if (r < reset.size() && reset[r] == idx)
        age_[idx] = 0;
      else
        ++age_[idx];
    }
  }

  double mean_idleness(const GridMap& map) const {
    double sum = 0.0;
    for (NodeId n : map.navigable_nodes())
      sum += idleness_value(forgetting_, age_[map.index(n)]);
    return sum / map.navigable_count();
  }

 private:
  int w_;
  double forgetting_;
  std::vector<int> estimate_;
  std::vector<int> last_seen_;
  std::vector<int> age_;
};

}  // namespace forage
