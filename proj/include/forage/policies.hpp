#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "forage/agents.hpp"
#include "forage/error.hpp"
#include "forage/grid_map.hpp"
#include "forage/rng.hpp"

namespace forage {

// What a policy is allowed to see: the shared belief, never the ground truth.
struct Observation {
  const AgentState& self;
  std::span<const AgentState> agents;  // every agent, including self
  const SharedModel& model;
  const GridMap& map;
  int t = 0;
  int horizon = 0;
  const TeamConfig& teams;
};

class Policy {
 public:
  virtual ~Policy() = default;
  virtual Action act(const Observation& obs) = 0;
};

using PolicyPtr = std::unique_ptr<Policy>;

namespace detail {

// Position of the agent within its own team (by ascending id).
inline int team_index(const Observation& obs) {
  int k = 0;
  for (const auto& a : obs.agents)
    if (a.team == obs.self.team && a.id < obs.self.id) ++k;
  return k;
}

// Tie-break among equally scored actions: canonical order for the first
// agent of a team, rotated by team index for the others. Identical
// deterministic policies launched from a shared cell would otherwise move in
// lockstep forever and never spread out.
inline Action pick_tied(const std::vector<Action>& tied, int team_idx) {
  return tied[static_cast<std::size_t>(team_idx) % tied.size()];
}

// Union of every agent's current field of view, as a cell-index mask.
inline std::vector<std::uint8_t> currently_visible_mask(const Observation& obs) {
  std::vector<std::uint8_t> mask(obs.map.cell_count(), 0);
  for (const auto& a : obs.agents) {
    double rho = obs.teams.for_team(a.team).sensing_radius;
    for (int idx : field_of_view(obs.map, a.position, rho)) mask[idx] = 1;
  }
  return mask;
}

// Direction of the first edge toward the nearest cell with a positive
// estimate, or nullopt when nothing is known or nothing is reachable.
// Nearest means smallest Dijkstra cost; equidistant targets are resolved by
// the canonical order of their paths' first steps (rotated by team index).
inline std::optional<Action> route_to_nearest_estimate(const Observation& obs,
                                                       int team_idx) {
  const GridMap& map = obs.map;
  std::vector<int> targets;
  for (NodeId n : map.navigable_nodes())
    if (obs.model.estimate(n) > 0) targets.push_back(map.index(n));
  if (targets.empty()) return std::nullopt;

  auto field = map.dijkstra(obs.self.position);
  constexpr double kTieTol = 1e-9;
  double best = std::numeric_limits<double>::infinity();
  for (int idx : targets)
    if (field.dist[idx] < best) best = field.dist[idx];
  if (!std::isfinite(best)) return std::nullopt;
  if (best == 0.0) return Action::Stay;  // standing on a known item cell

  std::vector<Action> first_steps;
  for (int k = 0; k < kNumDirs; ++k) {
    for (int idx : targets) {
      if (field.dist[idx] > best + kTieTol) continue;
      if (GridMap::first_step_dir(field, map, map.node_at(idx)) == k) {
        first_steps.push_back(static_cast<Action>(k));
        break;
      }
    }
  }
  return pick_tied(first_steps, team_idx);
}

}  // namespace detail

// Forager that maximizes the estimated count at its destination cell; when
// every adjacent estimate is zero it routes toward the nearest known item,
// and stays put when nothing at all is known.
class GreedyForagerPolicy final : public Policy {
 public:
  Action act(const Observation& obs) override {
    const int speed = obs.teams.for_team(obs.self.team).speed;
    const int team_idx = detail::team_index(obs);
    int best = 0;
    std::vector<Action> tied;
    for (int a = 0; a < kNumActions; ++a) {
      auto action = static_cast<Action>(a);
      NodeId dest = apply_move(obs.map, obs.self.position, action, speed).final_pos;
      int score = obs.model.estimate(dest);
      if (score > best) {
        best = score;
        tied.clear();
      }
      if (score == best) tied.push_back(action);
    }
    if (best > 0) return detail::pick_tied(tied, team_idx);
    if (auto route = detail::route_to_nearest_estimate(obs, team_idx))
      return *route;
    return Action::Stay;
  }
};

// Scout that maximizes the idleness + estimated count mass of cells that
// would newly enter its field of view, i.e. cells no agent currently sees.
class GreedyScoutPolicy final : public Policy {
 public:
  Action act(const Observation& obs) override {
    const TeamSpec& spec = obs.teams.for_team(obs.self.team);
    const int team_idx = detail::team_index(obs);
    auto visible = detail::currently_visible_mask(obs);
    double best = 0.0;
    std::vector<Action> tied;
    for (int a = 0; a < kNumActions; ++a) {
      auto action = static_cast<Action>(a);
      NodeId dest =
          apply_move(obs.map, obs.self.position, action, spec.speed).final_pos;
      double score = 0.0;
      for (int idx : field_of_view(obs.map, dest, spec.sensing_radius))
        if (!visible[idx])
          score += obs.model.idleness_at(idx) + obs.model.estimate_at(idx);
      if (score > best) {
        best = score;
        tied.clear();
      }
      if (score == best) tied.push_back(action);
    }
    if (best <= 0.0) return Action::Stay;
    return detail::pick_tied(tied, team_idx);
  }
};

struct LevyParams {
  double alpha = 1.5;   // Pareto shape
  double cap = 20.0;    // step-length cap, cells
  int max_redraws = 16; // blocked-heading redraw budget per decision

  void validate() const {
    if (alpha <= 0) throw ConfigError("levy.alpha must be > 0");
    if (cap < 1) throw ConfigError("levy.cap must be >= 1");
  }
};

// Truncated Pareto step length: scale 1, shape alpha, capped.
inline double levy_step_length(Rng& rng, const LevyParams& p) {
  double u = rng.uniform();  // [0,1)
  double len = std::pow(1.0 - u, -1.0 / p.alpha);
  return std::min(len, p.cap);
}

// Stochastic exploration: straight runs of Pareto-distributed length in a
// uniformly drawn direction. A blocked heading forces a redraw of both the
// heading and the remaining run; an agent boxed in on all sides stays put.
class LevyWalkPolicy final : public Policy {
 public:
  LevyWalkPolicy(std::uint64_t seed, LevyParams params = {})
      : rng_(seed), params_(params) {
    params_.validate();
  }

  Action act(const Observation& obs) override {
    const int speed = obs.teams.for_team(obs.self.team).speed;
    if (steps_remaining_ == 0) draw_run();
    int redraws = 0;
    while (blocked(obs, speed) && redraws < params_.max_redraws) {
      draw_run();
      ++redraws;
    }
    if (blocked(obs, speed)) {
      steps_remaining_ = 0;
      return Action::Stay;
    }
    --steps_remaining_;
    return static_cast<Action>(heading_);
  }

  // Exposed so a forager can share the walk while overriding exploitation.
  void interrupt_run() { steps_remaining_ = 0; }

 private:
  void draw_run() {
    double len = levy_step_length(rng_, params_);
    heading_ = static_cast<int>(rng_.below(kNumDirs));
    steps_remaining_ = static_cast<int>(std::ceil(len));
  }

  bool blocked(const Observation& obs, int speed) const {
    return apply_move(obs.map, obs.self.position,
                      static_cast<Action>(heading_), speed)
               .edges == 0;
  }

  Rng rng_;
  LevyParams params_;
  int heading_ = 0;
  int steps_remaining_ = 0;
};

// Forager for the Levy baseline: shortest-path servicing of the nearest
// known item, falling back to the scouts' exploratory walk when the shared
// model is empty.
class LevyForagerPolicy final : public Policy {
 public:
  LevyForagerPolicy(std::uint64_t seed, LevyParams params = {})
      : walk_(seed, params) {}

  Action act(const Observation& obs) override {
    if (obs.model.any_estimate_positive()) {
      if (auto route =
              detail::route_to_nearest_estimate(obs, detail::team_index(obs))) {
        walk_.interrupt_run();
        return *route;
      }
    }
    return walk_.act(obs);
  }

 private:
  LevyWalkPolicy walk_;
};

// Uniform over the 9-action set. Draw pattern matches CorruptPolicy at
// epsilon = 1 so the two emit identical sequences from identical seeds.
class UniformRandomPolicy final : public Policy {
 public:
  explicit UniformRandomPolicy(std::uint64_t seed) : rng_(seed) {}

  Action act(const Observation&) override {
    (void)rng_.uniform();
    return static_cast<Action>(rng_.below(kNumActions));
  }

 private:
  Rng rng_;
};

// Epsilon-mixture of a policy with the uniform policy. Both the gate draw
// and the replacement action are consumed every step, so raising epsilon
// flips a superset of the same decision points instead of reshuffling them.
class CorruptPolicy final : public Policy {
 public:
  CorruptPolicy(PolicyPtr inner, double epsilon, std::uint64_t seed)
      : inner_(std::move(inner)), epsilon_(epsilon), rng_(seed) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
      throw std::domain_error("corruption epsilon must lie in [0,1]");
  }

  Action act(const Observation& obs) override {
    double u = rng_.uniform();
    auto random_action = static_cast<Action>(rng_.below(kNumActions));
    if (u < epsilon_) return random_action;
    return inner_->act(obs);
  }

 private:
  PolicyPtr inner_;
  double epsilon_;
  Rng rng_;
};

}  // namespace forage
