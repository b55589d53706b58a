#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "forage/agents.hpp"
#include "forage/error.hpp"
#include "forage/grid_map.hpp"
#include "forage/items.hpp"
#include "forage/policies.hpp"
#include "forage/rng.hpp"
#include "forage/trace.hpp"

namespace forage {

// Policy binding names understood by the engine:
//   "greedy" | "levy" | "random" | "replay:<trace-file>"
struct EpisodeConfig {
  std::shared_ptr<const GridMap> map;
  TeamConfig teams;
  SpawnParams spawn;
  DriftParams drift;
  int horizon = 150;
  std::uint64_t master_seed = 0;
  double forgetting = 0.95;
  IdlenessMode idleness_mode = IdlenessMode::Observe;
  std::string scout_policy = "greedy";
  std::string forager_policy = "greedy";
  // Present means "wrap the team's policies in the epsilon mixture", even at
  // epsilon 0 (which must reproduce the unwrapped run byte for byte).
  std::optional<double> eps_scouts;
  std::optional<double> eps_foragers;
  LevyParams levy;
  std::optional<NodeId> start_cell;  // fixed deployment; otherwise uniform
  std::string algorithm_label;       // report/plot tag
  int episode_index = 0;

  void validate() const {
    if (!map) throw ConfigError("episode config has no map");
    teams.validate();
    spawn.validate();
    drift.validate();
    levy.validate();
    if (horizon < 1) throw ConfigError("horizon must be >= 1");
    if (forgetting <= 0.0 || forgetting >= 1.0)
      throw ConfigError("idleness.forgetting must lie in (0,1)");
    for (auto eps : {eps_scouts, eps_foragers})
      if (eps && !(*eps >= 0.0 && *eps <= 1.0))
        throw ConfigError("corruption epsilon must lie in [0,1]");
    if (start_cell && !map->navigable(*start_cell))
      throw ConfigError("start.cell is not a navigable cell");
  }

  std::string label() const {
    if (!algorithm_label.empty()) return algorithm_label;
    if (scout_policy == forager_policy) return scout_policy;
    return scout_policy + "+" + forager_policy;
  }

  // Canonical, seed-free serialization used for the header digest.
  ordered_json canonical_json() const {
    ordered_json j;
    j["map_digest"] = hex64(map->digest());
    j["scouts"] = trace_io::team_spec_json(teams.scouts);
    j["foragers"] = trace_io::team_spec_json(teams.foragers);
    j["spawn"] = {{"k_mean", spawn.k_mean}, {"k_std", spawn.k_std},
                  {"k_min", spawn.k_min},   {"k_max", spawn.k_max},
                  {"spread_std", spawn.spread_std}};
    j["drift"] = {{"w_wind", drift.w_wind},     {"w_rand", drift.w_rand},
                  {"dt", drift.dt},             {"wind_max", drift.wind_max},
                  {"rand_max", drift.rand_max}};
    j["horizon"] = horizon;
    j["forgetting"] = forgetting;
    j["idleness_mode"] = std::string(idleness_mode_name(idleness_mode));
    j["policy_scouts"] = scout_policy;
    j["policy_foragers"] = forager_policy;
    j["eps_scouts"] = eps_scouts.value_or(0.0);
    j["eps_foragers"] = eps_foragers.value_or(0.0);
    j["levy"] = {{"alpha", levy.alpha}, {"cap", levy.cap}};
    if (start_cell)
      j["start"] = trace_io::node_json(*start_cell);
    else
      j["start"] = "uniform";
    return j;
  }

  std::string digest() const { return hex64(fnv1a64(canonical_json().dump())); }
};

// Re-emits the actions a recorded agent took, step by step. Divergence from
// the recorded positions (different map, seed or co-actors) raises an error
// at the first step where the recording no longer matches reality.
class ReplayPolicy final : public Policy {
 public:
  ReplayPolicy(const EpisodeTrace& trace, int agent_id) : agent_id_(agent_id) {
    for (const auto& m : trace.moves)
      if (m.agent == agent_id) recorded_[m.t] = m;
    if (recorded_.empty())
      throw ConfigError("replay: trace has no moves for agent " +
                        std::to_string(agent_id));
    for (int t = 0; t <= trace.footer.t_end; ++t)
      if (!recorded_.count(t))
        throw ConfigError("replay: trace is missing agent " +
                          std::to_string(agent_id) + " at step " +
                          std::to_string(t));
  }

  Action act(const Observation& obs) override {
    auto it = recorded_.find(obs.t);
    if (it == recorded_.end())
      throw RuntimeError("replay diverged at step " + std::to_string(obs.t) +
                         ": no recorded move for agent " +
                         std::to_string(agent_id_));
    const MoveEvent& e = it->second;
    if (!(e.from == obs.self.position))
      throw RuntimeError(
          "replay diverged at step " + std::to_string(obs.t) + ": agent " +
          std::to_string(agent_id_) + " is at (" +
          std::to_string(obs.self.position.i) + "," +
          std::to_string(obs.self.position.j) + "), recording expects (" +
          std::to_string(e.from.i) + "," + std::to_string(e.from.j) + ")");
    return e.action;
  }

 private:
  int agent_id_;
  std::map<int, MoveEvent> recorded_;
};

inline PolicyPtr replay_policy(const EpisodeTrace& trace, int agent_id) {
  return std::make_unique<ReplayPolicy>(trace, agent_id);
}

namespace detail {

inline PolicyPtr make_base_policy(const std::string& name, Team team,
                                  std::uint64_t seed, const LevyParams& levy,
                                  int agent_id) {
  if (name == "greedy") {
    if (team == Team::Scout) return std::make_unique<GreedyScoutPolicy>();
    return std::make_unique<GreedyForagerPolicy>();
  }
  if (name == "levy") {
    if (team == Team::Scout)
      return std::make_unique<LevyWalkPolicy>(seed, levy);
    return std::make_unique<LevyForagerPolicy>(seed, levy);
  }
  if (name == "random") return std::make_unique<UniformRandomPolicy>(seed);
  constexpr std::string_view kReplay = "replay:";
  if (name.rfind(kReplay, 0) == 0) {
    EpisodeTrace source = EpisodeTrace::load(name.substr(kReplay.size()));
    return replay_policy(source, agent_id);
  }
  throw ConfigError("unknown policy '" + name + "'");
}

inline std::vector<int> sorted_union(const std::vector<std::vector<int>>& sets) {
  std::vector<int> out;
  for (const auto& s : sets) out.insert(out.end(), s.begin(), s.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline std::string cells_digest(const std::vector<int>& cells) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (int c : cells) h = fnv1a64(&c, sizeof(c), h);
  return hex64(h);
}

inline std::vector<SparseCount> sparse_counts(const std::vector<int>& dense) {
  std::vector<SparseCount> out;
  for (int idx = 0; idx < static_cast<int>(dense.size()); ++idx)
    if (dense[idx] > 0) out.push_back({idx, dense[idx]});
  return out;
}

}  // namespace detail

// All agents deploy on a single cell: the configured one, or a uniform draw
// over navigable cells.
inline std::vector<NodeId> agent_start_positions(const EpisodeConfig& cfg,
                                                 const GridMap& map, Rng& rng) {
  NodeId cell;
  if (cfg.start_cell) {
    cell = *cfg.start_cell;
  } else {
    const auto& nodes = map.navigable_nodes();
    cell = nodes[rng.below(nodes.size())];
  }
  return std::vector<NodeId>(cfg.teams.total_agents(), cell);
}

// Runs one episode with the fixed phase order: observe -> decide -> move ->
// collect -> drift -> discover -> model update -> log. Identical config and
// seed give byte-identical traces.
inline EpisodeTrace run_episode(const EpisodeConfig& cfg) {
  cfg.validate();
  const GridMap& map = *cfg.map;

  Rng spawn_rng(derive_seed(cfg.master_seed, "spawn"));
  Rng wind_rng(derive_seed(cfg.master_seed, "wind"));
  Rng drift_rng(derive_seed(cfg.master_seed, "drift"));
  Rng start_rng(derive_seed(cfg.master_seed, "start"));

  ItemField field = spawn_items(map, cfg.spawn, cfg.drift, spawn_rng, wind_rng);
  std::vector<NodeId> starts = agent_start_positions(cfg, map, start_rng);

  const int n_scouts = cfg.teams.scouts.count;
  const int n_agents = cfg.teams.total_agents();
  std::vector<AgentState> agents;
  agents.reserve(n_agents);
  for (int id = 0; id < n_agents; ++id)
    agents.push_back(
        {id, id < n_scouts ? Team::Scout : Team::Forager, starts[id]});

  std::vector<PolicyPtr> policies;
  policies.reserve(n_agents);
  for (const auto& a : agents) {
    const std::string& name =
        a.team == Team::Scout ? cfg.scout_policy : cfg.forager_policy;
    PolicyPtr p = detail::make_base_policy(
        name, a.team, derive_seed(cfg.master_seed, "policy", a.id), cfg.levy,
        a.id);
    const auto& eps =
        a.team == Team::Scout ? cfg.eps_scouts : cfg.eps_foragers;
    if (eps)
      p = std::make_unique<CorruptPolicy>(
          std::move(p), *eps, derive_seed(cfg.master_seed, "corruption", a.id));
    policies.push_back(std::move(p));
  }

  SharedModel model(map, cfg.forgetting);

  EpisodeTrace tr;
  TraceHeader& h = tr.header;
  h.seed = cfg.master_seed;
  h.episode = cfg.episode_index;
  h.algorithm = cfg.label();
  h.config_digest = cfg.digest();
  h.map_digest = hex64(map.digest());
  h.cell_size = map.cell_size();
  h.map_rows = map.rows();
  h.item_count = field.initial_count;
  h.wind_x = field.wind_x;
  h.wind_y = field.wind_y;
  h.hotspot = field.hotspot;
  h.spawn_digest = hex64(field.spawn_digest());
  h.scouts = cfg.teams.scouts;
  h.foragers = cfg.teams.foragers;
  h.horizon = cfg.horizon;
  h.forgetting = cfg.forgetting;
  h.idleness_mode = cfg.idleness_mode;
  h.policy_scouts = cfg.scout_policy;
  h.policy_foragers = cfg.forager_policy;
  h.eps_scouts = cfg.eps_scouts.value_or(0.0);
  h.eps_foragers = cfg.eps_foragers.value_or(0.0);
  h.start = starts.empty() ? NodeId{} : starts.front();

  std::vector<bool> discovered(field.items.size(), false);
  int discovered_cum = 0;
  int collected_cum = 0;
  int t_end = cfg.horizon - 1;
  std::string reason = "horizon";

  for (int t = 0; t < cfg.horizon; ++t) {
    // decide on a frozen snapshot, then move
    std::vector<Action> actions(n_agents, Action::Stay);
    for (int id = 0; id < n_agents; ++id) {
      Observation obs{agents[id], std::span<const AgentState>(agents),
                      model,      map,
                      t,          cfg.horizon,
                      cfg.teams};
      actions[id] = policies[id]->act(obs);
    }
    for (int id = 0; id < n_agents; ++id) {
      const int speed = cfg.teams.for_team(agents[id].team).speed;
      MoveResult mv = apply_move(map, agents[id].position, actions[id], speed);
      tr.moves.push_back({t, id, agents[id].team, agents[id].position, mv.via,
                          mv.final_pos, actions[id]});
      agents[id].position = mv.final_pos;
    }

    // foragers collect on arrival; co-located ties go to the lower id
    for (int id = n_scouts; id < n_agents; ++id) {
      CollectResult res = collect_at(field, map, agents[id].position);
      for (int item : res.ids)
        tr.collects.push_back({t, item, agents[id].position, id});
      collected_cum += res.count;
    }

    step_items(field, map, drift_rng);

    std::vector<std::vector<int>> fovs(n_agents);
    for (int id = 0; id < n_agents; ++id)
      fovs[id] = field_of_view(
          map, agents[id].position,
          cfg.teams.for_team(agents[id].team).sensing_radius);

    // first FOV (canonical agent order) to contain an alive, undiscovered
    // item's cell claims the discovery
    for (int id = 0; id < n_agents; ++id) {
      for (const auto& item : field.items) {
        if (!item.alive || discovered[item.id]) continue;
        auto cell = map.node_of_point(item.x, item.y);
        if (!cell) continue;
        int idx = map.index(*cell);
        if (std::binary_search(fovs[id].begin(), fovs[id].end(), idx)) {
          discovered[item.id] = true;
          ++discovered_cum;
          tr.discovers.push_back({t, item.id, *cell, id, agents[id].team});
        }
      }
    }

    std::vector<int> truth = discretize(field, map);
    std::vector<int> visible = detail::sorted_union(fovs);
    std::vector<int> occupied;
    occupied.reserve(n_agents);
    for (const auto& a : agents) occupied.push_back(map.index(a.position));
    std::sort(occupied.begin(), occupied.end());
    occupied.erase(std::unique(occupied.begin(), occupied.end()),
                   occupied.end());
    const std::vector<int>& reset =
        cfg.idleness_mode == IdlenessMode::Observe ? visible : occupied;
    model.update(map, truth, visible, reset, t);

    StepSummary s;
    s.t = t;
    s.alive = field.alive_count();
    s.discovered = discovered_cum;
    s.collected = collected_cum;
    s.mi = model.mean_idleness(map);
    s.visible_digest = detail::cells_digest(visible);
    s.fov = fovs;
    s.truth = detail::sparse_counts(truth);
    std::vector<int> est(map.cell_count());
    for (int idx = 0; idx < map.cell_count(); ++idx)
      est[idx] = model.estimate_at(idx);
    s.model = detail::sparse_counts(est);
    tr.summaries.push_back(std::move(s));

    if (field.alive_count() == 0) {
      t_end = t;
      reason = "cleared";
      break;
    }
  }

  tr.footer = {t_end, reason, discovered_cum, collected_cum};
  return tr;
}

}  // namespace forage
