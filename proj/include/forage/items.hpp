#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "forage/error.hpp"
#include "forage/grid_map.hpp"
#include "forage/rng.hpp"

namespace forage {

struct Item {
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  bool alive = true;
};

struct DriftParams {
  double w_wind = 1.0;    // wind weight
  double w_rand = 1.0;    // per-item noise weight
  double dt = 1.0;        // step duration
  double wind_max = 0.05; // per-component bound of the episode wind draw
  double rand_max = 0.05; // per-component bound of per-item per-step noise

  void validate() const {
    if (w_wind < 0 || w_rand < 0 || dt <= 0 || wind_max < 0 || rand_max < 0)
      throw ConfigError("drift parameters must be non-negative (dt positive)");
  }
};

struct SpawnParams {
  double k_mean = 100.0;
  double k_std = 15.0;
  int k_min = 10;
  int k_max = 200;
  double spread_std = 3.0;  // isotropic std around the hotspot, cell units

  void validate() const {
    if (k_min < 1) throw ConfigError("spawn.k_min must be >= 1");
    if (k_max < k_min) throw ConfigError("spawn.k_max must be >= k_min");
    if (k_std < 0) throw ConfigError("spawn.k_std must be >= 0");
    if (spread_std <= 0) throw ConfigError("spawn.spread_std must be > 0");
  }
};

struct ItemField {
  std::vector<Item> items;
  double wind_x = 0.0;  // fixed per episode
  double wind_y = 0.0;
  DriftParams drift;
  NodeId hotspot{};
  int initial_count = 0;

  int alive_count() const {
    int n = 0;
    for (const auto& it : items) n += it.alive ? 1 : 0;
    return n;
  }

  std::uint64_t spawn_digest() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& it : items) {
      h = fnv1a64(&it.id, sizeof(it.id), h);
      h = fnv1a64(&it.x, sizeof(it.x), h);
      h = fnv1a64(&it.y, sizeof(it.y), h);
    }
    return h;
  }
};

// Episode spawn. Draw order is fixed: item count, hotspot, wind, then item
// positions in id order; positions are rejection-sampled until they land in a
// navigable cell's area, which keeps the spatial law truly truncated-normal
// over the navigable region.
inline ItemField spawn_items(const GridMap& map, const SpawnParams& spawn,
                             const DriftParams& drift, Rng& spawn_rng,
                             Rng& wind_rng) {
  spawn.validate();
  drift.validate();
  ItemField field;
  field.drift = drift;

  long long k = std::llround(spawn_rng.normal(spawn.k_mean, spawn.k_std));
  if (k < spawn.k_min) k = spawn.k_min;
  if (k > spawn.k_max) k = spawn.k_max;
  field.initial_count = static_cast<int>(k);

  const auto& nodes = map.navigable_nodes();
  field.hotspot = nodes[spawn_rng.below(nodes.size())];
  auto [cx, cy] = map.cell_center(field.hotspot);

  field.wind_x = wind_rng.uniform(-drift.wind_max, drift.wind_max);
  field.wind_y = wind_rng.uniform(-drift.wind_max, drift.wind_max);

  const double spread = spawn.spread_std * map.cell_size();
  for (int id = 0; id < field.initial_count; ++id) {
    constexpr int kMaxDraws = 10000;
    int draws = 0;
    for (;;) {
      if (++draws > kMaxDraws)
        throw RuntimeError("spawn_items: rejection sampling failed after " +
                           std::to_string(kMaxDraws) + " draws for item " +
                           std::to_string(id));
      double x = spawn_rng.normal(cx, spread);
      double y = spawn_rng.normal(cy, spread);
      auto cell = map.node_of_point(x, y);
      if (cell && map.navigable(*cell)) {
        field.items.push_back({id, x, y, true});
        break;
      }
    }
  }
  return field;
}

// One drift step: every alive item gets dt*(w_wind*wind + w_rand*noise) with
// fresh per-item noise. A displacement that would land outside the navigable
// area is cancelled for that item this step, so items pile against walls.
inline void step_items(ItemField& field, const GridMap& map, Rng& drift_rng) {
  const DriftParams& p = field.drift;
  for (auto& it : field.items) {
    if (!it.alive) continue;
    double vrx = drift_rng.uniform(-p.rand_max, p.rand_max);
    double vry = drift_rng.uniform(-p.rand_max, p.rand_max);
    double nx = it.x + p.dt * (p.w_wind * field.wind_x + p.w_rand * vrx);
    double ny = it.y + p.dt * (p.w_wind * field.wind_y + p.w_rand * vry);
    auto cell = map.node_of_point(nx, ny);
    if (cell && map.navigable(*cell)) {
      it.x = nx;
      it.y = ny;
    }
  }
}

// Ground-truth count matrix: cell -> number of alive items inside its area.
inline std::vector<int> discretize(const ItemField& field, const GridMap& map) {
  std::vector<int> counts(map.cell_count(), 0);
  for (const auto& it : field.items) {
    if (!it.alive) continue;
    if (auto cell = map.node_of_point(it.x, it.y)) ++counts[map.index(*cell)];
  }
  return counts;
}

struct CollectResult {
  int count = 0;
  std::vector<int> ids;  // ascending
};

// Destructive collection: every alive item inside the node's area dies.
inline CollectResult collect_at(ItemField& field, const GridMap& map,
                                NodeId node) {
  if (!map.navigable(node))
    throw std::domain_error("collect_at: node not navigable");
  CollectResult r;
  for (auto& it : field.items) {
    if (!it.alive) continue;
    auto cell = map.node_of_point(it.x, it.y);
    if (cell && *cell == node) {
      it.alive = false;
      r.ids.push_back(it.id);
    }
  }
  r.count = static_cast<int>(r.ids.size());
  return r;
}

}  // namespace forage
