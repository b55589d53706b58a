#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "forage/agents.hpp"

using namespace forage;

namespace {

GridMap open_grid(int h, int w) {
  return GridMap(h, w, std::vector<std::uint8_t>(h * w, 1));
}

// Independent offset-scan oracle over a square window much larger than rho.
std::vector<int> fov_oracle(const GridMap& map, NodeId pos, double rho) {
  if (rho <= 0) return {map.index(pos)};
  std::vector<int> out;
  for (int i = 0; i < map.height(); ++i)
    for (int j = 0; j < map.width(); ++j) {
      double di = i - pos.i, dj = j - pos.j;
      if (std::sqrt(di * di + dj * dj) < rho && map.navigable({i, j}))
        out.push_back(map.index({i, j}));
    }
  return out;
}

}  // namespace

TEST_CASE("field_of_view") {
  GridMap map = open_grid(11, 11);

  SECTION("rho 0 is exactly the own cell") {
    CHECK(field_of_view(map, {5, 5}, 0.0) ==
          std::vector<int>{map.index({5, 5})});
  }

  SECTION("rho 1.5 is the Moore neighborhood") {
    auto fov = field_of_view(map, {5, 5}, 1.5);
    CHECK(fov.size() == 9);
    for (int di = -1; di <= 1; ++di)
      for (int dj = -1; dj <= 1; ++dj)
        CHECK(std::binary_search(fov.begin(), fov.end(),
                                 map.index({5 + di, 5 + dj})));
  }

  SECTION("rho 4 covers 45 cells on an open grid, per the offset oracle") {
    auto fov = field_of_view(map, {5, 5}, 4.0);
    CHECK(fov.size() == 45);
    CHECK(fov == fov_oracle(map, {5, 5}, 4.0));
  }

  SECTION("integer radius uses strict inequality") {
    auto fov = field_of_view(map, {5, 5}, 1.0);
    CHECK(fov.size() == 1);  // distance-1 cells excluded by '<'
  }

  SECTION("obstacles and borders shrink the view") {
    GridMap walled = GridMap::from_text(
        ".....\n"
        "..#..\n"
        ".....\n");
    auto fov = field_of_view(walled, {1, 1}, 1.5);
    CHECK(fov == fov_oracle(walled, {1, 1}, 1.5));
    CHECK_FALSE(std::binary_search(fov.begin(), fov.end(), walled.index({1, 2})));
  }

  SECTION("result is sorted") {
    auto fov = field_of_view(map, {2, 8}, 4.0);
    CHECK(std::is_sorted(fov.begin(), fov.end()));
  }
}

TEST_CASE("apply_move") {
  GridMap map = open_grid(5, 5);

  SECTION("stay") {
    auto r = apply_move(map, {2, 2}, Action::Stay, 2);
    CHECK(r.final_pos == NodeId{2, 2});
    CHECK(r.edges == 0);
    CHECK_FALSE(r.via.has_value());
  }

  SECTION("scout double move east") {
    auto r = apply_move(map, {0, 0}, Action::E, 2);
    CHECK(r.final_pos == NodeId{0, 2});
    CHECK(r.edges == 2);
    REQUIRE(r.via.has_value());
    CHECK(*r.via == NodeId{0, 1});
  }

  SECTION("early stop one cell from the wall") {
    auto r = apply_move(map, {0, 3}, Action::E, 2);
    CHECK(r.final_pos == NodeId{0, 4});
    CHECK(r.edges == 1);
    CHECK_FALSE(r.via.has_value());
  }

  SECTION("fully blocked move keeps the position") {
    auto r = apply_move(map, {0, 4}, Action::E, 2);
    CHECK(r.final_pos == NodeId{0, 4});
    CHECK(r.edges == 0);
  }

  SECTION("diagonal obstacle stops a forager") {
    GridMap walled = GridMap::from_text("..\n.#\n");
    auto r = apply_move(walled, {0, 0}, Action::SE, 1);
    CHECK(r.final_pos == NodeId{0, 0});
    CHECK(r.edges == 0);
  }

  SECTION("position stays navigable for every action and speed") {
    GridMap walled = GridMap::from_text(
        "..#..\n"
        ".#...\n"
        ".....\n"
        "..#.#\n");
    for (NodeId n : walled.navigable_nodes())
      for (int a = 0; a < kNumActions; ++a)
        for (int speed : {1, 2}) {
          auto r = apply_move(walled, n, static_cast<Action>(a), speed);
          CHECK(walled.navigable(r.final_pos));
        }
  }
}

TEST_CASE("shared model") {
  GridMap map = open_grid(4, 4);

  SECTION("full observability copies the truth exactly") {
    SharedModel m(map, 0.95);
    std::vector<int> truth(map.cell_count(), 0);
    truth[map.index({1, 2})] = 5;
    truth[map.index({3, 3})] = 2;
    std::vector<int> all;
    for (NodeId n : map.navigable_nodes()) all.push_back(map.index(n));
    m.update(map, truth, all, all, 0);
    for (int idx = 0; idx < map.cell_count(); ++idx) {
      CHECK(m.estimate_at(idx) == truth[idx]);
      CHECK(m.last_seen_at(idx) == 0);
      CHECK(m.age_at(idx) == 0);
    }
    CHECK(m.mean_idleness(map) == 0.0);
  }

  SECTION("empty visibility ages everything and changes nothing else") {
    SharedModel m(map, 0.95);
    std::vector<int> truth(map.cell_count(), 1);
    m.update(map, truth, {}, {}, 0);
    for (int idx = 0; idx < map.cell_count(); ++idx) {
      CHECK(m.estimate_at(idx) == 0);
      CHECK(m.last_seen_at(idx) == -1);
      CHECK(m.age_at(idx) == 1);
    }
    CHECK(m.mean_idleness(map) == Catch::Approx(1.0 - 0.95));
  }

  SECTION("stale estimates persist after items leave unobserved") {
    SharedModel m(map, 0.95);
    std::vector<int> truth(map.cell_count(), 0);
    int cell = map.index({2, 2});
    truth[cell] = 3;
    m.update(map, truth, {cell}, {cell}, 0);
    CHECK(m.estimate_at(cell) == 3);

    truth[cell] = 0;  // item drifted away, nobody looking
    m.update(map, truth, {}, {}, 1);
    CHECK(m.estimate_at(cell) == 3);
    CHECK(m.age_at(cell) == 1);
  }

  SECTION("last_seen is non-decreasing per cell") {
    SharedModel m(map, 0.9);
    std::vector<int> truth(map.cell_count(), 0);
    std::vector<int> prev(map.cell_count(), -1);
    Rng rng(3);
    for (int t = 0; t < 30; ++t) {
      std::vector<int> vis;
      for (int idx = 0; idx < map.cell_count(); ++idx)
        if (rng.uniform() < 0.3) vis.push_back(idx);
      m.update(map, truth, vis, vis, t);
      for (int idx = 0; idx < map.cell_count(); ++idx) {
        CHECK(m.last_seen_at(idx) >= prev[idx]);
        prev[idx] = m.last_seen_at(idx);
      }
    }
  }

  SECTION("visit mode keeps ages growing for merely observed cells") {
    SharedModel m(map, 0.95);
    std::vector<int> truth(map.cell_count(), 0);
    int seen = map.index({0, 1});
    int occupied = map.index({0, 0});
    m.update(map, truth, {occupied, seen}, {occupied}, 0);
    CHECK(m.age_at(occupied) == 0);
    CHECK(m.age_at(seen) == 1);
    CHECK(m.last_seen_at(seen) == 0);
  }

  SECTION("idleness law") {
    CHECK(idleness_value(0.95, 0) == 0.0);
    CHECK(idleness_value(0.95, 10) == Catch::Approx(0.4013).margin(5e-5));
    CHECK(idleness_value(0.95, 100000) == Catch::Approx(1.0).margin(1e-9));
    SharedModel m(map, 0.5);
    CHECK_THROWS_AS(SharedModel(map, 1.0), ConfigError);
    CHECK_THROWS_AS(SharedModel(map, 0.0), ConfigError);
  }

  SECTION("non-navigable cells stay untouched and excluded from MI") {
    GridMap walled = GridMap::from_text("..\n.#\n");
    SharedModel m(walled, 0.95);
    std::vector<int> truth(walled.cell_count(), 0);
    m.update(walled, truth, {}, {}, 0);
    CHECK(m.age_at(walled.index({1, 1})) == 0);
    CHECK(m.mean_idleness(walled) == Catch::Approx(1.0 - 0.95));
  }
}
