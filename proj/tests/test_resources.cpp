#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "forage/items.hpp"

using namespace forage;

namespace {

GridMap open_grid(int h, int w) {
  return GridMap(h, w, std::vector<std::uint8_t>(h * w, 1));
}

ItemField spawn_with_seed(const GridMap& map, const SpawnParams& sp,
                          const DriftParams& dp, std::uint64_t seed) {
  Rng spawn_rng(derive_seed(seed, "spawn"));
  Rng wind_rng(derive_seed(seed, "wind"));
  return spawn_items(map, sp, dp, spawn_rng, wind_rng);
}

}  // namespace

TEST_CASE("spawn_items") {
  GridMap map = open_grid(20, 20);

  SECTION("degenerate spawn lands a single item at the hotspot center") {
    SpawnParams sp;
    sp.k_mean = 0.0;
    sp.k_std = 0.0;
    sp.k_min = 1;
    sp.k_max = 1;
    sp.spread_std = 1e-12;
    ItemField f = spawn_with_seed(map, sp, DriftParams{}, 42);
    REQUIRE(f.items.size() == 1);
    auto [cx, cy] = map.cell_center(f.hotspot);
    CHECK(f.items[0].x == Catch::Approx(cx).margin(1e-9));
    CHECK(f.items[0].y == Catch::Approx(cy).margin(1e-9));
  }

  SECTION("identical seeds reproduce the field exactly") {
    SpawnParams sp;
    ItemField a = spawn_with_seed(map, sp, DriftParams{}, 1234);
    ItemField b = spawn_with_seed(map, sp, DriftParams{}, 1234);
    REQUIRE(a.items.size() == b.items.size());
    CHECK(a.wind_x == b.wind_x);
    CHECK(a.wind_y == b.wind_y);
    CHECK(a.hotspot == b.hotspot);
    for (std::size_t k = 0; k < a.items.size(); ++k) {
      CHECK(a.items[k].x == b.items[k].x);
      CHECK(a.items[k].y == b.items[k].y);
    }
    CHECK(a.spawn_digest() == b.spawn_digest());
  }

  SECTION("wind components respect the configured bound") {
    DriftParams dp;
    for (std::uint64_t s = 0; s < 50; ++s) {
      ItemField f = spawn_with_seed(map, SpawnParams{}, dp, s);
      CHECK(std::abs(f.wind_x) <= dp.wind_max);
      CHECK(std::abs(f.wind_y) <= dp.wind_max);
    }
  }

  SECTION("items always land inside navigable area") {
    GridMap walled = GridMap::from_text(
        "########\n"
        "#..##..#\n"
        "#..##..#\n"
        "########\n");
    SpawnParams sp;
    sp.k_min = 20;
    sp.k_max = 20;
    sp.spread_std = 4.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      ItemField f = spawn_with_seed(walled, sp, DriftParams{}, s);
      for (const auto& it : f.items) {
        auto cell = walled.node_of_point(it.x, it.y);
        REQUIRE(cell.has_value());
        CHECK(walled.navigable(*cell));
      }
    }
  }

  SECTION("monte carlo: item-count mean and hotspot uniformity") {
    GridMap small = open_grid(5, 5);
    SpawnParams sp;
    sp.spread_std = 2.0;
    const int trials = 10000;
    double count_sum = 0.0;
    std::vector<int> hotspot_freq(small.cell_count(), 0);
    for (int s = 0; s < trials; ++s) {
      ItemField f = spawn_with_seed(small, sp, DriftParams{},
                                    static_cast<std::uint64_t>(s));
      count_sum += f.initial_count;
      ++hotspot_freq[small.index(f.hotspot)];
    }
    double mean = count_sum / trials;
    CHECK(std::abs(mean - sp.k_mean) / sp.k_mean < 0.02);

    // chi-squared against uniform over 25 cells; df=24, 0.999 quantile ~51.2
    double expected = static_cast<double>(trials) / small.cell_count();
    double chi2 = 0.0;
    for (int c : hotspot_freq) {
      double d = c - expected;
      chi2 += d * d / expected;
    }
    CHECK(chi2 < 51.2);
  }

  SECTION("pathological map aborts after bounded rejections") {
    // a huge spread on a single-cell map makes nearly every draw miss, so
    // the per-item rejection budget runs out
    GridMap tiny = GridMap::from_text("#.#\n###\n");
    SpawnParams sp;
    sp.k_min = 1;
    sp.k_max = 1;
    sp.spread_std = 1e6;
    bool threw = false;
    for (std::uint64_t s = 0; s < 4 && !threw; ++s) {
      try {
        spawn_with_seed(tiny, sp, DriftParams{}, s);
      } catch (const RuntimeError&) {
        threw = true;
      }
    }
    CHECK(threw);
  }
}

TEST_CASE("step_items") {
  GridMap map = open_grid(10, 10);

  SECTION("no wind, no noise: positions unchanged") {
    SpawnParams sp;
    sp.k_min = 30;
    sp.k_max = 30;
    DriftParams dp;
    dp.wind_max = 0.0;
    dp.rand_max = 0.0;
    ItemField f = spawn_with_seed(map, sp, dp, 5);
    auto before = f.items;
    Rng drift(derive_seed(5, "drift"));
    step_items(f, map, drift);
    for (std::size_t k = 0; k < f.items.size(); ++k) {
      CHECK(f.items[k].x == before[k].x);
      CHECK(f.items[k].y == before[k].y);
    }
  }

  SECTION("pure wind shifts every interior item by the analytic amount") {
    ItemField f;
    f.drift = DriftParams{};
    f.drift.rand_max = 0.0;
    f.wind_x = 0.05;
    f.wind_y = 0.0;
    f.items = {{0, 4.5, 4.5, true}, {1, 2.25, 7.5, true}};
    Rng drift(99);
    step_items(f, map, drift);
    CHECK(f.items[0].x == Catch::Approx(4.55).margin(1e-12));
    CHECK(f.items[0].y == Catch::Approx(4.5).margin(1e-12));
    CHECK(f.items[1].x == Catch::Approx(2.30).margin(1e-12));
  }

  SECTION("drift into an obstacle cancels the displacement") {
    GridMap walled = GridMap::from_text("..#\n..#\n..#\n");
    ItemField f;
    f.drift = DriftParams{};
    f.drift.rand_max = 0.0;
    f.wind_x = 0.0;
    f.wind_y = 0.3;  // pushes toward the wall column
    f.items = {{0, 0.5, 1.9, true}};
    Rng drift(1);
    step_items(f, walled, drift);
    CHECK(f.items[0].y == 1.9);  // blocked this step
  }

  SECTION("drift off the map edge is blocked too") {
    ItemField f;
    f.drift = DriftParams{};
    f.drift.rand_max = 0.0;
    f.wind_x = -0.5;
    f.wind_y = 0.0;
    f.items = {{0, 0.2, 3.0, true}};
    Rng drift(1);
    step_items(f, map, drift);
    CHECK(f.items[0].x == 0.2);
  }

  SECTION("dead items neither move nor consume noise draws") {
    ItemField f;
    f.drift = DriftParams{};
    f.wind_x = 0.0;
    f.wind_y = 0.0;
    f.items = {{0, 1.5, 1.5, false}, {1, 5.5, 5.5, true}};
    Rng a(77), b(77);
    step_items(f, map, a);
    ItemField g;
    g.drift = f.drift;
    g.items = {{1, 5.5, 5.5, true}};
    step_items(g, map, b);
    CHECK(f.items[0].x == 1.5);
    CHECK(f.items[1].x == g.items[0].x);
    CHECK(f.items[1].y == g.items[0].y);
  }
}

TEST_CASE("discretize") {
  GridMap map = open_grid(6, 6);

  SECTION("empty field gives all zeros") {
    ItemField f;
    auto y = discretize(f, map);
    for (int v : y) CHECK(v == 0);
  }

  SECTION("three items in one cell") {
    ItemField f;
    f.items = {{0, 2.2, 3.3, true}, {1, 2.8, 3.7, true}, {2, 2.5, 3.5, true}};
    auto y = discretize(f, map);
    CHECK(y[map.index({2, 3})] == 3);
    int total = 0;
    for (int v : y) total += v;
    CHECK(total == 3);
  }

  SECTION("random field matches the per-item re-binning oracle") {
    SpawnParams sp;
    sp.k_min = 50;
    sp.k_max = 50;
    GridMap big = open_grid(15, 15);
    ItemField f = spawn_with_seed(big, sp, DriftParams{}, 321);
    auto y = discretize(f, big);
    std::vector<int> oracle(big.cell_count(), 0);
    for (const auto& it : f.items) {
      auto cell = big.node_of_point(it.x, it.y);
      REQUIRE(cell.has_value());
      ++oracle[big.index(*cell)];
    }
    CHECK(y == oracle);
    int total = 0;
    for (int v : y) total += v;
    CHECK(total == f.alive_count());
  }
}

TEST_CASE("collect_at") {
  GridMap map = open_grid(6, 6);
  ItemField f;
  f.items = {{0, 2.2, 3.3, true},
             {1, 2.8, 3.7, true},
             {2, 2.5, 3.5, true},
             {3, 2.1, 3.9, true},
             {4, 0.5, 0.5, true}};

  SECTION("empty cell collects nothing") {
    auto r = collect_at(f, map, {5, 5});
    CHECK(r.count == 0);
    CHECK(f.alive_count() == 5);
  }

  SECTION("collects every item in the cell, destructively") {
    auto r = collect_at(f, map, {2, 3});
    CHECK(r.count == 4);
    CHECK(r.ids == std::vector<int>{0, 1, 2, 3});
    CHECK(f.alive_count() == 1);

    auto again = collect_at(f, map, {2, 3});
    CHECK(again.count == 0);
    CHECK(f.alive_count() == 1);
  }

  SECTION("non-navigable node is a domain error") {
    GridMap walled = GridMap::from_text("..\n.#\n");
    ItemField g;
    CHECK_THROWS_AS(collect_at(g, walled, {1, 1}), std::domain_error);
  }

  SECTION("conservation across collects and drifts") {
    SpawnParams sp;
    GridMap big = open_grid(12, 12);
    ItemField field = spawn_with_seed(big, sp, DriftParams{}, 777);
    const int k = field.initial_count;
    Rng drift(derive_seed(777, "drift"));
    Rng pick(999);
    int collected = 0;
    for (int t = 0; t < 60; ++t) {
      NodeId n = big.navigable_nodes()[pick.below(big.navigable_count())];
      collected += collect_at(field, big, n).count;
      step_items(field, big, drift);
      REQUIRE(collected + field.alive_count() == k);
    }
  }
}
