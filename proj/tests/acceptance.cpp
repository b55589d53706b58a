// Acceptance suite: one line per criterion, nonzero exit if any fails.
//
//   1. marginal-contribution formula reproduces the published ablation table
//   2. byte-identical reruns of the run command
//   3. metric implementations against independent oracles
//   4. conservation and bound properties over random episodes
//   5. online/offline metric equivalence through the CLI
//   6. qualitative algorithm ordering at desk scale
//   7. corruption sweep degradation
//   8. synthetic sensitivity-slope recovery

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "forage/engine.hpp"
#include "forage/experiments.hpp"
#include "forage/metrics.hpp"

namespace fs = std::filesystem;
using namespace forage;
namespace fm = forage::metrics;
namespace fe = forage::experiments;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("[%s] criterion %d: %s\n", ok ? "PASS" : "FAIL", criterion,
              detail.c_str());
  if (!ok) ++g_failures;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::shared_ptr<const GridMap> load_bundled_map(const std::string& name) {
  std::ifstream in(std::string(FORAGE_SOURCE_DIR "/maps/") + name);
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return std::make_shared<const GridMap>(GridMap::from_text(text));
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(FORAGE_CLI_PATH) + " " + args +
                    " >/dev/null 2>/dev/null";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

// --- criterion 1 ------------------------------------------------------------

void criterion_1() {
  struct Row {
    double full, ablated, expected;
  };
  // published full/ablated model errors and the resulting contributions
  const std::vector<Row> rows = {
      {0.0010, 0.0077, 0.8701}, {0.0010, 0.0017, 0.4118},
      {0.0017, 0.0130, 0.8692}, {0.0017, 0.0029, 0.4138},
      {0.0165, 0.0223, 0.2601}, {0.0165, 0.0202, 0.1832},
  };
  double worst = 0.0;
  for (const auto& r : rows) {
    double mc = fm::marginal_contribution(r.full, r.ablated, false);
    worst = std::max(worst, std::abs(mc - r.expected));
  }
  report(1, worst <= 0.0005,
         "marginal-contribution table reproduction, worst |error| = " +
             std::to_string(worst));
}

// --- criterion 2 ------------------------------------------------------------

void criterion_2() {
  auto t0 = std::chrono::steady_clock::now();
  fs::path dir = fs::temp_directory_path() / "forage_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream s(dir / "scenario.json");
    s << "{ \"map\": \"" FORAGE_SOURCE_DIR "/maps/open20.map\", "
         "\"seed\": 1234, \"episodes\": 2, \"horizon\": 150 }\n";
  }
  bool ok = true;
  std::string ref_trace0, ref_trace1, ref_report;
  for (int rep = 0; rep < 10 && ok; ++rep) {
    fs::path out = dir / ("rep" + std::to_string(rep));
    if (run_cli("run " + (dir / "scenario.json").string() + " --out " +
                out.string()) != 0) {
      ok = false;
      break;
    }
    std::string t0s = slurp(out / "trace_000.jsonl");
    std::string t1s = slurp(out / "trace_001.jsonl");
    std::string rep_s = slurp(out / "report.json");
    if (rep == 0) {
      ref_trace0 = t0s;
      ref_trace1 = t1s;
      ref_report = rep_s;
      ok = !t0s.empty() && !rep_s.empty();
    } else {
      ok = t0s == ref_trace0 && t1s == ref_trace1 && rep_s == ref_report;
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();
  fs::remove_all(dir);
  report(2, ok && secs < 5.0,
         "10 reruns byte-identical (20x20, 4 agents, T=150) in " +
             std::to_string(secs) + " s");
}

// --- criterion 3 ------------------------------------------------------------

void paths_enumerate(const GridMap& map, NodeId at, NodeId goal,
                     std::set<int>& visited, double cost, double& best) {
  if (at == goal) {
    best = std::min(best, cost);
    return;
  }
  for (NodeId n : map.neighbors(at)) {
    int idx = map.index(n);
    if (visited.count(idx)) continue;
    visited.insert(idx);
    double w = (n.i != at.i && n.j != at.j) ? std::sqrt(2.0) : 1.0;
    paths_enumerate(map, n, goal, visited, cost + w, best);
    visited.erase(idx);
  }
}

void criterion_3() {
  bool ok = true;
  std::string fail;

  {  // Dijkstra against exhaustive path enumeration
    GridMap g = GridMap::from_text("..#\n.#.\n...\n");
    for (NodeId a : g.navigable_nodes())
      for (NodeId b : g.navigable_nodes()) {
        std::set<int> visited{g.index(a)};
        double best = std::numeric_limits<double>::infinity();
        paths_enumerate(g, a, b, visited, 0.0, best);
        auto p = g.shortest_path(a, b);
        double got = p ? p->cost : std::numeric_limits<double>::infinity();
        if (std::isfinite(best) != p.has_value() ||
            (p && std::abs(got - best) > 1e-9 * (1.0 + best))) {
          ok = false;
          fail = "dijkstra";
        }
      }
  }
  {  // FOV against exhaustive offset scan
    GridMap g(11, 11, std::vector<std::uint8_t>(121, 1));
    auto fov = field_of_view(g, {5, 5}, 4.0);
    std::vector<int> oracle;
    for (int i = 0; i < 11; ++i)
      for (int j = 0; j < 11; ++j) {
        double di = i - 5, dj = j - 5;
        if (di * di + dj * dj < 16.0) oracle.push_back(g.index({i, j}));
      }
    if (fov != oracle || fov.size() != 45) {
      ok = false;
      fail = "fov";
    }
  }
  {  // Gini against the direct double sum
    auto direct = [](const std::vector<double>& v) {
      double total = 0, abs_sum = 0;
      for (double x : v) total += x;
      for (double a : v)
        for (double b : v) abs_sum += std::abs(a - b);
      double n = static_cast<double>(v.size());
      return total == 0 ? 0.0 : abs_sum / (2 * n * n * (total / n));
    };
    for (const auto& v :
         std::vector<std::vector<double>>{{5, 5}, {10, 0}, {3, 1}, {1, 2, 3, 4},
                                          {7, 0, 0}}) {
      if (std::abs(fm::gini(v) - direct(v)) > 1e-9) {
        ok = false;
        fail = "gini";
      }
    }
  }
  {  // coverage overlap against per-cell counts
    GridMap g(12, 12, std::vector<std::uint8_t>(144, 1));
    auto a = field_of_view(g, {5, 5}, 1.5);
    auto b = field_of_view(g, {5, 7}, 1.5);
    if (std::abs(fm::coverage_overlap({a, b}) - 3.0 / 15.0) > 1e-9) {
      ok = false;
      fail = "coverage overlap";
    }
  }
  {  // RMSE against a dense direct convolution
    GridMap g(16, 16, std::vector<std::uint8_t>(256, 1));
    std::vector<int> y(g.cell_count(), 0), zero(g.cell_count(), 0);
    y[g.index({8, 8})] = 1;
    double z1 = 0;
    for (int d = -3; d <= 3; ++d) z1 += std::exp(-0.5 * d * d);
    double sum_sq = 0;
    for (int di = -3; di <= 3; ++di)
      for (int dj = -3; dj <= 3; ++dj) {
        double k = std::exp(-0.5 * (di * di + dj * dj)) / (z1 * z1);
        sum_sq += k * k;
      }
    double analytic = std::sqrt(sum_sq / g.navigable_count());
    if (std::abs(fm::rmse(y, zero, g) - analytic) > 1e-6 * analytic) {
      ok = false;
      fail = "rmse";
    }
  }
  {  // OLS exact-line recovery
    std::vector<std::pair<double, double>> pts;
    for (int k = 0; k <= 20; ++k)
      pts.emplace_back(k * 0.05, -40.0 * (k * 0.05) + 99.0);
    auto f = fm::sensitivity_slope(pts);
    if (std::abs(f.slope + 40.0) > 1e-9 * 40.0 ||
        std::abs(f.intercept - 99.0) > 1e-9 * 99.0) {
      ok = false;
      fail = "ols";
    }
  }
  report(3, ok,
         ok ? "metric oracles (dijkstra, fov, gini, co, rmse, ols) agree"
            : "oracle disagreement in " + fail);
}

// --- criterion 4 ------------------------------------------------------------

void criterion_4() {
  auto map = load_bundled_map("open20.map");
  bool ok = true;
  std::string fail;
  for (int e = 0; e < 50 && ok; ++e) {
    EpisodeConfig cfg;
    cfg.map = map;
    cfg.horizon = 150;
    cfg.master_seed = 9000 + e;
    cfg.scout_policy = e % 2 == 0 ? "greedy" : "levy";
    cfg.forager_policy = e % 2 == 0 ? "greedy" : "levy";
    cfg.spawn.k_mean = 40;
    cfg.spawn.k_std = 10;
    cfg.spawn.k_min = 10;
    cfg.spawn.k_max = 80;
    EpisodeTrace tr = run_episode(cfg);
    for (const auto& s : tr.summaries)
      if (s.alive + s.collected != tr.header.item_count) {
        ok = false;
        fail = "conservation";
      }
    fm::MetricReport rep = fm::compute_report(tr);
    double prev_d = -1, prev_c = -1;
    for (int t = 0; t < rep.steps; ++t) {
      if (rep.pta_d[t] < prev_d || rep.pta_c[t] < prev_c ||
          rep.pta_d[t] < 0 || rep.pta_d[t] > 100 || rep.pta_c[t] < 0 ||
          rep.pta_c[t] > 100) {
        ok = false;
        fail = "pta bounds/monotonicity";
      }
      prev_d = rep.pta_d[t];
      prev_c = rep.pta_c[t];
      if (rep.mi[t] < 0 || rep.mi[t] > 1) {
        ok = false;
        fail = "mi bounds";
      }
      if (rep.co[t] < 0 || rep.co[t] > 1) {
        ok = false;
        fail = "co bounds";
      }
      if (rep.csr_series[t] &&
          (*rep.csr_series[t] < 0 || *rep.csr_series[t] > 1)) {
        ok = false;
        fail = "csr bounds";
      }
    }
    std::map<int, int> discover_t;
    for (const auto& d : tr.discovers) discover_t[d.item] = d.t;
    for (const auto& c : tr.collects) {
      auto it = discover_t.find(c.item);
      if (it != discover_t.end() && it->second > c.t) {
        ok = false;
        fail = "discover/collect order";
      }
    }
  }
  report(4, ok,
         ok ? "conservation and bounds hold over 50 random episodes"
            : "violated: " + fail);
}

// --- criterion 5 ------------------------------------------------------------

void criterion_5() {
  fs::path dir = fs::temp_directory_path() / "forage_acceptance_offline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  {
    std::ofstream s(dir / "scenario.json");
    s << "{ \"map\": \"" FORAGE_SOURCE_DIR "/maps/open20.map\", "
         "\"seed\": 77, \"episodes\": 20, \"horizon\": 100 }\n";
  }
  bool ok = run_cli("run " + (dir / "scenario.json").string() + " --out " +
                    (dir / "run").string() + " --jobs 4") == 0;
  if (ok) {
    std::string traces;
    for (int e = 0; e < 20; ++e) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "trace_%03d.jsonl", e);
      traces += " " + (dir / "run" / buf).string();
    }
    ok = run_cli("metrics --trace" + traces + " --out " +
                 (dir / "offline").string()) == 0;
  }
  if (ok) {
    for (int e = 0; e < 20 && ok; ++e) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "report_%03d.json", e);
      ok = slurp(dir / "run" / buf) == slurp(dir / "offline" / buf) &&
           !slurp(dir / "run" / buf).empty();
    }
    ok = ok && slurp(dir / "run/report.json") == slurp(dir / "offline/report.json");
    ok = ok && slurp(dir / "run/series.csv") == slurp(dir / "offline/series.csv");
  }
  fs::remove_all(dir);
  report(5, ok, "online and offline metric reports byte-equal for 20 episodes");
}

// --- criterion 6 ------------------------------------------------------------

fe::BatchSpec desk_batch(std::shared_ptr<const GridMap> map,
                         const std::string& policy) {
  fe::BatchSpec spec;
  spec.base.map = std::move(map);
  spec.base.horizon = 150;
  spec.base.master_seed = 20240915;
  spec.base.scout_policy = policy;
  spec.base.forager_policy = policy;
  spec.base.algorithm_label = policy;
  spec.episodes = 100;
  return spec;
}

void criterion_6() {
  auto t0 = std::chrono::steady_clock::now();
  auto map = load_bundled_map("open40.map");
  auto greedy = fe::run_batch(desk_batch(map, "greedy"), 4);
  auto levy = fe::run_batch(desk_batch(map, "levy"), 4);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();

  double g_pta = greedy.aggregate.find_scalar("pta_c_final")->mean;
  double l_pta = levy.aggregate.find_scalar("pta_c_final")->mean;
  double g_csr = greedy.aggregate.csr_final ? greedy.aggregate.csr_final->mean
                                            : 0.0;
  double l_csr = levy.aggregate.csr_final ? levy.aggregate.csr_final->mean : 0.0;
  const auto* co = greedy.aggregate.find_series("co");
  double co0 = co->mean.front();
  double co_min_early = co0;
  for (int t = 0; t <= 30; ++t) co_min_early = std::min(co_min_early, co->mean[t]);

  bool ok = g_pta >= l_pta + 10.0 && g_csr > l_csr && co0 >= 0.5 &&
            co_min_early < 0.2 && secs < 60.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "pta_c %.2f vs %.2f, csr %.3f vs %.3f, co0 %.2f -> min %.2f "
                "by t=30, %.1f s",
                g_pta, l_pta, g_csr, l_csr, co0, co_min_early, secs);
  report(6, ok, buf);
}

// --- criterion 7 ------------------------------------------------------------

void criterion_7() {
  auto t0 = std::chrono::steady_clock::now();
  auto map = load_bundled_map("open40.map");

  // corrupt(pi, 0) must leave traces byte-identical
  fe::BatchSpec plain = desk_batch(map, "greedy");
  plain.episodes = 2;
  fe::BatchSpec zero = plain;
  zero.base.eps_scouts = 0.0;
  auto plain_run = fe::run_batch(plain, 2, true);
  auto zero_run = fe::run_batch(zero, 2, true);
  bool identity = true;
  for (std::size_t k = 0; k < plain_run.traces.size(); ++k)
    identity = identity &&
               plain_run.traces[k].to_jsonl() == zero_run.traces[k].to_jsonl();

  fe::SweepSpec spec;
  spec.batch = desk_batch(map, "greedy");
  spec.batch.episodes = 20;
  spec.corrupted_team = Team::Scout;
  spec.metric = "pta_c_final";
  auto sweep = fe::epsilon_sweep(spec, 4);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();

  double p0 = sweep.points.front().value.mean;
  double p1 = sweep.points.back().value.mean;
  bool ok = identity && sweep.fit.slope < 0.0 && p1 <= p0 - 20.0 &&
            secs < 600.0;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "slope %.2f, pta_c %.2f -> %.2f at eps=1, eps=0 traces %s, "
                "%.1f s",
                sweep.fit.slope, p0, p1,
                identity ? "byte-identical" : "DIFFER", secs);
  report(7, ok, buf);
}

// --- criterion 8 ------------------------------------------------------------

void criterion_8() {
  std::vector<fe::SweepPoint> pts;
  for (int k = 0; k <= 20; ++k) {
    double eps = k * 0.05;
    pts.push_back({eps, {100.0 * (1.0 - eps), 0.0}, 1});
  }
  auto fit = fe::fit_curve(pts, Team::Scout, "pta_c_final");
  bool slope_ok = std::abs(fit.fit.slope + 100.0) <= 1.0;

  std::vector<std::pair<double, double>> regime;
  for (int k = 0; k <= 20; ++k) {
    double x = k * 0.05;
    regime.emplace_back(x, x < 0.5 ? 0.0 : -80.0 * (x - 0.5));
  }
  auto seg = fm::segmented_slope(regime);
  bool bp_ok = std::abs(seg.breakpoint - 0.5) <= 0.05 + 1e-9;

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "constructed curve SS %.4f, two-regime breakpoint %.2f",
                fit.fit.slope, seg.breakpoint);
  report(8, slope_ok && bp_ok, buf);
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all 8 criteria passed\n");
  return 0;
}
