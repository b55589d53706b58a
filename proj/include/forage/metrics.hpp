#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "forage/agents.hpp"
#include "forage/error.hpp"
#include "forage/grid_map.hpp"
#include "forage/trace.hpp"

namespace forage::metrics {

// ---------------------------------------------------------------------------
// primary metrics

inline double pta(double achieved, double upper_bound) {
  if (upper_bound <= 0.0)
    throw UndefinedMetric("pta: upper bound must be positive");
  return 100.0 * achieved / upper_bound;
}

// Separable discrete Gaussian, sigma 1, truncation radius 3, zero padding,
// kernel normalized to unit sum.
inline std::vector<double> gaussian_blur(const std::vector<double>& m, int h,
                                         int w) {
  constexpr int kRadius = 3;
  std::array<double, 2 * kRadius + 1> k{};
  double sum = 0.0;
  for (int d = -kRadius; d <= kRadius; ++d) {
    k[d + kRadius] = std::exp(-0.5 * d * d);
    sum += k[d + kRadius];
  }
  for (auto& v : k) v /= sum;

  std::vector<double> tmp(m.size(), 0.0), out(m.size(), 0.0);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int d = -kRadius; d <= kRadius; ++d) {
        int jj = j + d;
        if (jj < 0 || jj >= w) continue;
        acc += k[d + kRadius] * m[static_cast<std::size_t>(i) * w + jj];
      }
      tmp[static_cast<std::size_t>(i) * w + j] = acc;
    }
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int d = -kRadius; d <= kRadius; ++d) {
        int ii = i + d;
        if (ii < 0 || ii >= h) continue;
        acc += k[d + kRadius] * tmp[static_cast<std::size_t>(ii) * w + j];
      }
      out[static_cast<std::size_t>(i) * w + j] = acc;
    }
  return out;
}

// Model error between smoothed count fields, averaged over navigable cells.
inline double rmse(const std::vector<int>& truth,
                   const std::vector<int>& estimate, const GridMap& map) {
  if (truth.size() != estimate.size() ||
      static_cast<int>(truth.size()) != map.cell_count())
    throw std::invalid_argument("rmse: matrix dimensions do not match map");
  std::vector<double> a(truth.begin(), truth.end());
  std::vector<double> b(estimate.begin(), estimate.end());
  auto ga = gaussian_blur(a, map.height(), map.width());
  auto gb = gaussian_blur(b, map.height(), map.width());
  double sum = 0.0;
  for (NodeId n : map.navigable_nodes()) {
    double d = ga[map.index(n)] - gb[map.index(n)];
    sum += d * d;
  }
  return std::sqrt(sum / map.navigable_count());
}

// Normalized first-passage time of a series to threshold x; 1 when the
// threshold is never reached.
inline double nt_x(std::span<const double> series, double x, int horizon) {
  if (series.empty()) throw std::invalid_argument("nt_x: empty series");
  if (!(x > 0.0 && x <= 100.0))
    throw std::invalid_argument("nt_x: threshold must lie in (0,100]");
  for (std::size_t t = 0; t < series.size(); ++t)
    if (series[t] >= x) return static_cast<double>(t) / horizon;
  return 1.0;
}

inline double throughput(int handled, int team_count, int steps) {
  if (team_count < 1 || steps < 1)
    throw UndefinedMetric("throughput: zero denominator");
  return static_cast<double>(handled) / (team_count * steps);
}

struct IdlenessSeries {
  std::vector<double> mi;
  std::vector<double> irr;  // irr[t] = mi[t] - mi[t+1]; last entry 0
};

// Rebuilds idleness bookkeeping from the trace: ages reset on observation
// (any FOV) or on physical visits, depending on mode, and grow by one step
// otherwise. Matches the engine's online values exactly.
inline IdlenessSeries idleness_series(const EpisodeTrace& trace,
                                      const GridMap& map, double forgetting,
                                      IdlenessMode mode) {
  if (forgetting <= 0.0 || forgetting >= 1.0)
    throw std::invalid_argument("idleness: forgetting must lie in (0,1)");
  IdlenessSeries out;
  std::vector<int> age(map.cell_count(), 0);
  std::size_t move_at = 0;
  for (const auto& s : trace.summaries) {
    std::vector<int> reset;
    if (mode == IdlenessMode::Observe) {
      for (const auto& f : s.fov) reset.insert(reset.end(), f.begin(), f.end());
    } else {
      for (; move_at < trace.moves.size() && trace.moves[move_at].t == s.t;
           ++move_at)
        reset.push_back(map.index(trace.moves[move_at].to));
    }
    std::sort(reset.begin(), reset.end());
    reset.erase(std::unique(reset.begin(), reset.end()), reset.end());
    std::size_t r = 0;
    double sum = 0.0;
    for (NodeId n : map.navigable_nodes()) {
      int idx = map.index(n);
      while (r < reset.size() && reset[r] < idx) ++r;
      if (r < reset.size() && reset[r] == idx)
        age[idx] = 0;
      else
        ++age[idx];
      sum += idleness_value(forgetting, age[idx]);
    }
    out.mi.push_back(sum / map.navigable_count());
  }
  out.irr.assign(out.mi.size(), 0.0);
  for (std::size_t t = 0; t + 1 < out.mi.size(); ++t)
    out.irr[t] = out.mi[t] - out.mi[t + 1];
  return out;
}

// ---------------------------------------------------------------------------
// inter-team metrics

struct ItemTimes {
  std::map<int, const DiscoverEvent*> discover;
  std::map<int, const CollectEvent*> collect;
};

inline ItemTimes item_times(const EpisodeTrace& trace) {
  ItemTimes it;
  for (const auto& e : trace.discovers) it.discover.emplace(e.item, &e);
  for (const auto& e : trace.collects) it.collect.emplace(e.item, &e);
  return it;
}

// Normalized delay between scout discovery and collection, one value per
// item that experienced both; items lacking either event are excluded.
inline std::vector<double> dsl(const EpisodeTrace& trace, int horizon) {
  auto times = item_times(trace);
  std::vector<double> out;
  for (const auto& [item, col] : times.collect) {
    auto d = times.discover.find(item);
    if (d == times.discover.end()) continue;
    if (d->second->team != Team::Scout) continue;
    if (d->second->t > col->t) continue;
    out.push_back(static_cast<double>(col->t - d->second->t) / horizon);
  }
  return out;
}

// Fraction of collected items that do not enter the DSL distribution.
inline double dsl_excluded_fraction(const EpisodeTrace& trace) {
  auto times = item_times(trace);
  if (times.collect.empty()) return 0.0;
  int excluded = 0;
  for (const auto& [item, col] : times.collect) {
    auto d = times.discover.find(item);
    if (d == times.discover.end() || d->second->team != Team::Scout ||
        d->second->t > col->t)
      ++excluded;
  }
  return static_cast<double>(excluded) / times.collect.size();
}

// Temporal lag between the first steps at which two series attain their
// maxima. Earliest attainment disambiguates plateaus.
inline double itl(std::span<const double> r1, std::span<const double> r2,
                  int horizon) {
  if (r1.empty() || r2.empty()) throw std::invalid_argument("itl: empty series");
  auto first_peak = [](std::span<const double> r) {
    std::size_t best = 0;
    for (std::size_t t = 1; t < r.size(); ++t)
      if (r[t] > r[best]) best = t;
    return best;
  };
  double t1 = static_cast<double>(first_peak(r1));
  double t2 = static_cast<double>(first_peak(r2));
  return std::abs(t1 - t2) / horizon;
}

struct CsrSeries {
  std::vector<std::optional<double>> series;  // absent until first collection
  std::optional<double> final;
};

// Fraction of collected items whose first discovery was made by a scout at
// or before their collection.
inline CsrSeries csr(const EpisodeTrace& trace) {
  auto times = item_times(trace);
  std::vector<std::pair<int, bool>> collected;  // (t_c, cooperative)
  for (const auto& [item, col] : times.collect) {
    auto d = times.discover.find(item);
    bool coop = d != times.discover.end() &&
                d->second->team == Team::Scout && d->second->t <= col->t;
    collected.emplace_back(col->t, coop);
  }
  std::sort(collected.begin(), collected.end());
  CsrSeries out;
  std::size_t at = 0;
  int total = 0, coop = 0;
  for (int t = 0; t <= trace.footer.t_end; ++t) {
    for (; at < collected.size() && collected[at].first == t; ++at) {
      ++total;
      coop += collected[at].second ? 1 : 0;
    }
    if (total == 0)
      out.series.emplace_back(std::nullopt);
    else
      out.series.emplace_back(static_cast<double>(coop) / total);
  }
  if (!out.series.empty()) out.final = out.series.back();
  return out;
}

// ---------------------------------------------------------------------------
// intra-team metrics

// Gini index of contribution inequality; 0 for an all-zero vector.
inline double gini(std::span<const double> contributions) {
  if (contributions.empty())
    throw std::invalid_argument("gini: needs at least one agent");
  double total = 0.0;
  for (double c : contributions) total += c;
  if (total == 0.0) return 0.0;
  const double n = static_cast<double>(contributions.size());
  const double mean = total / n;
  double abs_sum = 0.0;
  for (double a : contributions)
    for (double b : contributions) abs_sum += std::abs(a - b);
  return abs_sum / (2.0 * n * n * mean);
}

// Share of currently covered cells seen by two or more agents.
inline double coverage_overlap(const std::vector<std::vector<int>>& fovs) {
  std::map<int, int> count;
  for (const auto& f : fovs)
    for (int c : f) ++count[c];
  if (count.empty()) return 0.0;
  int redundant = 0;
  for (const auto& [cell, n] : count)
    if (n >= 2) ++redundant;
  return static_cast<double>(redundant) / count.size();
}

inline double marginal_contribution(double r_full, double r_ablated,
                                    bool higher_is_better) {
  if (higher_is_better) {
    if (r_full == 0.0)
      throw UndefinedMetric("marginal_contribution: full performance is zero");
    return (r_full - r_ablated) / r_full;
  }
  if (r_ablated == 0.0)
    throw UndefinedMetric("marginal_contribution: ablated performance is zero");
  return (r_ablated - r_full) / r_ablated;
}

// ---------------------------------------------------------------------------
// regression helpers for the corruption-sensitivity analysis

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

inline LinearFit sensitivity_slope(
    std::span<const std::pair<double, double>> points) {
  if (points.size() < 2)
    throw std::invalid_argument("sensitivity_slope: needs >= 2 points");
  double sx = 0, sy = 0;
  for (const auto& [x, y] : points) {
    sx += x;
    sy += y;
  }
  const double n = static_cast<double>(points.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0)
    throw UndefinedMetric("sensitivity_slope: all abscissae equal");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (syy > 0.0) {
    double sse = 0.0;
    for (const auto& [x, y] : points) {
      double e = y - (f.intercept + f.slope * x);
      sse += e * e;
    }
    f.r2 = 1.0 - sse / syy;
  }
  return f;
}

struct SegmentedFit {
  double breakpoint = 0.0;
  LinearFit left;
  LinearFit right;
  double sse = 0.0;
};

// Exhaustive single-breakpoint search: both segments share the breakpoint
// sample and need at least two points. SSE ties resolve toward the median
// abscissa.
inline SegmentedFit segmented_slope(
    std::span<const std::pair<double, double>> points) {
  const std::size_t n = points.size();
  if (n < 4) throw std::invalid_argument("segmented_slope: needs >= 4 points");
  auto sse_of = [](std::span<const std::pair<double, double>> pts) {
    LinearFit f = sensitivity_slope(pts);
    double sse = 0.0;
    for (const auto& [x, y] : pts) {
      double e = y - (f.intercept + f.slope * x);
      sse += e * e;
    }
    return std::pair<LinearFit, double>(f, sse);
  };
  const double median_x = points[(n - 1) / 2].first;
  SegmentedFit best;
  double best_sse = std::numeric_limits<double>::infinity();
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t b = 1; b + 2 <= n; ++b) {
    auto [lf, lsse] = sse_of(points.subspan(0, b + 1));
    auto [rf, rsse] = sse_of(points.subspan(b));
    double total = lsse + rsse;
    double dist = std::abs(points[b].first - median_x);
    const double tol = 1e-12 * (1.0 + std::min(total, best_sse));
    bool better = total < best_sse - tol ||
                  (std::abs(total - best_sse) <= tol && dist < best_dist);
    if (better) {
      best_sse = total;
      best_dist = dist;
      best = {points[b].first, lf, rf, total};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// per-episode report

struct MetricReport {
  std::string algorithm;
  std::uint64_t seed = 0;
  int episode = 0;
  int item_count = 0;
  int horizon = 0;
  int t_end = 0;
  int steps = 0;

  std::vector<double> pta_d, pta_c, rmse_series, mi, irr, co, gini_series;
  std::vector<std::optional<double>> csr_series;

  double pta_d_final = 0, pta_c_final = 0, rmse_final = 0;
  double nt_50 = 1, nt_90 = 1;
  double throughput_value = 0;
  double itl_value = 0;
  std::optional<double> csr_final;
  double gini_final = 0;
  std::vector<double> dsl_values;
  double dsl_excluded = 0;

  ordered_json scalars_json() const {
    ordered_json s;
    s["pta_d_final"] = pta_d_final;
    s["pta_c_final"] = pta_c_final;
    s["rmse_final"] = rmse_final;
    s["nt_50"] = nt_50;
    s["nt_90"] = nt_90;
    s["throughput"] = throughput_value;
    s["itl"] = itl_value;
    if (csr_final)
      s["csr_final"] = *csr_final;
    else
      s["csr_final"] = nullptr;
    s["gini_final"] = gini_final;
    s["dsl_excluded_fraction"] = dsl_excluded;
    return s;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["algorithm"] = algorithm;
    j["seed"] = seed;
    j["episode"] = episode;
    j["K"] = item_count;
    j["horizon"] = horizon;
    j["t_end"] = t_end;
    j["steps"] = steps;
    j["scalars"] = scalars_json();
    j["dsl_values"] = dsl_values;
    ordered_json se;
    se["pta_d"] = pta_d;
    se["pta_c"] = pta_c;
    se["rmse"] = rmse_series;
    se["mi"] = mi;
    se["irr"] = irr;
    se["co"] = co;
    ordered_json cs = ordered_json::array();
    for (const auto& v : csr_series) {
      if (v)
        cs.push_back(*v);
      else
        cs.push_back(nullptr);
    }
    se["csr"] = cs;
    se["gini"] = gini_series;
    j["series"] = se;
    return j;
  }

  // One row per step.
  std::string to_series_csv() const {
    std::string out = "t,pta_d,pta_c,rmse,mi,irr,co,csr,gini\n";
    auto num = [](double v) { return ordered_json(v).dump(); };
    for (int t = 0; t < steps; ++t) {
      out += std::to_string(t);
      out += ',' + num(pta_d[t]);
      out += ',' + num(pta_c[t]);
      out += ',' + num(rmse_series[t]);
      out += ',' + num(mi[t]);
      out += ',' + num(irr[t]);
      out += ',' + num(co[t]);
      out += ',';
      if (csr_series[t]) out += num(*csr_series[t]);
      out += ',' + num(gini_series[t]);
      out += '\n';
    }
    return out;
  }

  static std::string scalars_csv_header() {
    return "algorithm,seed,episode,K,t_end,steps,pta_d_final,pta_c_final,"
           "rmse_final,nt_50,nt_90,throughput,itl,csr_final,gini_final,"
           "dsl_excluded_fraction\n";
  }

  std::string scalars_csv_row() const {
    auto num = [](double v) { return ordered_json(v).dump(); };
    std::string out = algorithm;
    out += ',' + std::to_string(seed);
    out += ',' + std::to_string(episode);
    out += ',' + std::to_string(item_count);
    out += ',' + std::to_string(t_end);
    out += ',' + std::to_string(steps);
    out += ',' + num(pta_d_final);
    out += ',' + num(pta_c_final);
    out += ',' + num(rmse_final);
    out += ',' + num(nt_50);
    out += ',' + num(nt_90);
    out += ',' + num(throughput_value);
    out += ',' + num(itl_value);
    out += ',';
    if (csr_final) out += num(*csr_final);
    out += ',' + num(gini_final);
    out += ',' + num(dsl_excluded);
    out += '\n';
    return out;
  }
};

// Structural validation: event ordering, per-item uniqueness, conservation,
// and agreement between logged summaries and the event record (including the
// online idleness values). Throws RuntimeError on the first violation.
inline void check_trace_consistency(const EpisodeTrace& trace) {
  const GridMap map = trace.rebuild_map();
  const TraceHeader& h = trace.header;
  const int n_agents = h.scouts.count + h.foragers.count;
  const int steps = trace.steps();

  auto fail = [](const std::string& msg) { throw RuntimeError("trace check: " + msg); };

  if (static_cast<int>(trace.summaries.size()) != steps)
    fail("summary count does not match t_end");
  if (static_cast<int>(trace.moves.size()) != steps * n_agents)
    fail("move count does not match steps * agents");

  std::map<int, int> discover_t, collect_t;
  for (const auto& e : trace.discovers)
    if (!discover_t.emplace(e.item, e.t).second)
      fail("item " + std::to_string(e.item) + " discovered twice");
  for (const auto& e : trace.collects)
    if (!collect_t.emplace(e.item, e.t).second)
      fail("item " + std::to_string(e.item) + " collected twice");
  for (const auto& [item, tc] : collect_t) {
    auto d = discover_t.find(item);
    if (d != discover_t.end() && d->second > tc)
      fail("item " + std::to_string(item) + " collected before discovery");
  }

  auto idle = idleness_series(trace, map, h.forgetting, h.idleness_mode);
  std::size_t md = 0, cd = 0, dd = 0;
  int disc_cum = 0, coll_cum = 0;
  for (int t = 0; t < steps; ++t) {
    const StepSummary& s = trace.summaries[t];
    if (s.t != t) fail("summary steps out of order");
    for (int id = 0; id < n_agents; ++id, ++md) {
      const MoveEvent& m = trace.moves[md];
      if (m.t != t || m.agent != id) fail("move events out of canonical order");
    }
    for (; dd < trace.discovers.size() && trace.discovers[dd].t == t; ++dd)
      ++disc_cum;
    for (; cd < trace.collects.size() && trace.collects[cd].t == t; ++cd)
      ++coll_cum;
    if (s.discovered != disc_cum) fail("summary discovered count mismatch");
    if (s.collected != coll_cum) fail("summary collected count mismatch");
    if (s.alive + s.collected != h.item_count)
      fail("conservation violated: alive + collected != K");
    if (static_cast<int>(s.fov.size()) != n_agents)
      fail("summary FOV list count mismatch");
    std::vector<int> visible;
    for (const auto& f : s.fov) visible.insert(visible.end(), f.begin(), f.end());
    std::sort(visible.begin(), visible.end());
    visible.erase(std::unique(visible.begin(), visible.end()), visible.end());
    std::uint64_t dg = 0xcbf29ce484222325ull;
    for (int c : visible) dg = fnv1a64(&c, sizeof(c), dg);
    if (hex64(dg) != s.visible_digest) fail("visible-set digest mismatch");
    if (s.mi != idle.mi[t]) fail("online/offline mean idleness mismatch");
  }
  if (trace.footer.discovered_total != disc_cum ||
      trace.footer.collected_total != coll_cum)
    fail("footer totals do not match events");
}

// Computes every metric offline from the trace record.
inline MetricReport compute_report(const EpisodeTrace& trace) {
  const GridMap map = trace.rebuild_map();
  const TraceHeader& h = trace.header;
  MetricReport r;
  r.algorithm = h.algorithm;
  r.seed = h.seed;
  r.episode = h.episode;
  r.item_count = h.item_count;
  r.horizon = h.horizon;
  r.t_end = trace.footer.t_end;
  r.steps = trace.steps();

  // cumulative discovery / collection series from events
  std::vector<int> disc(r.steps, 0), coll(r.steps, 0);
  for (const auto& e : trace.discovers) ++disc[e.t];
  for (const auto& e : trace.collects) ++coll[e.t];
  int dc = 0, cc = 0;
  for (int t = 0; t < r.steps; ++t) {
    dc += disc[t];
    cc += coll[t];
    r.pta_d.push_back(pta(dc, h.item_count));
    r.pta_c.push_back(pta(cc, h.item_count));
  }

  for (const auto& s : trace.summaries) {
    std::vector<int> truth(map.cell_count(), 0), est(map.cell_count(), 0);
    for (const auto& sc : s.truth) truth[sc.cell] = sc.n;
    for (const auto& sc : s.model) est[sc.cell] = sc.n;
    r.rmse_series.push_back(rmse(truth, est, map));
  }

  auto idle = idleness_series(trace, map, h.forgetting, h.idleness_mode);
  r.mi = idle.mi;
  r.irr = idle.irr;

  // coverage overlap over the scout team
  for (const auto& s : trace.summaries) {
    std::vector<std::vector<int>> scout_fovs(
        s.fov.begin(), s.fov.begin() + h.scouts.count);
    r.co.push_back(coverage_overlap(scout_fovs));
  }

  // forager workload inequality over time
  {
    std::vector<double> contrib(std::max(h.foragers.count, 1), 0.0);
    std::size_t at = 0;
    for (int t = 0; t < r.steps; ++t) {
      for (; at < trace.collects.size() && trace.collects[at].t == t; ++at) {
        int local = trace.collects[at].agent - h.scouts.count;
        if (local >= 0 && local < h.foragers.count) contrib[local] += 1.0;
      }
      r.gini_series.push_back(h.foragers.count > 0 ? gini(contrib) : 0.0);
    }
  }

  auto cs = csr(trace);
  r.csr_series = cs.series;
  r.csr_final = cs.final;

  r.pta_d_final = r.pta_d.back();
  r.pta_c_final = r.pta_c.back();
  r.rmse_final = r.rmse_series.back();
  r.nt_50 = nt_x(r.pta_c, 50.0, h.horizon);
  r.nt_90 = nt_x(r.pta_c, 90.0, h.horizon);
  r.throughput_value =
      h.foragers.count > 0 ? throughput(cc, h.foragers.count, r.steps) : 0.0;
  r.itl_value = itl(r.pta_d, r.pta_c, h.horizon);
  r.gini_final = r.gini_series.back();
  r.dsl_values = dsl(trace, h.horizon);
  r.dsl_excluded = dsl_excluded_fraction(trace);
  return r;
}

// Named scalar access for sweeps and tables.
inline double scalar_metric(const MetricReport& r, const std::string& name) {
  if (name == "pta_d_final") return r.pta_d_final;
  if (name == "pta_c_final") return r.pta_c_final;
  if (name == "rmse_final") return r.rmse_final;
  if (name == "nt_50") return r.nt_50;
  if (name == "nt_90") return r.nt_90;
  if (name == "throughput") return r.throughput_value;
  if (name == "itl") return r.itl_value;
  if (name == "csr_final") return r.csr_final.value_or(0.0);
  if (name == "gini_final") return r.gini_final;
  if (name == "dsl_excluded_fraction") return r.dsl_excluded;
  throw ConfigError("unknown metric '" + name + "'");
}

}  // namespace forage::metrics
