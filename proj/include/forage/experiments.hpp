#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "forage/engine.hpp"
#include "forage/error.hpp"
#include "forage/metrics.hpp"

namespace forage::experiments {

struct Stat {
  double mean = 0.0;
  double ci = 0.0;  // 95% half-width, 1.96 * s / sqrt(n)
};

// Sums in ascending value order so results do not depend on episode order or
// on the batch's execution interleaving.
inline double stable_sum(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

inline Stat mean_ci(const std::vector<double>& values) {
  Stat st;
  if (values.empty()) return st;
  const double n = static_cast<double>(values.size());
  st.mean = stable_sum(values) / n;
  if (values.size() > 1) {
    std::vector<double> sq;
    sq.reserve(values.size());
    for (double x : values) sq.push_back((x - st.mean) * (x - st.mean));
    double var = stable_sum(std::move(sq)) / (n - 1.0);
    st.ci = 1.96 * std::sqrt(var) / std::sqrt(n);
  }
  return st;
}

struct SeriesBand {
  std::vector<double> mean;
  std::vector<double> ci;
};

struct AggregateReport {
  std::string algorithm;
  int n = 0;
  int horizon = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<std::pair<std::string, Stat>> scalars;
  std::optional<Stat> csr_final;
  std::vector<std::pair<std::string, SeriesBand>> series;
  std::vector<std::optional<Stat>> csr_band;
  std::vector<double> dsl_pooled;
  std::vector<double> itl_values;

  const Stat* find_scalar(const std::string& name) const {
    for (const auto& [k, v] : scalars)
      if (k == name) return &v;
    return nullptr;
  }

  const SeriesBand* find_series(const std::string& name) const {
    for (const auto& [k, v] : series)
      if (k == name) return &v;
    return nullptr;
  }

  ordered_json to_json() const {
    ordered_json j;
    j["algorithm"] = algorithm;
    j["n"] = n;
    j["horizon"] = horizon;
    j["seeds"] = seeds;
    ordered_json sc;
    for (const auto& [k, v] : scalars)
      sc[k] = {{"mean", v.mean}, {"ci", v.ci}};
    if (csr_final)
      sc["csr_final"] = {{"mean", csr_final->mean}, {"ci", csr_final->ci}};
    else
      sc["csr_final"] = nullptr;
    j["scalars"] = sc;
    ordered_json se;
    for (const auto& [k, v] : series)
      se[k] = {{"mean", v.mean}, {"ci", v.ci}};
    ordered_json cm = ordered_json::array(), cc = ordered_json::array();
    for (const auto& s : csr_band) {
      cm.push_back(s ? ordered_json(s->mean) : ordered_json(nullptr));
      cc.push_back(s ? ordered_json(s->ci) : ordered_json(nullptr));
    }
    se["csr"] = {{"mean", cm}, {"ci", cc}};
    j["series"] = se;
    j["dsl_pooled"] = dsl_pooled;
    j["itl_values"] = itl_values;
    return j;
  }

  static AggregateReport from_json(const ordered_json& j) {
    AggregateReport r;
    r.algorithm = j.at("algorithm").get<std::string>();
    r.n = j.at("n").get<int>();
    r.horizon = j.at("horizon").get<int>();
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    for (const auto& [k, v] : j.at("scalars").items()) {
      if (k == "csr_final") {
        if (!v.is_null())
          r.csr_final = Stat{v.at("mean").get<double>(), v.at("ci").get<double>()};
        continue;
      }
      r.scalars.emplace_back(
          k, Stat{v.at("mean").get<double>(), v.at("ci").get<double>()});
    }
    for (const auto& [k, v] : j.at("series").items()) {
      if (k == "csr") {
        const auto& cm = v.at("mean");
        const auto& cc = v.at("ci");
        for (std::size_t t = 0; t < cm.size(); ++t) {
          if (cm[t].is_null())
            r.csr_band.emplace_back(std::nullopt);
          else
            r.csr_band.emplace_back(
                Stat{cm[t].get<double>(), cc[t].get<double>()});
        }
        continue;
      }
      SeriesBand b;
      b.mean = v.at("mean").get<std::vector<double>>();
      b.ci = v.at("ci").get<std::vector<double>>();
      r.series.emplace_back(k, std::move(b));
    }
    r.dsl_pooled = j.at("dsl_pooled").get<std::vector<double>>();
    r.itl_values = j.at("itl_values").get<std::vector<double>>();
    return r;
  }

  // Batch series table, one row per step.
  std::string to_series_csv() const {
    std::string head = "t";
    for (const auto& [k, v] : series) head += "," + k + "_mean," + k + "_ci";
    head += ",csr_mean,csr_ci\n";
    std::string out = head;
    auto num = [](double v) { return ordered_json(v).dump(); };
    for (int t = 0; t < horizon; ++t) {
      out += std::to_string(t);
      for (const auto& [k, v] : series)
        out += ',' + num(v.mean[t]) + ',' + num(v.ci[t]);
      if (t < static_cast<int>(csr_band.size()) && csr_band[t])
        out += ',' + num(csr_band[t]->mean) + ',' + num(csr_band[t]->ci);
      else
        out += ",,";
      out += '\n';
    }
    return out;
  }
};

namespace detail {

// Runs fn(0..n-1) across `jobs` workers; rethrows the first failure after
// joining. Output slots are pre-sized by the caller, so results are
// independent of scheduling.
template <typename Fn>
void run_indexed(int n, int jobs, Fn&& fn) {
  if (jobs < 1) jobs = 1;
  jobs = std::min(jobs, std::max(n, 1));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline const std::vector<std::string>& scalar_names() {
  static const std::vector<std::string> names = {
      "pta_d_final", "pta_c_final", "rmse_final",
      "nt_50",       "nt_90",       "throughput",
      "itl",         "gini_final",  "dsl_excluded_fraction"};
  return names;
}

inline const std::vector<std::string>& series_names() {
  static const std::vector<std::string> names = {
      "pta_d", "pta_c", "rmse", "mi", "irr", "co", "gini"};
  return names;
}

inline const std::vector<double>& series_by_name(
    const metrics::MetricReport& r, const std::string& name) {
  if (name == "pta_d") return r.pta_d;
  if (name == "pta_c") return r.pta_c;
  if (name == "rmse") return r.rmse_series;
  if (name == "mi") return r.mi;
  if (name == "irr") return r.irr;
  if (name == "co") return r.co;
  if (name == "gini") return r.gini_series;
  throw ConfigError("unknown series '" + name + "'");
}

}  // namespace detail

struct BatchSpec {
  EpisodeConfig base;
  int episodes = 100;

  void validate() const {
    base.validate();
    if (episodes < 1) throw ConfigError("episodes must be >= 1");
  }

  // Episode seeds derive from the batch master seed by index, so two
  // algorithms run over the same spec see identical environment streams.
  std::uint64_t episode_seed(int index) const {
    return derive_seed(base.master_seed, "episode", index);
  }

  EpisodeConfig episode_config(int index) const {
    EpisodeConfig cfg = base;
    cfg.master_seed = episode_seed(index);
    cfg.episode_index = index;
    return cfg;
  }
};

// Aggregates per-episode reports; series shorter than the horizon (early
// cleared episodes) are extended with their final value.
inline AggregateReport aggregate_reports(
    const std::vector<metrics::MetricReport>& reports, int horizon) {
  AggregateReport agg;
  agg.n = static_cast<int>(reports.size());
  agg.horizon = horizon;
  if (!reports.empty()) agg.algorithm = reports.front().algorithm;
  for (const auto& r : reports) agg.seeds.push_back(r.seed);

  for (const auto& name : detail::scalar_names()) {
    std::vector<double> vals;
    vals.reserve(reports.size());
    for (const auto& r : reports) vals.push_back(metrics::scalar_metric(r, name));
    agg.scalars.emplace_back(name, mean_ci(vals));
  }
  {
    std::vector<double> vals;
    for (const auto& r : reports)
      if (r.csr_final) vals.push_back(*r.csr_final);
    if (!vals.empty()) agg.csr_final = mean_ci(vals);
  }

  for (const auto& name : detail::series_names()) {
    SeriesBand band;
    for (int t = 0; t < horizon; ++t) {
      std::vector<double> vals;
      vals.reserve(reports.size());
      for (const auto& r : reports) {
        const auto& s = detail::series_by_name(r, name);
        vals.push_back(t < static_cast<int>(s.size()) ? s[t] : s.back());
      }
      Stat st = mean_ci(vals);
      band.mean.push_back(st.mean);
      band.ci.push_back(st.ci);
    }
    agg.series.emplace_back(name, std::move(band));
  }

  for (int t = 0; t < horizon; ++t) {
    std::vector<double> vals;
    for (const auto& r : reports) {
      const auto& s = r.csr_series;
      if (s.empty()) continue;
      const auto& v = t < static_cast<int>(s.size()) ? s[t] : s.back();
      if (v) vals.push_back(*v);
    }
    if (vals.empty())
      agg.csr_band.emplace_back(std::nullopt);
    else
      agg.csr_band.emplace_back(mean_ci(vals));
  }

  for (const auto& r : reports) {
    agg.dsl_pooled.insert(agg.dsl_pooled.end(), r.dsl_values.begin(),
                          r.dsl_values.end());
    agg.itl_values.push_back(r.itl_value);
  }
  // pooled distributions are multisets; sorting makes the aggregate
  // independent of episode order
  std::sort(agg.dsl_pooled.begin(), agg.dsl_pooled.end());
  std::sort(agg.itl_values.begin(), agg.itl_values.end());
  return agg;
}

struct BatchResult {
  std::vector<EpisodeTrace> traces;  // filled only when keep_traces
  std::vector<metrics::MetricReport> reports;
  AggregateReport aggregate;
};

inline BatchResult run_batch(const BatchSpec& spec, int jobs = 1,
                             bool keep_traces = false) {
  spec.validate();
  BatchResult result;
  result.reports.resize(spec.episodes);
  if (keep_traces) result.traces.resize(spec.episodes);
  detail::run_indexed(spec.episodes, jobs, [&](int i) {
    EpisodeConfig cfg = spec.episode_config(i);
    try {
      EpisodeTrace tr = run_episode(cfg);
      result.reports[i] = metrics::compute_report(tr);
      if (keep_traces) result.traces[i] = std::move(tr);
    } catch (const std::exception& e) {
      throw RuntimeError("episode " + std::to_string(i) + " (seed " +
                         std::to_string(cfg.master_seed) + ") failed: " +
                         e.what());
    }
  });
  result.aggregate = aggregate_reports(result.reports, spec.base.horizon);
  return result;
}

// ---------------------------------------------------------------------------
// epsilon sweep

struct SweepPoint {
  double epsilon = 0.0;
  Stat value;
  int n = 0;
};

struct SweepResult {
  Team corrupted = Team::Scout;
  std::string metric;
  std::vector<SweepPoint> points;
  metrics::LinearFit fit;
  std::optional<metrics::SegmentedFit> segmented;

  std::string to_csv() const {
    auto num = [](double v) { return ordered_json(v).dump(); };
    std::string out = "epsilon,mean,ci,n\n";
    for (const auto& p : points)
      out += num(p.epsilon) + ',' + num(p.value.mean) + ',' + num(p.value.ci) +
             ',' + std::to_string(p.n) + '\n';
    return out;
  }

  ordered_json fit_json() const {
    ordered_json j;
    j["corrupted_team"] = std::string(team_name(corrupted));
    j["metric"] = metric;
    j["slope"] = fit.slope;
    j["intercept"] = fit.intercept;
    j["r2"] = fit.r2;
    if (segmented) {
      j["segmented"] = {{"breakpoint", segmented->breakpoint},
                        {"slope_left", segmented->left.slope},
                        {"slope_right", segmented->right.slope},
                        {"sse", segmented->sse}};
    } else {
      j["segmented"] = nullptr;
    }
    return j;
  }
};

inline std::vector<double> default_epsilon_grid() {
  std::vector<double> grid;
  for (int k = 0; k <= 20; ++k) grid.push_back(k * 0.05);
  return grid;
}

struct SweepSpec {
  BatchSpec batch;
  Team corrupted_team = Team::Scout;
  std::vector<double> grid = default_epsilon_grid();
  std::string metric = "pta_c_final";

  void validate() const {
    batch.validate();
    if (grid.size() < 2)
      throw ConfigError("epsilon grid needs at least 2 points for a slope");
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (grid[k] < 0.0 || grid[k] > 1.0)
        throw ConfigError("epsilon grid values must lie in [0,1]");
      if (k > 0 && grid[k] <= grid[k - 1])
        throw ConfigError("epsilon grid must be strictly increasing");
    }
  }
};

// Fits the degradation curve; shared by the simulation path and synthetic
// curve checks.
inline SweepResult fit_curve(std::vector<SweepPoint> points, Team corrupted,
                             const std::string& metric) {
  SweepResult r;
  r.corrupted = corrupted;
  r.metric = metric;
  r.points = std::move(points);
  std::vector<std::pair<double, double>> xy;
  xy.reserve(r.points.size());
  for (const auto& p : r.points) xy.emplace_back(p.epsilon, p.value.mean);
  r.fit = metrics::sensitivity_slope(xy);
  if (xy.size() >= 4) r.segmented = metrics::segmented_slope(xy);
  return r;
}

// Corruption streams are keyed by (episode seed, agent id) only — never by
// epsilon — so moving along the grid flips a growing superset of the same
// decision points, and compared algorithms face identical corruption draws.
inline SweepResult epsilon_sweep(const SweepSpec& spec, int jobs = 1) {
  spec.validate();
  std::vector<SweepPoint> points;
  points.reserve(spec.grid.size());
  for (double eps : spec.grid) {
    BatchSpec bs = spec.batch;
    if (spec.corrupted_team == Team::Scout)
      bs.base.eps_scouts = eps;
    else
      bs.base.eps_foragers = eps;
    BatchResult br = run_batch(bs, jobs);
    std::vector<double> vals;
    vals.reserve(br.reports.size());
    for (const auto& rep : br.reports)
      vals.push_back(metrics::scalar_metric(rep, spec.metric));
    points.push_back({eps, mean_ci(vals), static_cast<int>(vals.size())});
  }
  return fit_curve(std::move(points), spec.corrupted_team, spec.metric);
}

// ---------------------------------------------------------------------------
// team ablations and marginal contribution

struct AblationRow {
  std::string setup;
  Stat pta_d, pta_c, rmse;
};

struct AblationResult {
  std::vector<AblationRow> rows;  // complete, scout-ablated, forager-ablated
  struct McRow {
    std::string role;
    double pta_d = 0, pta_c = 0, rmse = 0;
  };
  std::vector<McRow> mc;

  std::string rows_csv() const {
    auto num = [](double v) { return ordered_json(v).dump(); };
    std::string out =
        "setup,pta_d_mean,pta_d_ci,pta_c_mean,pta_c_ci,rmse_mean,rmse_ci\n";
    for (const auto& r : rows)
      out += r.setup + ',' + num(r.pta_d.mean) + ',' + num(r.pta_d.ci) + ',' +
             num(r.pta_c.mean) + ',' + num(r.pta_c.ci) + ',' +
             num(r.rmse.mean) + ',' + num(r.rmse.ci) + '\n';
    return out;
  }

  std::string mc_csv() const {
    auto num = [](double v) { return ordered_json(v).dump(); };
    std::string out = "removed_role,mc_pta_d,mc_pta_c,mc_rmse\n";
    for (const auto& r : mc)
      out += r.role + ',' + num(r.pta_d) + ',' + num(r.pta_c) + ',' +
             num(r.rmse) + '\n';
    return out;
  }
};

inline std::string setup_label(const TeamConfig& teams) {
  return std::to_string(teams.scouts.count) + "S-" +
         std::to_string(teams.foragers.count) + "F";
}

// Runs the complete and both one-agent-removed configurations over shared
// seeds, then derives the role-level marginal contributions from the batch
// means (PTA: higher is better, RMSE: lower is better).
inline AblationResult ablation_study(const BatchSpec& spec, int jobs = 1) {
  spec.validate();
  auto stat_of = [](const BatchResult& br, const std::string& name) {
    const Stat* s = br.aggregate.find_scalar(name);
    return s ? *s : Stat{};
  };

  std::vector<TeamConfig> setups;
  setups.push_back(spec.base.teams);
  TeamConfig scout_ablated = spec.base.teams;
  scout_ablated.scouts.count = std::max(0, scout_ablated.scouts.count - 1);
  setups.push_back(scout_ablated);
  TeamConfig forager_ablated = spec.base.teams;
  forager_ablated.foragers.count =
      std::max(0, forager_ablated.foragers.count - 1);
  setups.push_back(forager_ablated);

  AblationResult result;
  std::vector<std::array<double, 3>> means;  // pta_d, pta_c, rmse per setup
  for (const auto& teams : setups) {
    BatchSpec bs = spec;
    bs.base.teams = teams;
    BatchResult br = run_batch(bs, jobs);
    AblationRow row;
    row.setup = setup_label(teams);
    row.pta_d = stat_of(br, "pta_d_final");
    row.pta_c = stat_of(br, "pta_c_final");
    row.rmse = stat_of(br, "rmse_final");
    means.push_back({row.pta_d.mean, row.pta_c.mean, row.rmse.mean});
    result.rows.push_back(std::move(row));
  }

  for (int k = 1; k <= 2; ++k) {
    AblationResult::McRow row;
    row.role = k == 1 ? "scout" : "forager";
    row.pta_d = metrics::marginal_contribution(means[0][0], means[k][0], true);
    row.pta_c = metrics::marginal_contribution(means[0][1], means[k][1], true);
    row.rmse = metrics::marginal_contribution(means[0][2], means[k][2], false);
    result.mc.push_back(row);
  }
  return result;
}

}  // namespace forage::experiments
