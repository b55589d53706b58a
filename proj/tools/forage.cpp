// Command-line front end: scenario execution, offline metric computation,
// corruption sweeps, team ablations and SVG plots.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid input/usage.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "forage/engine.hpp"
#include "forage/error.hpp"
#include "forage/experiments.hpp"
#include "forage/metrics.hpp"
#include "forage/scenario.hpp"
#include "forage/svg_plot.hpp"
#include "forage/trace.hpp"

namespace fs = std::filesystem;
using namespace forage;

namespace {

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write file: " + path.string());
  out << content;
}

std::string index_name(const char* stem, int i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%03d.%s", stem, i, ext);
  return buf;
}

std::uint64_t resolve_seed(const Scenario& scenario,
                           std::optional<std::uint64_t> cli_seed) {
  if (cli_seed) return *cli_seed;
  if (const char* env = std::getenv("FORAGE_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError("FORAGE_SEED: not a valid unsigned integer");
    }
  }
  return scenario.seed;
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> grid;
  try {
    if (text.find(':') != std::string::npos) {
      // start:step:end
      auto a = text.find(':');
      auto b = text.find(':', a + 1);
      if (b == std::string::npos) throw ConfigError("");
      double start = std::stod(text.substr(0, a));
      double step = std::stod(text.substr(a + 1, b - a - 1));
      double end = std::stod(text.substr(b + 1));
      if (step <= 0) throw ConfigError("");
      for (double v = start; v <= end + step * 1e-9; v += step)
        grid.push_back(std::min(v, end));
    } else {
      std::size_t pos = 0;
      while (pos < text.size()) {
        auto comma = text.find(',', pos);
        std::string tok = text.substr(
            pos, comma == std::string::npos ? std::string::npos : comma - pos);
        grid.push_back(std::stod(tok));
        pos = comma == std::string::npos ? text.size() : comma + 1;
      }
    }
  } catch (const std::exception&) {
    throw ConfigError("--grid: expected start:step:end or comma-separated "
                      "values, got '" + text + "'");
  }
  return grid;
}

void write_episode_outputs(const fs::path& out,
                           const std::vector<metrics::MetricReport>& reports,
                           const experiments::AggregateReport& aggregate) {
  for (std::size_t i = 0; i < reports.size(); ++i) {
    write_text(out / index_name("report", static_cast<int>(i), "json"),
               reports[i].to_json().dump() + "\n");
    write_text(out / index_name("series", static_cast<int>(i), "csv"),
               reports[i].to_series_csv());
  }
  write_text(out / "report.json", aggregate.to_json().dump() + "\n");
  std::string scalars = metrics::MetricReport::scalars_csv_header();
  for (const auto& r : reports) scalars += r.scalars_csv_row();
  write_text(out / "scalars.csv", scalars);
  write_text(out / "series.csv", aggregate.to_series_csv());
}

int cmd_run(const std::string& scenario_path,
            std::optional<std::uint64_t> cli_seed, std::optional<int> episodes,
            std::optional<std::string> out_dir, int jobs) {
  Scenario scenario = load_scenario(scenario_path);
  experiments::BatchSpec spec;
  spec.base = scenario.episode_config();
  spec.base.master_seed = resolve_seed(scenario, cli_seed);
  spec.episodes = episodes.value_or(scenario.episodes);

  fs::path out = out_dir.value_or(scenario.output_dir);
  fs::create_directories(out);

  auto result = experiments::run_batch(spec, jobs, /*keep_traces=*/true);
  for (std::size_t i = 0; i < result.traces.size(); ++i)
    result.traces[i].write_file(
        (out / index_name("trace", static_cast<int>(i), "jsonl")).string());
  write_episode_outputs(out, result.reports, result.aggregate);
  std::printf("ran %d episode(s), outputs in %s\n", spec.episodes,
              out.string().c_str());
  return 0;
}

int cmd_metrics(const std::vector<std::string>& trace_paths,
                const std::string& out_dir) {
  if (trace_paths.empty()) throw ConfigError("metrics: no trace files given");
  fs::path out = out_dir;
  fs::create_directories(out);

  std::vector<metrics::MetricReport> reports;
  int horizon = -1;
  for (const auto& path : trace_paths) {
    EpisodeTrace tr = EpisodeTrace::load(path);
    metrics::check_trace_consistency(tr);
    if (horizon < 0)
      horizon = tr.header.horizon;
    else if (horizon != tr.header.horizon)
      throw ConfigError("metrics: traces have mixed horizons");
    reports.push_back(metrics::compute_report(tr));
  }
  auto aggregate = experiments::aggregate_reports(reports, horizon);
  write_episode_outputs(out, reports, aggregate);
  std::printf("computed metrics for %zu trace(s), outputs in %s\n",
              reports.size(), out.string().c_str());
  return 0;
}

ordered_json sweep_json(const experiments::SweepResult& result,
                        const std::string& algorithm) {
  ordered_json j;
  j["algorithm"] = algorithm;
  ordered_json pts = ordered_json::array();
  for (const auto& p : result.points)
    pts.push_back({{"epsilon", p.epsilon},
                   {"mean", p.value.mean},
                   {"ci", p.value.ci},
                   {"n", p.n}});
  j["points"] = pts;
  j["fit"] = result.fit_json();
  return j;
}

int cmd_sweep(const std::string& scenario_path, const std::string& team,
              const std::string& metric, const std::string& grid_text,
              std::optional<std::uint64_t> cli_seed, std::optional<int> episodes,
              std::optional<std::string> out_dir, int jobs) {
  Scenario scenario = load_scenario(scenario_path);
  experiments::SweepSpec spec;
  spec.batch.base = scenario.episode_config();
  spec.batch.base.master_seed = resolve_seed(scenario, cli_seed);
  spec.batch.episodes = episodes.value_or(scenario.episodes);
  spec.corrupted_team = team == "scouts" ? Team::Scout : Team::Forager;
  spec.metric = metric;
  if (!grid_text.empty()) spec.grid = parse_grid(grid_text);

  fs::path out = out_dir.value_or(scenario.output_dir);
  fs::create_directories(out);

  auto result = experiments::epsilon_sweep(spec, jobs);
  write_text(out / "sweep.csv", result.to_csv());
  write_text(out / "sweep.json",
             sweep_json(result, spec.batch.base.label()).dump() + "\n");
  std::printf("sweep of %zu epsilon value(s): slope %.6g, outputs in %s\n",
              result.points.size(), result.fit.slope, out.string().c_str());
  return 0;
}

int cmd_ablate(const std::string& scenario_path,
               std::optional<std::uint64_t> cli_seed, std::optional<int> episodes,
               std::optional<std::string> out_dir, int jobs) {
  Scenario scenario = load_scenario(scenario_path);
  experiments::BatchSpec spec;
  spec.base = scenario.episode_config();
  spec.base.master_seed = resolve_seed(scenario, cli_seed);
  spec.episodes = episodes.value_or(scenario.episodes);

  fs::path out = out_dir.value_or(scenario.output_dir);
  fs::create_directories(out);

  auto result = experiments::ablation_study(spec, jobs);
  write_text(out / "ablation.csv", result.rows_csv());
  write_text(out / "mc.csv", result.mc_csv());
  std::printf("ablation over %zu setup(s), outputs in %s\n",
              result.rows.size(), out.string().c_str());
  return 0;
}

std::vector<double> normalized_time(int horizon) {
  std::vector<double> x(horizon);
  for (int t = 0; t < horizon; ++t)
    x[t] = horizon > 1 ? static_cast<double>(t) / (horizon - 1) : 0.0;
  return x;
}

svg::Curve series_curve(const experiments::AggregateReport& rep,
                        const std::string& name) {
  const auto* band = rep.find_series(name);
  if (!band || band->mean.empty())
    throw ConfigError("plot: report for '" + rep.algorithm +
                      "' has no series '" + name + "'");
  svg::Curve c;
  c.label = rep.algorithm;
  c.x = normalized_time(rep.horizon);
  c.y = band->mean;
  c.ci = band->ci;
  return c;
}

svg::Panel series_panel(const std::vector<experiments::AggregateReport>& reps,
                        const std::string& name, const std::string& title,
                        const std::string& y_label) {
  svg::Panel p;
  p.title = title;
  p.x_label = "normalized time";
  p.y_label = y_label;
  for (const auto& r : reps) p.curves.push_back(series_curve(r, name));
  p.y_min_hint = 0.0;
  return p;
}

int cmd_plot(const std::vector<std::string>& report_paths,
             const std::string& kind, const std::string& out_path) {
  if (report_paths.empty()) throw ConfigError("plot: no report files given");
  std::vector<svg::Panel> panels;

  if (kind == "sweep") {
    svg::Panel p;
    p.title = "performance vs corruption";
    p.x_label = "epsilon";
    p.y_label = "metric";
    for (const auto& path : report_paths) {
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot open report: " + path);
      svg::Curve c;
      try {
        ordered_json j = ordered_json::parse(in);
        c.label = j.at("algorithm").get<std::string>();
        for (const auto& pt : j.at("points")) {
          c.x.push_back(pt.at("epsilon").get<double>());
          c.y.push_back(pt.at("mean").get<double>());
          c.ci.push_back(pt.at("ci").get<double>());
        }
      } catch (const std::exception& e) {
        throw ConfigError("plot: " + path + " is not a sweep report: " +
                          e.what());
      }
      if (c.x.empty()) throw ConfigError("plot: sweep has no points: " + path);
      p.curves.push_back(std::move(c));
    }
    panels.push_back(std::move(p));
  } else {
    std::vector<experiments::AggregateReport> reps;
    for (const auto& path : report_paths) {
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot open report: " + path);
      try {
        reps.push_back(
            experiments::AggregateReport::from_json(ordered_json::parse(in)));
      } catch (const std::exception& e) {
        throw ConfigError("plot: " + path + " is not an aggregate report: " +
                          e.what());
      }
    }
    if (kind == "pta") {
      panels.push_back(series_panel(reps, "pta_d", "discovery", "PTA_D (%)"));
      panels.push_back(series_panel(reps, "pta_c", "collection", "PTA_C (%)"));
    } else if (kind == "rmse") {
      panels.push_back(series_panel(reps, "rmse", "model error", "RMSE"));
    } else if (kind == "idleness") {
      panels.push_back(series_panel(reps, "mi", "mean idleness", "MI"));
      panels.push_back(series_panel(reps, "irr", "idleness reduction", "IRR"));
    } else if (kind == "gini") {
      panels.push_back(
          series_panel(reps, "gini", "forager workload inequality", "Gini"));
    } else if (kind == "co") {
      panels.push_back(
          series_panel(reps, "co", "scout coverage overlap", "CO"));
    } else if (kind == "csr") {
      svg::Panel p;
      p.title = "cooperative success ratio";
      p.x_label = "normalized time";
      p.y_label = "CSR";
      p.y_min_hint = 0.0;
      p.y_max_hint = 1.0;
      for (const auto& r : reps) {
        svg::Curve c;
        c.label = r.algorithm;
        c.x = normalized_time(r.horizon);
        for (const auto& st : r.csr_band) {
          c.defined.push_back(st.has_value());
          c.y.push_back(st ? st->mean : 0.0);
          c.ci.push_back(st ? st->ci : 0.0);
        }
        if (c.y.empty())
          throw ConfigError("plot: report for '" + r.algorithm +
                            "' has an empty csr series");
        p.curves.push_back(std::move(c));
      }
      panels.push_back(std::move(p));
    } else if (kind == "violin") {
      svg::Panel dsl_panel, itl_panel;
      dsl_panel.title = "discovery-to-service latency";
      dsl_panel.y_label = "DSL";
      itl_panel.title = "inter-team temporal lag";
      itl_panel.y_label = "ITL";
      for (const auto& r : reps) {
        dsl_panel.violins.push_back({r.algorithm, r.dsl_pooled});
        itl_panel.violins.push_back({r.algorithm, r.itl_values});
      }
      panels.push_back(std::move(dsl_panel));
      panels.push_back(std::move(itl_panel));
    } else {
      throw ConfigError("plot: unknown kind '" + kind + "'");
    }
  }
  write_text(out_path, svg::render(panels));
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"heterogeneous scout/forager foraging simulator and "
               "cooperation-metric toolkit"};
  app.require_subcommand(1);

  std::string scenario_path, team, metric = "pta_c_final", grid_text;
  std::string kind, plot_out;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<std::string> out_dir;
  std::string metrics_out = "out";
  std::vector<std::string> trace_paths, report_paths;
  int jobs = static_cast<int>(std::thread::hardware_concurrency());
  if (jobs < 1) jobs = 1;

  auto add_common = [&](CLI::App* cmd, bool with_scenario = true) {
    if (with_scenario)
      cmd->add_option("scenario", scenario_path, "scenario JSON file")
          ->required();
    cmd->add_option("--seed", seed, "master seed override");
    cmd->add_option("--episodes", episodes, "episode count override");
    cmd->add_option("--out", out_dir, "output directory");
    cmd->add_option("--jobs", jobs, "parallel episode workers");
  };

  CLI::App* run = app.add_subcommand("run", "run a seeded episode batch");
  add_common(run);

  CLI::App* met =
      app.add_subcommand("metrics", "recompute metrics from trace files");
  met->add_option("--trace", trace_paths, "trace files (JSONL, optionally gzip)")
      ->required()
      ->expected(-1);
  met->add_option("--out", metrics_out, "output directory");

  CLI::App* sweep =
      app.add_subcommand("sweep", "corruption sweep over one team");
  add_common(sweep);
  sweep->add_option("--team", team, "team to corrupt")
      ->required()
      ->check(CLI::IsMember({"scouts", "foragers"}));
  sweep->add_option("--metric", metric, "observed scalar metric");
  sweep->add_option("--grid", grid_text,
                    "epsilon grid, start:step:end or comma list");

  CLI::App* ablate =
      app.add_subcommand("ablate", "team ablations and marginal contribution");
  add_common(ablate);

  CLI::App* plot = app.add_subcommand("plot", "render SVG charts from reports");
  plot->add_option("--report", report_paths, "report files")
      ->required()
      ->expected(-1);
  plot->add_option("--kind", kind, "chart kind")
      ->required()
      ->check(CLI::IsMember(
          {"pta", "rmse", "idleness", "csr", "gini", "co", "sweep", "violin"}));
  plot->add_option("--out", plot_out, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed())
      return cmd_run(scenario_path, seed, episodes, out_dir, jobs);
    if (met->parsed()) return cmd_metrics(trace_paths, metrics_out);
    if (sweep->parsed())
      return cmd_sweep(scenario_path, team, metric, grid_text, seed, episodes,
                       out_dir, jobs);
    if (ablate->parsed())
      return cmd_ablate(scenario_path, seed, episodes, out_dir, jobs);
    if (plot->parsed()) return cmd_plot(report_paths, kind, plot_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
