// hrmix: batch front end for the tree-mixture extremes pipeline.

#include <fmt/format.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "hrmix/bundle.hpp"
#include "hrmix/config.hpp"
#include "hrmix/dataset.hpp"
#include "hrmix/error.hpp"
#include "hrmix/pipeline.hpp"
#include "hrmix/report.hpp"
#include "hrmix/simulate.hpp"

namespace {

using namespace hrmix;

struct Globals {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir = "hrmix_out";
  std::size_t threads = 1;
};

struct InputOptions {
  std::string path;
  bool thin = false;
};

PipelineConfig make_config(const Globals& g, bool thin_flag) {
  PipelineConfig cfg;
  if (!g.config_path.empty()) cfg = load_config(g.config_path);
  if (g.seed_given) cfg.seed = g.seed;
  if (thin_flag) cfg.thin = true;
  cfg.validate();
  return cfg;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Loaded {
  GriddedDataset data;
  RunInfo info;
};

Loaded load_input(const InputOptions& in, const PipelineConfig& cfg, const std::string& command) {
  const std::string bytes = read_file(in.path);
  std::istringstream stream(bytes);
  Loaded l{read_dataset_csv(stream, {cfg.thin}), {}};
  l.info.command = command;
  l.info.input_name = std::filesystem::path(in.path).filename().string();
  l.info.input_hash = fnv1a64(bytes);
  l.info.seed = cfg.seed;
  l.info.config_text = to_text(cfg);
  return l;
}

int run_pipeline_command(const Globals& g, const InputOptions& in, const std::string& command,
                         OutputSelection select, PipelineStages stages) {
  const auto cfg = make_config(g, in.thin);
  const auto loaded = load_input(in, cfg, command);
  const auto result = run_pipeline(loaded.data, cfg, g.threads, stages);
  OutputWriter writer(g.out_dir);
  emit_outputs(result, loaded.data, select, writer);
  write_manifest(writer, loaded.info,
                 {{"sites", std::to_string(loaded.data.site_count())},
                  {"seasons", std::to_string(result.seasons.seasons.size())},
                  {"windows", std::to_string(result.windows.size())},
                  {"clusters", std::to_string(result.clusters.k)}});
  fmt::print("{}: {} sites, {} seasons, {} windows, {} clusters -> {}\n", command, loaded.data.site_count(),
             result.seasons.seasons.size(), result.windows.size(), result.clusters.k, g.out_dir);
  return 0;
}

int cmd_ingest(const Globals& g, const InputOptions& in) {
  const auto cfg = make_config(g, in.thin);
  const auto loaded = load_input(in, cfg, "ingest");
  const auto seasons = summer_seasons(loaded.data, cfg.drop_partial_seasons);
  std::size_t missing = 0;
  for (const auto& row : loaded.data.values)
    for (double v : row) missing += std::isnan(v);
  OutputWriter writer(g.out_dir);
  std::ostringstream csv;
  write_dataset_csv(loaded.data, csv);
  writer.write("dataset.csv", csv.str());
  write_manifest(writer, loaded.info,
                 {{"sites", std::to_string(loaded.data.site_count())},
                  {"dates", std::to_string(loaded.data.time_count())},
                  {"missing_cells", std::to_string(missing)},
                  {"seasons", std::to_string(seasons.seasons.size())}});
  fmt::print("ingest: {} sites, {} dates, {} missing cells, {} summer seasons\n", loaded.data.site_count(),
             loaded.data.time_count(), missing, seasons.seasons.size());
  return 0;
}

int cmd_margins(const Globals& g, const InputOptions& in) {
  const auto cfg = make_config(g, in.thin);
  const auto loaded = load_input(in, cfg, "margins");
  const auto& d = loaded.data;
  std::vector<double> lon, lat;
  for (const auto& s : d.sites) {
    lon.push_back(s.lon);
    lat.push_back(s.lat);
  }
  std::vector<GpdFit> fits;
  const auto margins = fit_site_margins(d.values, lon, lat, {cfg.threshold_quantile, cfg.neighbors}, &fits);
  OutputWriter writer(g.out_dir);
  writer.write("margins.csv", margins_csv(d.sites, margins));
  writer.write("margin_samples.csv", margin_samples_csv(d.sites, margins));
  std::vector<double> xi, rl;
  std::string levels = "site_id,return_level_100\n";
  for (const auto& m : margins) {
    xi.push_back(m.gpd().xi);
    rl.push_back(m.return_level(std::max(100.0, 2.0 / m.zeta())));
  }
  for (std::size_t i = 0; i < margins.size(); ++i)
    levels += fmt::format("{},{}\n", d.sites[i].id, format_number(rl[i]));
  writer.write("return_levels.csv", levels);
  writer.write("map_xi.svg", svg_site_map("GP shape", d.sites, xi));
  writer.write("map_return_level.svg", svg_site_map("100-observation return level", d.sites, rl));
  write_manifest(writer, loaded.info, {{"sites", std::to_string(d.site_count())}});
  fmt::print("margins: fitted {} sites -> {}\n", margins.size(), g.out_dir);
  return 0;
}

struct SimulateOptions {
  GridSpec grid;
  MarginalSpec margins;
  std::size_t seasons = 12;
  int first_season = 1999;
  double gamma = 1.0;
  bool independent = false;
};

int cmd_simulate(const Globals& g, const SimulateOptions& o) {
  const auto cfg = make_config(g, false);
  DependenceSpec dep;
  if (o.independent)
    dep.independent = true;
  else
    dep = random_tree_dependence(o.grid, o.gamma, derive_seed(cfg.seed, {7}));
  const std::size_t T = summer_days(o.first_season, o.seasons);
  const auto data = generate_synthetic_dataset(o.grid, o.margins, dep, T, derive_seed(cfg.seed, {8}), o.first_season);
  OutputWriter writer(g.out_dir);
  std::ostringstream csv;
  write_dataset_csv(data, csv);
  writer.write("dataset.csv", csv.str());
  if (!o.independent) {
    TreeEnsemble single;
    single.trees.push_back(dep.tree);
    writer.write("generator_tree.csv", trees_csv(single));
    writer.write("generator_gamma.csv", edge_values_csv(dep.gammas, "gamma"));
  }
  RunInfo info{"simulate", "", 0, cfg.seed, to_text(cfg)};
  write_manifest(writer, info,
                 {{"grid", fmt::format("{}x{}", o.grid.nx, o.grid.ny)},
                  {"seasons", std::to_string(o.seasons)},
                  {"first_season", std::to_string(o.first_season)},
                  {"dependence", o.independent ? "independent" : fmt::format("tree gamma={}", o.gamma)},
                  {"gp", fmt::format("sigma={} xi={}", o.margins.gpd.sigma, o.margins.gpd.xi)},
                  {"threshold", format_number(o.margins.threshold)},
                  {"trend", format_number(o.margins.trend)}});
  fmt::print("simulate: {} sites x {} days -> {}\n", data.site_count(), data.time_count(), g.out_dir);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-mixture Husler-Reiss extremes: fitting, simulation and risk reports"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", g.seed, "top-level seed (overrides the config)");
  app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads for cluster/window fits")
      ->check(CLI::Range(std::size_t{1}, std::size_t{256}))
      ->capture_default_str();

  InputOptions in;
  auto add_input = [&](CLI::App* sub) {
    sub->add_option("-i,--input", in.path, "dataset CSV")->required()->check(CLI::ExistingFile);
    sub->add_flag("--thin", in.thin, "keep every second grid cell in each direction");
  };
  auto* ingest = app.add_subcommand("ingest", "validate a dataset CSV and write it in value form");
  add_input(ingest);
  auto* margins = app.add_subcommand("margins", "fit site-wise GP tails over the full record");
  add_input(margins);
  auto* fit = app.add_subcommand("fit", "fit margins and tree mixtures per cluster and window");
  add_input(fit);
  auto* chi = app.add_subcommand("chi", "fit and write chi-versus-distance tables");
  add_input(chi);
  auto* risk = app.add_subcommand("risk", "fit and aggregate cluster risk by simulation");
  add_input(risk);
  auto* report = app.add_subcommand("report", "run every stage and write all tables and figures");
  add_input(report);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "generate a synthetic gridded dataset");
  simulate->add_option("--nx", sim.grid.nx)->capture_default_str();
  simulate->add_option("--ny", sim.grid.ny)->capture_default_str();
  simulate->add_option("--lon0", sim.grid.lon0)->capture_default_str();
  simulate->add_option("--lat0", sim.grid.lat0)->capture_default_str();
  simulate->add_option("--step", sim.grid.step)->capture_default_str();
  simulate->add_option("--seasons", sim.seasons)->capture_default_str();
  simulate->add_option("--first-season", sim.first_season)->capture_default_str();
  simulate->add_option("--gamma", sim.gamma, "edge variogram of the generating tree")->capture_default_str();
  simulate->add_flag("--independent", sim.independent, "independent sites instead of a tree");
  simulate->add_option("--sigma", sim.margins.gpd.sigma)->capture_default_str();
  simulate->add_option("--xi", sim.margins.gpd.xi)->capture_default_str();
  simulate->add_option("--threshold", sim.margins.threshold)->capture_default_str();
  simulate->add_option("--trend", sim.margins.trend, "additive shift per season")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    if (*ingest) return cmd_ingest(g, in);
    if (*margins) return cmd_margins(g, in);
    if (*simulate) return cmd_simulate(g, sim);
    if (*fit) return run_pipeline_command(g, in, "fit", {true, true, false, false, false}, {false, false});
    if (*chi) return run_pipeline_command(g, in, "chi", {false, false, true, false, false}, {false, false});
    if (*risk) return run_pipeline_command(g, in, "risk", {false, false, false, true, false}, {true, false});
    if (*report) return run_pipeline_command(g, in, "report", {}, {});
  } catch (const Error& e) {
    fmt::print(stderr, "hrmix: {} error: {}\n", to_string(e.kind()), e.what());
    return e.is_validation() ? 2 : 1;
  } catch (const std::exception& e) {
    fmt::print(stderr, "hrmix: {}\n", e.what());
    return 1;
  }
  return 1;
}
