#include "hrmix/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hrmix/bundle.hpp"
#include "hrmix/config.hpp"
#include "hrmix/error.hpp"

namespace hrmix {
namespace {

namespace fs = std::filesystem;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

// five-stop blue-green-yellow ramp
std::string colour(double t) {
  static constexpr std::array<std::array<double, 3>, 5> stops{{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};
  if (std::isnan(t)) return "#bbbbbb";
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const auto k = std::min<std::size_t>(3, static_cast<std::size_t>(t));
  const double f = t - static_cast<double>(k);
  std::array<int, 3> rgb{};
  for (int c = 0; c < 3; ++c)
    rgb[static_cast<std::size_t>(c)] =
        static_cast<int>(std::lround(stops[k][static_cast<std::size_t>(c)] * (1 - f) +
                                     stops[k + 1][static_cast<std::size_t>(c)] * f));
  return fmt::format("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2]);
}

std::pair<double, double> finite_range(const std::vector<double>& v) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double x : v)
    if (std::isfinite(x)) {
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
  return {lo, hi};
}

double scale01(double x, double lo, double hi) {
  if (!std::isfinite(x)) return kNaN;
  return hi > lo ? (x - lo) / (hi - lo) : 0.5;
}

std::string legend(double lo, double hi, double x, double y) {
  if (!(lo <= hi)) return {};
  std::string out;
  for (int k = 0; k < 10; ++k)
    out += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="12" height="10" fill="{}"/>)" "\n",
                       x + 12.0 * k, y, colour(k / 9.0));
  out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10">{:.4g}</text>)" "\n", x, y + 22, lo);
  out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10" text-anchor="end">{:.4g}</text>)" "\n",
                     x + 120, y + 22, hi);
  return out;
}

std::string window_key(int cluster, std::size_t window) { return fmt::format("c{:03d}_w{:02d}", cluster, window); }

}  // namespace

std::vector<double> nadaraya_watson(std::span<const double> x, std::span<const double> y,
                                    std::span<const double> grid, double bandwidth) {
  if (x.size() != y.size()) throw Error(ErrorKind::Domain, "x and y lengths differ");
  if (!(bandwidth > 0.0)) throw Error(ErrorKind::Domain, "bandwidth must be positive");
  std::vector<double> out;
  out.reserve(grid.size());
  for (double g : grid) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (!std::isfinite(y[k])) continue;
      const double z = (x[k] - g) / bandwidth;
      const double w = std::exp(-0.5 * z * z);
      num += w * y[k];
      den += w;
    }
    out.push_back(den > 0.0 ? num / den : kNaN);
  }
  return out;
}

std::vector<ChiDistanceRow> chi_distance_rows(const ClusterWindowFit& fit, double q) {
  std::vector<ChiDistanceRow> rows;
  const std::size_t n = fit.site_info.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      ChiDistanceRow r;
      r.cluster = fit.cluster;
      r.window = fit.window.index;
      r.site_i = fit.site_info[i].id;
      r.site_j = fit.site_info[j].id;
      r.distance_km = geodesic_km(fit.site_info[i].lon, fit.site_info[i].lat, fit.site_info[j].lon,
                                  fit.site_info[j].lat);
      r.chi_empirical = kNaN;
      if (!fit.pareto.empty())
        if (auto chi = empirical_chi(fit.pareto[i], fit.pareto[j], q)) r.chi_empirical = *chi;
      r.chi_model = fit.marginal_only
                        ? kNaN
                        : chi_mixture(fit.model, static_cast<int>(i), static_cast<int>(j), fit.model.a_opt);
      rows.push_back(std::move(r));
    }
  return rows;
}

std::string svg_heatmap(const std::string& title, const Eigen::MatrixXd& values,
                        const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels) {
  constexpr double cell = 24.0, left = 110.0, top = 40.0;
  const double width = left + cell * static_cast<double>(values.cols()) + 20.0;
  const double height = top + cell * static_cast<double>(values.rows()) + 110.0;
  std::vector<double> flat(values.data(), values.data() + values.size());
  const auto [lo, hi] = finite_range(flat);
  std::string out = fmt::format(
      R"(<?xml version="1.0" encoding="UTF-8"?>)" "\n"
      R"(<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{0:.0f}" height="{1:.0f}" viewBox="0 0 {0:.0f} {1:.0f}">)" "\n"
      R"(<title>{2}</title>)" "\n"
      R"(<text x="10" y="20" font-size="14">{2}</text>)" "\n",
      std::max(width, 200.0), height, xml_escape(title));
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    const double y = top + cell * static_cast<double>(r);
    if (static_cast<std::size_t>(r) < row_labels.size())
      out += fmt::format(R"(<text x="{:.1f}" y="{:.1f}" font-size="10" text-anchor="end">{}</text>)" "\n",
                         left - 4, y + cell * 0.65, xml_escape(row_labels[static_cast<std::size_t>(r)]));
    for (Eigen::Index c = 0; c < values.cols(); ++c)
      out += fmt::format(R"(<rect x="{:.1f}" y="{:.1f}" width="{:.1f}" height="{:.1f}" fill="{}"/>)" "\n",
                         left + cell * static_cast<double>(c), y, cell, cell, colour(scale01(values(r, c), lo, hi)));
  }
  const double label_y = top + cell * static_cast<double>(values.rows()) + 6;
  for (std::size_t c = 0; c < col_labels.size() && c < static_cast<std::size_t>(values.cols()); ++c) {
    const double x = left + cell * (static_cast<double>(c) + 0.5);
    out += fmt::format(
        R"svg(<text x="{0:.1f}" y="{1:.1f}" font-size="9" transform="rotate(60 {0:.1f} {1:.1f})">{2}</text>)svg" "\n", x,
        label_y, xml_escape(col_labels[c]));
  }
  out += legend(lo, hi, 10, height - 36);
  out += "</svg>\n";
  return out;
}

std::string svg_site_map(const std::string& title, const std::vector<Site>& sites, const std::vector<double>& values) {
  constexpr double plot = 400.0, pad = 40.0;
  double lon_lo = 0, lon_hi = 1, lat_lo = 0, lat_hi = 1;
  double spacing = 1.0;
  if (!sites.empty()) {
    std::vector<double> lons, lats;
    for (const auto& s : sites) {
      lons.push_back(s.lon);
      lats.push_back(s.lat);
    }
    std::tie(lon_lo, lon_hi) = finite_range(lons);
    std::tie(lat_lo, lat_hi) = finite_range(lats);
    spacing = std::numeric_limits<double>::infinity();
    for (auto* v : {&lons, &lats}) {
      std::sort(v->begin(), v->end());
      for (std::size_t k = 1; k < v->size(); ++k)
        if ((*v)[k] - (*v)[k - 1] > 1e-9) spacing = std::min(spacing, (*v)[k] - (*v)[k - 1]);
    }
    if (!std::isfinite(spacing)) spacing = 1.0;
  }
  const double span = std::max({lon_hi - lon_lo, lat_hi - lat_lo, spacing});
  const double scale = plot / (span + spacing);
  const double side = std::max(1.0, spacing * scale);
  const auto [lo, hi] = finite_range(values);
  std::string out = fmt::format(
      R"(<?xml version="1.0" encoding="UTF-8"?>)" "\n"
      R"(<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{0:.0f}" height="{1:.0f}" viewBox="0 0 {0:.0f} {1:.0f}">)" "\n"
      R"(<title>{2}</title>)" "\n"
      R"(<text x="10" y="20" font-size="14">{2}</text>)" "\n",
      plot + 2 * pad, plot + 2 * pad + 40, xml_escape(title));
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const double x = pad + (sites[i].lon - lon_lo) * scale;
    const double y = pad + plot - (sites[i].lat - lat_lo) * scale - side;
    const double v = i < values.size() ? values[i] : kNaN;
    out += fmt::format(R"(<rect x="{:.2f}" y="{:.2f}" width="{:.2f}" height="{:.2f}" fill="{}"><title>{} {}</title></rect>)" "\n",
                       x, y, side, side, colour(scale01(v, lo, hi)), xml_escape(sites[i].id), format_number(v));
  }
  out += legend(lo, hi, 10, plot + 2 * pad + 4);
  out += "</svg>\n";
  return out;
}

OutputWriter::OutputWriter(std::string out_dir) : dir_(std::move(out_dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create output directory " + dir_ + ": " + ec.message());
}

void OutputWriter::write(const std::string& name, const std::string& content) {
  const fs::path path = fs::path(dir_) / name;
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + path.parent_path().string());
  std::ofstream out(path, std::ios::binary);
  out << content;
  out.close();
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  files_.emplace_back(name, fnv1a64(content));
}

void emit_outputs(const PipelineResult& result, const GriddedDataset& data, const OutputSelection& select,
                  OutputWriter& writer) {
  {
    std::string csv = "site_id,lon,lat,cluster\n";
    for (std::size_t i = 0; i < data.sites.size() && i < result.clusters.labels.size(); ++i)
      csv += fmt::format("{},{},{},{}\n", data.sites[i].id, format_number(data.sites[i].lon),
                         format_number(data.sites[i].lat), result.clusters.labels[i]);
    writer.write("clusters.csv", csv);
    std::string win = "window,first_season,last_season,label\n";
    for (const auto& w : result.windows)
      win += fmt::format("{},{},{},{}\n", w.index, w.first_season, w.last_season, w.label());
    writer.write("windows.csv", win);
  }

  if (select.margins) {
    std::string csv = "cluster,window,site_id,lon,lat,threshold,zeta,sigma,xi\n";
    std::vector<double> xi_first(data.site_count(), kNaN);
    for (const auto& fit : result.fits)
      for (std::size_t k = 0; k < fit.margins.size(); ++k) {
        const auto& m = fit.margins[k];
        const auto& s = fit.site_info[k];
        csv += fmt::format("{},{},{},{},{},{},{},{},{}\n", fit.cluster, fit.window.index, s.id, format_number(s.lon),
                           format_number(s.lat), format_number(m.threshold()), format_number(m.zeta()),
                           format_number(m.gpd().sigma), format_number(m.gpd().xi));
        if (fit.window.index == 0) xi_first[fit.sites[k]] = m.gpd().xi;
      }
    writer.write("margins.csv", csv);
    writer.write("map_xi.svg", svg_site_map("GP shape, first window", data.sites, xi_first));
  }

  if (select.bundles)
    for (const auto& fit : result.fits)
      for (const auto& [name, content] : bundle_files(fit))
        writer.write("bundles/" + window_key(fit.cluster, fit.window.index) + "/" + name, content);

  if (select.chi) {
    std::string raw = "cluster,window,site_i,site_j,distance_km,chi_empirical,chi_model\n";
    std::string smooth = "cluster,window,distance_km,chi_empirical,chi_model\n";
    const std::size_t points = result.config.chi_curve_points;
    Eigen::MatrixXd curves = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(result.fits.size()),
                                                       static_cast<Eigen::Index>(points), kNaN);
    std::vector<std::string> labels;
    for (std::size_t f = 0; f < result.fits.size(); ++f) {
      const auto& fit = result.fits[f];
      labels.push_back(fmt::format("c{} {}", fit.cluster, fit.window.label()));
      const auto rows = chi_distance_rows(fit, result.config.chi_quantile);
      std::vector<double> d, emp, mod;
      for (const auto& r : rows) {
        raw += fmt::format("{},{},{},{},{},{},{}\n", r.cluster, r.window, r.site_i, r.site_j,
                           format_number(r.distance_km), format_number(r.chi_empirical), format_number(r.chi_model));
        d.push_back(r.distance_km);
        emp.push_back(r.chi_empirical);
        mod.push_back(r.chi_model);
      }
      if (d.empty()) continue;
      const double max_d = *std::max_element(d.begin(), d.end());
      if (!(max_d > 0.0)) continue;
      std::vector<double> grid(points);
      for (std::size_t k = 0; k < points; ++k) grid[k] = max_d * static_cast<double>(k) / static_cast<double>(points - 1);
      const auto se = nadaraya_watson(d, emp, grid, 0.2 * max_d);
      const auto sm = nadaraya_watson(d, mod, grid, 0.2 * max_d);
      for (std::size_t k = 0; k < points; ++k) {
        smooth += fmt::format("{},{},{},{},{}\n", fit.cluster, fit.window.index, format_number(grid[k]),
                              format_number(se[k]), format_number(sm[k]));
        curves(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = se[k];
      }
    }
    writer.write("chi_distance.csv", raw);
    writer.write("chi_smoothed.csv", smooth);
    std::vector<std::string> cols;
    for (std::size_t k = 0; k < points; ++k) cols.push_back(fmt::format("{}", k));
    writer.write("chi_curves.svg", svg_heatmap("Smoothed empirical chi by distance bin", curves, labels, cols));
  }

  if (select.risk) {
    std::string csv = "cluster,window,window_label,risk,std_error,samples,seed\n";
    const auto k = static_cast<Eigen::Index>(result.clusters.k);
    const auto w = static_cast<Eigen::Index>(result.windows.size());
    Eigen::MatrixXd grid = Eigen::MatrixXd::Constant(k, w, kNaN);
    for (const auto& r : result.risks) {
      csv += fmt::format("{},{},{},{},{},{},{}\n", r.cluster, r.window, result.windows.at(r.window).label(),
                         format_number(r.risk), format_number(r.std_error), r.samples, r.seed);
      grid(r.cluster, static_cast<Eigen::Index>(r.window)) = r.risk;
    }
    writer.write("risk.csv", csv);
    std::vector<std::string> rows, cols;
    for (Eigen::Index c = 0; c < k; ++c) rows.push_back(fmt::format("cluster {}", c));
    for (const auto& win : result.windows) cols.push_back(win.label());
    writer.write("risk_heatmap.svg", svg_heatmap("Cluster aggregated risk", grid, rows, cols));
  }

  if (select.trends) {
    std::string csv = "site_id,lon,lat,slope,intercept,p_value,p_defined,seasons\n";
    std::vector<double> slopes(data.site_count(), kNaN);
    for (std::size_t i = 0; i < result.trends.size(); ++i) {
      const auto& s = data.sites[i];
      if (!result.trends[i]) {
        csv += fmt::format("{},{},{},,,,false,0\n", s.id, format_number(s.lon), format_number(s.lat));
        continue;
      }
      const auto& t = *result.trends[i];
      slopes[i] = t.slope;
      csv += fmt::format("{},{},{},{},{},{},{},{}\n", s.id, format_number(s.lon), format_number(s.lat),
                         format_number(t.slope), format_number(t.intercept), format_number(t.p_value),
                         t.p_defined ? "true" : "false", t.seasons);
    }
    writer.write("trend.csv", csv);
    writer.write("map_trend.svg", svg_site_map("Upper-quantile trend per season", data.sites, slopes));
  }
}

void write_manifest(OutputWriter& writer, const RunInfo& info,
                    const std::vector<std::pair<std::string, std::string>>& extra) {
  nlohmann::ordered_json m;
  m["tool"] = "hrmix";
  m["version"] = "0.1.0";
  m["command"] = info.command;
  m["seed"] = info.seed;
  m["config_hash"] = hex64(fnv1a64(info.config_text));
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  std::istringstream lines(info.config_text);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) cfg[line.substr(0, eq)] = line.substr(eq + 3);
  }
  m["config"] = cfg;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  if (!info.input_name.empty())
    inputs.push_back({{"name", info.input_name}, {"fnv1a64", hex64(info.input_hash)}});
  m["inputs"] = inputs;
  for (const auto& [k, v] : extra) m[k] = v;
  nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
  for (const auto& [name, hash] : writer.files()) outputs.push_back({{"file", name}, {"fnv1a64", hex64(hash)}});
  m["outputs"] = outputs;
  writer.write("manifest.json", m.dump(2) + "\n");
}

}  // namespace hrmix
