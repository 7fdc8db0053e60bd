#include "hrmix/bundle.hpp"

#include <fmt/format.h>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hrmix/dataset.hpp"
#include "hrmix/error.hpp"

namespace hrmix {
namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) {
    while (!f.empty() && (f.back() == '\r' || f.back() == ' ')) f.pop_back();
    out.push_back(f);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Reads a CSV with the given header; calls row(fields, line_no) per data row.
template <class F>
void read_table(std::istream& in, const std::vector<std::string>& header, const char* what, F&& row) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorKind::Parse, fmt::format("{}: empty file", what));
  ++line_no;
  if (split(line) != header)
    throw Error(ErrorKind::Parse, fmt::format("{}: unexpected header '{}'", what, line));
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto f = split(line);
    if (f.size() != header.size())
      throw Error(ErrorKind::Parse, fmt::format("{} line {}: expected {} fields", what, line_no, header.size()));
    row(f, line_no);
  }
}

double num(const std::string& s, const char* what, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw Error(ErrorKind::Parse, fmt::format("{} line {}: bad number '{}'", what, line, s));
  return v;
}

int idx(const std::string& s, const char* what, std::size_t line) {
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0)
    throw Error(ErrorKind::Parse, fmt::format("{} line {}: bad index '{}'", what, line, s));
  return v;
}

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + p.string());
  return in;
}

}  // namespace

std::string margins_csv(const std::vector<Site>& sites, const std::vector<MarginalModel>& margins) {
  std::string out = "site_id,lon,lat,threshold,zeta,sigma,xi\n";
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const auto& m = margins[i];
    out += fmt::format("{},{},{},{},{},{},{}\n", sites.at(i).id, format_number(sites[i].lon),
                       format_number(sites[i].lat), format_number(m.threshold()), format_number(m.zeta()),
                       format_number(m.gpd().sigma), format_number(m.gpd().xi));
  }
  return out;
}

std::string margin_samples_csv(const std::vector<Site>& sites, const std::vector<MarginalModel>& margins) {
  std::string out = "site_id,rank,value\n";
  for (std::size_t i = 0; i < margins.size(); ++i) {
    const auto& s = margins[i].sorted_sample();
    for (std::size_t k = 0; k < s.size(); ++k)
      out += fmt::format("{},{},{}\n", sites.at(i).id, k + 1, format_number(s[k]));
  }
  return out;
}

std::vector<MarginalModel> read_margins(std::istream& table, std::istream& samples,
                                        std::vector<Site>* sites) {
  struct Row {
    Site site;
    double threshold, zeta;
    GpdParams gpd;
  };
  std::vector<Row> rows;
  std::map<std::string, std::size_t> index;
  read_table(table, {"site_id", "lon", "lat", "threshold", "zeta", "sigma", "xi"}, "margins",
             [&](const std::vector<std::string>& f, std::size_t line) {
               if (!index.emplace(f[0], rows.size()).second)
                 throw Error(ErrorKind::Integrity, "margins: duplicate site " + f[0]);
               rows.push_back({{f[0], num(f[1], "margins", line), num(f[2], "margins", line)},
                               num(f[3], "margins", line),
                               num(f[4], "margins", line),
                               {num(f[5], "margins", line), num(f[6], "margins", line)}});
             });
  std::vector<std::vector<double>> values(rows.size());
  read_table(samples, {"site_id", "rank", "value"}, "margin samples",
             [&](const std::vector<std::string>& f, std::size_t line) {
               auto it = index.find(f[0]);
               if (it == index.end())
                 throw Error(ErrorKind::Integrity, "margin samples: unknown site " + f[0]);
               values[it->second].push_back(num(f[2], "margin samples", line));
             });
  std::vector<MarginalModel> out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.emplace_back(rows[i].threshold, rows[i].zeta, rows[i].gpd, std::move(values[i]));
    if (sites) sites->push_back(rows[i].site);
  }
  return out;
}

std::string trees_csv(const TreeEnsemble& ensemble) {
  std::string out = "tree_id,i,j\n";
  for (std::size_t m = 0; m < ensemble.trees.size(); ++m)
    for (auto [i, j] : ensemble.trees[m].edges) out += fmt::format("{},{},{}\n", m, i, j);
  return out;
}

std::string edge_values_csv(const EdgeValues& v, const char* column) {
  std::string out = fmt::format("i,j,{}\n", column);
  for (const auto& [key, value] : v) out += fmt::format("{},{},{}\n", key.first, key.second, format_number(value));
  return out;
}

std::string priors_csv(const std::vector<double>& prior) {
  std::string out = "tree_id,prior\n";
  for (std::size_t m = 0; m < prior.size(); ++m) out += fmt::format("{},{}\n", m, format_number(prior[m]));
  return out;
}

std::string sites_csv(const std::vector<Site>& sites) {
  std::string out = "index,site_id,lon,lat\n";
  for (std::size_t i = 0; i < sites.size(); ++i)
    out += fmt::format("{},{},{},{}\n", i, sites[i].id, format_number(sites[i].lon), format_number(sites[i].lat));
  return out;
}

std::string edges_csv(const LatticeGraph& graph) {
  std::string out = "i,j,orientation\n";
  for (const auto& e : graph.edges) out += fmt::format("{},{},{}\n", e.i, e.j, to_string(e.orientation));
  return out;
}

std::string variogram_csv(const std::vector<Site>& sites, const Eigen::MatrixXd& gamma) {
  std::string out = "site_id";
  for (const auto& s : sites) out += "," + s.id;
  out += "\n";
  for (Eigen::Index i = 0; i < gamma.rows(); ++i) {
    out += sites.at(static_cast<std::size_t>(i)).id;
    for (Eigen::Index j = 0; j < gamma.cols(); ++j) out += "," + format_number(gamma(i, j));
    out += "\n";
  }
  return out;
}

TreeEnsemble read_trees(std::istream& in, std::size_t node_count) {
  std::map<int, std::vector<EdgeKey>> edges;
  read_table(in, {"tree_id", "i", "j"}, "trees", [&](const std::vector<std::string>& f, std::size_t line) {
    edges[idx(f[0], "trees", line)].emplace_back(idx(f[1], "trees", line), idx(f[2], "trees", line));
  });
  TreeEnsemble ens;
  int expected = 0;
  for (auto& [id, list] : edges) {
    if (id != expected++) throw Error(ErrorKind::Integrity, "trees: tree ids must be 0..M-1");
    auto tree = SpanningTree::from_edges(node_count, std::move(list));
    if (!is_spanning_tree(tree))
      throw Error(ErrorKind::Integrity, fmt::format("trees: tree {} is not a spanning tree", id));
    ens.trees.push_back(std::move(tree));
  }
  ens.raw_draws = ens.trees.size();
  return ens;
}

EdgeValues read_edge_values(std::istream& in, const char* column) {
  EdgeValues v;
  read_table(in, {"i", "j", column}, column, [&](const std::vector<std::string>& f, std::size_t line) {
    const int i = idx(f[0], column, line);
    const int j = idx(f[1], column, line);
    if (v.contains(i, j)) throw Error(ErrorKind::Integrity, fmt::format("{}: duplicate edge ({}, {})", column, i, j));
    v.set(i, j, num(f[2], column, line));
  });
  return v;
}

std::vector<double> read_priors(std::istream& in) {
  std::vector<double> p;
  read_table(in, {"tree_id", "prior"}, "priors", [&](const std::vector<std::string>& f, std::size_t line) {
    if (idx(f[0], "priors", line) != static_cast<int>(p.size()))
      throw Error(ErrorKind::Integrity, "priors: tree ids must be 0..M-1 in order");
    p.push_back(num(f[1], "priors", line));
  });
  return p;
}

LatticeGraph read_graph(std::istream& sites, std::istream& edges) {
  LatticeGraph g;
  read_table(sites, {"index", "site_id", "lon", "lat"}, "sites",
             [&](const std::vector<std::string>& f, std::size_t line) {
               if (idx(f[0], "sites", line) != static_cast<int>(g.sites.size()))
                 throw Error(ErrorKind::Integrity, "sites: indices must be 0..N-1 in order");
               g.sites.push_back({f[1], num(f[2], "sites", line), num(f[3], "sites", line)});
             });
  read_table(edges, {"i", "j", "orientation"}, "edges", [&](const std::vector<std::string>& f, std::size_t line) {
    const auto key = make_edge(idx(f[0], "edges", line), idx(f[1], "edges", line));
    if (static_cast<std::size_t>(key.second) >= g.sites.size())
      throw Error(ErrorKind::Integrity, fmt::format("edges line {}: node out of range", line));
    g.edges.push_back({key.first, key.second, orientation_from_string(f[2])});
  });
  std::sort(g.edges.begin(), g.edges.end(),
            [](const Edge& a, const Edge& b) { return EdgeKey{a.i, a.j} < EdgeKey{b.i, b.j}; });
  return g;
}

std::vector<std::pair<std::string, std::string>> bundle_files(const ClusterWindowFit& fit) {
  std::vector<std::pair<std::string, std::string>> files;
  ordered_json meta;
  meta["cluster"] = fit.cluster;
  meta["window"] = fit.window.index;
  meta["window_label"] = fit.window.label();
  meta["first_season"] = fit.window.first_season;
  meta["last_season"] = fit.window.last_season;
  meta["seed"] = fit.seed;
  meta["node_count"] = fit.site_info.size();
  meta["marginal_only"] = fit.marginal_only;
  meta["site_index"] = fit.sites;
  if (!fit.marginal_only) {
    meta["a_opt"] = fit.model.a_opt;
    meta["ensemble_raw_draws"] = fit.model.ensemble.raw_draws;
    meta["exceedance_times"] = fit.exceedance_times;
    meta["dsga_iterations"] = fit.dsga.iterations;
    meta["dsga_converged"] = fit.dsga.converged;
    meta["dsga_initial_objective"] = fit.dsga.initial_objective;
    meta["dsga_objective"] = fit.dsga.objective;
    meta["bias_loss"] = fit.bias.loss;
  }
  files.emplace_back("sites.csv", sites_csv(fit.site_info));
  files.emplace_back("margins.csv", margins_csv(fit.site_info, fit.margins));
  files.emplace_back("margin_samples.csv", margin_samples_csv(fit.site_info, fit.margins));
  if (!fit.marginal_only) {
    files.emplace_back("edges.csv", edges_csv(fit.model.graph));
    files.emplace_back("trees.csv", trees_csv(fit.model.ensemble));
    files.emplace_back("gamma.csv", edge_values_csv(fit.model.gammas, "gamma"));
    files.emplace_back("beta.csv", edge_values_csv(fit.model.beta, "beta"));
    files.emplace_back("priors.csv", priors_csv(fit.model.prior));
  }
  files.emplace_back("bundle.json", meta.dump(2) + "\n");
  return files;
}

void save_bundle(const std::string& dir, const ClusterWindowFit& fit) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create " + dir + ": " + ec.message());
  for (const auto& [name, content] : bundle_files(fit)) {
    std::ofstream out(fs::path(dir) / name, std::ios::binary);
    out << content;
    if (!out) throw Error(ErrorKind::Io, "cannot write " + (fs::path(dir) / name).string());
  }
}

ClusterWindowFit load_bundle(const std::string& dir) {
  const fs::path root(dir);
  ordered_json meta;
  try {
    auto in = open_in(root / "bundle.json");
    meta = ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, "bundle.json: " + std::string(e.what()));
  }
  ClusterWindowFit fit;
  try {
    fit.cluster = meta.at("cluster").get<int>();
    fit.window.index = meta.at("window").get<std::size_t>();
    fit.window.first_season = meta.at("first_season").get<int>();
    fit.window.last_season = meta.at("last_season").get<int>();
    fit.seed = meta.at("seed").get<std::uint64_t>();
    fit.marginal_only = meta.at("marginal_only").get<bool>();
    fit.sites = meta.at("site_index").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, "bundle.json: " + std::string(e.what()));
  }
  {
    auto table = open_in(root / "margins.csv");
    auto samples = open_in(root / "margin_samples.csv");
    fit.margins = read_margins(table, samples, &fit.site_info);
  }
  if (fit.marginal_only) return fit;
  auto sites = open_in(root / "sites.csv");
  auto edges = open_in(root / "edges.csv");
  fit.model.graph = read_graph(sites, edges);
  if (fit.model.graph.node_count() != fit.margins.size())
    throw Error(ErrorKind::Integrity, "bundle: graph and margins disagree on the site count");
  auto trees = open_in(root / "trees.csv");
  fit.model.ensemble = read_trees(trees, fit.model.graph.node_count());
  auto gamma = open_in(root / "gamma.csv");
  fit.model.gammas = read_edge_values(gamma, "gamma");
  auto beta = open_in(root / "beta.csv");
  fit.model.beta = read_edge_values(beta, "beta");
  auto priors = open_in(root / "priors.csv");
  fit.model.prior = read_priors(priors);
  fit.model.a_opt = meta.at("a_opt").get<double>();
  fit.model.ensemble.raw_draws = meta.value("ensemble_raw_draws", fit.model.ensemble.trees.size());
  fit.exceedance_times = meta.value("exceedance_times", std::size_t{0});
  fit.dsga.iterations = meta.value("dsga_iterations", std::size_t{0});
  fit.dsga.converged = meta.value("dsga_converged", false);
  fit.dsga.initial_objective = meta.value("dsga_initial_objective", 0.0);
  fit.dsga.objective = meta.value("dsga_objective", 0.0);
  fit.dsga.beta = fit.model.beta;
  fit.bias.a = fit.model.a_opt;
  fit.bias.loss = meta.value("bias_loss", 0.0);
  fit.model.validate();
  return fit;
}

}  // namespace hrmix
