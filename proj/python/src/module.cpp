#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "hrmix/bundle.hpp"
#include "hrmix/config.hpp"
#include "hrmix/dataset.hpp"
#include "hrmix/dependence_fit.hpp"
#include "hrmix/error.hpp"
#include "hrmix/gpd_margins.hpp"
#include "hrmix/graphs.hpp"
#include "hrmix/hr_core.hpp"
#include "hrmix/mixture.hpp"
#include "hrmix/pipeline.hpp"
#include "hrmix/report.hpp"
#include "hrmix/simulate.hpp"

namespace py = pybind11;
using namespace hrmix;

namespace {

using EdgeList = std::vector<std::pair<int, int>>;

EdgeValues edge_values(const EdgeList& edges, const std::vector<double>& values) {
  if (edges.size() != values.size()) throw Error(ErrorKind::Domain, "edges and values differ in length");
  EdgeValues out;
  for (std::size_t e = 0; e < edges.size(); ++e) out.set(edges[e].first, edges[e].second, values[e]);
  return out;
}

GriddedDataset dataset_from_csv(const std::string& text, bool thin) {
  std::istringstream in(text);
  return read_dataset_csv(in, {thin});
}

}  // namespace

PYBIND11_MODULE(_hrmix, m) {
  m.doc() = "Tree-mixture Husler-Reiss extremes";

  py::register_exception<Error>(m, "HrmixError", PyExc_ValueError);

  // hr core
  m.def("bivariate_V", &bivariate_V, py::arg("x1"), py::arg("x2"), py::arg("gamma"));
  m.def("bivariate_intensity", &bivariate_intensity, py::arg("x1"), py::arg("x2"), py::arg("gamma"));
  m.def("chi_hr", &chi_hr, py::arg("gamma"));
  m.def("gamma_from_chi", &gamma_from_chi, py::arg("chi"));
  m.def(
      "hr_intensity",
      [](const std::vector<double>& x, const Eigen::MatrixXd& gamma, Eigen::Index k) {
        return hr_intensity(x, gamma, k);
      },
      py::arg("x"), py::arg("gamma"), py::arg("k") = 0);

  // margins
  py::class_<GpdParams>(m, "GpdParams")
      .def(py::init<double, double>(), py::arg("sigma"), py::arg("xi"))
      .def_readwrite("sigma", &GpdParams::sigma)
      .def_readwrite("xi", &GpdParams::xi)
      .def("__repr__", [](const GpdParams& p) {
        return "GpdParams(sigma=" + std::to_string(p.sigma) + ", xi=" + std::to_string(p.xi) + ")";
      });
  m.def(
      "fit_gpd",
      [](const std::vector<double>& values, double u) {
        std::vector<Exceedance> ex;
        for (double v : values)
          if (v > u) ex.push_back({v, 0});
        const auto fit = fit_pooled_gpd(ex, u);
        return py::dict(py::arg("sigma") = fit.params.sigma, py::arg("xi") = fit.params.xi,
                        py::arg("loglik") = fit.loglik, py::arg("boundary") = fit.boundary,
                        py::arg("exceedances") = ex.size());
      },
      py::arg("values"), py::arg("threshold"), "GP fit to the values above the threshold.");
  py::class_<MarginalModel>(m, "MarginalModel")
      .def(py::init<double, GpdParams, std::vector<double>>(), py::arg("threshold"), py::arg("gpd"),
           py::arg("sample"))
      .def_property_readonly("threshold", &MarginalModel::threshold)
      .def_property_readonly("zeta", &MarginalModel::zeta)
      .def_property_readonly("gpd", &MarginalModel::gpd)
      .def("cdf", &MarginalModel::cdf)
      .def("to_unit_pareto", py::overload_cast<double>(&MarginalModel::to_unit_pareto, py::const_))
      .def("from_unit_pareto", &MarginalModel::from_unit_pareto)
      .def("return_level", &MarginalModel::return_level, py::arg("m"));

  // graphs
  m.def(
      "build_lattice",
      [](const std::vector<double>& lon, const std::vector<double>& lat, bool diagonals) {
        if (lon.size() != lat.size()) throw Error(ErrorKind::Domain, "lon and lat differ in length");
        std::vector<Site> sites;
        for (std::size_t i = 0; i < lon.size(); ++i) sites.push_back({"s" + std::to_string(i), lon[i], lat[i]});
        const auto g = build_lattice(sites, diagonals);
        EdgeList edges;
        std::vector<std::string> tags;
        for (const auto& e : g.edges) {
          edges.emplace_back(e.i, e.j);
          tags.emplace_back(to_string(e.orientation));
        }
        return py::make_tuple(edges, tags);
      },
      py::arg("lon"), py::arg("lat"), py::arg("diagonals") = true,
      "Grid-adjacency edges and their orientation tags.");
  m.def(
      "laplacian_minor_det",
      [](const Eigen::MatrixXd& w, Eigen::Index drop) { return laplacian_minor_det(w, drop); },
      py::arg("weights"), py::arg("drop") = -1);
  m.def(
      "spanning_tree_count",
      [](std::size_t n, const EdgeList& edges) {
        return enumerate_spanning_trees(LatticeGraph::from_edges(n, edges)).size();
      },
      py::arg("n"), py::arg("edges"));

  // dependence
  m.def("censored_pair_loglik",
        [](double yi, double yj, double u, double g) { return censored_pair_loglik(yi, yj, u, g); },
        py::arg("yi"), py::arg("yj"), py::arg("u"), py::arg("gamma"));
  m.def(
      "fit_edge_gamma",
      [](const std::vector<double>& yi, const std::vector<double>& yj, double u) {
        const auto f = fit_edge_gamma(yi, yj, u);
        return py::dict(py::arg("gamma") = f.gamma, py::arg("loglik") = f.loglik,
                        py::arg("boundary") = f.boundary, py::arg("exceedances") = f.exceedances);
      },
      py::arg("yi"), py::arg("yj"), py::arg("u") = 20.0);

  // mixture
  m.def(
      "chi_tree",
      [](std::size_t n, const EdgeList& edges, const std::vector<double>& gammas, int i, int j, double a) {
        return chi_tree(SpanningTree::from_edges(n, edges), edge_values(edges, gammas), i, j, a);
      },
      py::arg("n"), py::arg("edges"), py::arg("gammas"), py::arg("i"), py::arg("j"), py::arg("a") = 1.0);
  m.def(
      "tree_prior_probs",
      [](std::size_t n, const EdgeList& edges, const std::vector<double>& beta) {
        TreeEnsemble all;
        all.trees = enumerate_spanning_trees(LatticeGraph::from_edges(n, edges));
        const auto p = tree_prior_probs(all, edge_values(edges, beta));
        std::vector<EdgeList> trees;
        for (const auto& t : all.trees) trees.emplace_back(t.edges.begin(), t.edges.end());
        return py::make_tuple(trees, p);
      },
      py::arg("n"), py::arg("edges"), py::arg("beta"),
      "Every spanning tree of a small graph with its prior probability.");

  // simulation
  m.def(
      "sample_mpd_tree",
      [](std::size_t n, const EdgeList& edges, const std::vector<double>& gammas, std::size_t count,
         std::uint64_t seed) {
        return sample_mpd_tree(SpanningTree::from_edges(n, edges), edge_values(edges, gammas), count, seed).values;
      },
      py::arg("n"), py::arg("edges"), py::arg("gammas"), py::arg("count"), py::arg("seed"),
      "count x n matrix of multivariate Pareto draws from a tree HR model.");
  m.def(
      "simulate_csv",
      [](std::size_t nx, std::size_t ny, std::size_t seasons, double gamma, bool independent, std::uint64_t seed) {
        const GridSpec grid{nx, ny, 140.0, -38.0, 0.5};
        DependenceSpec dep;
        if (independent)
          dep.independent = true;
        else
          dep = random_tree_dependence(grid, gamma, derive_seed(seed, {7}));
        const auto data =
            generate_synthetic_dataset(grid, {}, dep, summer_days(1999, seasons), derive_seed(seed, {8}));
        std::ostringstream out;
        write_dataset_csv(data, out);
        return out.str();
      },
      py::arg("nx") = 3, py::arg("ny") = 3, py::arg("seasons") = 12, py::arg("gamma") = 1.0,
      py::arg("independent") = false, py::arg("seed") = 1,
      "Synthetic dataset in the site_id,lon,lat,date,value CSV form.");

  // pipeline
  m.def(
      "run_report",
      [](const std::string& csv_text, const std::string& out_dir, const std::string& config_text,
         std::size_t threads) {
        std::istringstream cfg_in(config_text);
        const auto cfg = parse_config(cfg_in);
        cfg.validate();
        const auto data = dataset_from_csv(csv_text, cfg.thin);
        PipelineResult result;
        {
          py::gil_scoped_release release;
          result = run_pipeline(data, cfg, threads);
        }
        OutputWriter writer(out_dir);
        emit_outputs(result, data, {}, writer);
        write_manifest(writer, {"report", "python", fnv1a64(csv_text), cfg.seed, to_text(cfg)});
        py::list risks;
        for (const auto& r : result.risks)
          risks.append(py::dict(py::arg("cluster") = r.cluster, py::arg("window") = result.windows[r.window].label(),
                                py::arg("risk") = r.risk, py::arg("std_error") = r.std_error));
        std::vector<std::string> files;
        for (const auto& f : writer.files()) files.push_back(f.first);
        return py::dict(py::arg("risks") = risks, py::arg("files") = files,
                        py::arg("windows") = result.windows.size(), py::arg("clusters") = result.clusters.k);
      },
      py::arg("csv_text"), py::arg("out_dir"), py::arg("config_text") = "", py::arg("threads") = 1,
      "Runs every stage on a dataset CSV and writes the report to out_dir.");
}
