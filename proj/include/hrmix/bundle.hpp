#pragma once

// Directory bundles of fitted cluster/window models and the CSV tables they
// are made of.

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "hrmix/gpd_margins.hpp"
#include "hrmix/graphs.hpp"
#include "hrmix/pipeline.hpp"

namespace hrmix {

/// site_id,lon,lat,threshold,zeta,sigma,xi
std::string margins_csv(const std::vector<Site>& sites, const std::vector<MarginalModel>& margins);
/// site_id,rank,value (sorted sample per site)
std::string margin_samples_csv(const std::vector<Site>& sites, const std::vector<MarginalModel>& margins);
std::vector<MarginalModel> read_margins(std::istream& table, std::istream& samples,
                                        std::vector<Site>* sites = nullptr);

std::string trees_csv(const TreeEnsemble& ensemble);        // tree_id,i,j
std::string edge_values_csv(const EdgeValues& v, const char* column);  // i,j,<column>
std::string priors_csv(const std::vector<double>& prior);   // tree_id,prior
std::string sites_csv(const std::vector<Site>& sites);      // index,site_id,lon,lat
std::string edges_csv(const LatticeGraph& graph);           // i,j,orientation
/// Symmetric matrix with a header row of site ids.
std::string variogram_csv(const std::vector<Site>& sites, const Eigen::MatrixXd& gamma);

TreeEnsemble read_trees(std::istream& in, std::size_t node_count);
EdgeValues read_edge_values(std::istream& in, const char* column);
std::vector<double> read_priors(std::istream& in);
LatticeGraph read_graph(std::istream& sites, std::istream& edges);

/// Writes the fit to `dir` (created if needed). Returns (file name, contents)
/// pairs in write order so callers can hash them.
std::vector<std::pair<std::string, std::string>> bundle_files(const ClusterWindowFit& fit);
void save_bundle(const std::string& dir, const ClusterWindowFit& fit);

/// Restores model, margins, sites and identifiers. The unit-Pareto panel and
/// optimizer traces are not stored.
ClusterWindowFit load_bundle(const std::string& dir);

}  // namespace hrmix
