#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "artdiff/artgraph.hpp"
#include "artdiff/kinematics.hpp"

namespace artdiff {

struct ExtractionReport {
  std::vector<int> foreground;                  // node ids, ascending; part k is foreground[k]
  std::vector<std::pair<int, int>> tree_edges;  // stored pairs (i < j) in the chosen tree
  int orientation_conflicts = 0;
  std::vector<std::string> repairs;
  bool top2_fallback = false;
};

struct Extraction {
  ArticulatedObject object;
  ExtractionReport report;
};

constexpr double kExistenceThreshold = 0.5;
constexpr double kMinBoxExtent = 1e-3;

/// Maximum-weight spanning tree over `nodes` with weight |c_(i,j)|
/// (Kruskal, ties broken by lexicographic pair order). Returns stored pairs.
std::vector<std::pair<int, int>> max_spanning_tree(const ArticulationGraph& g, const std::vector<int>& nodes);

/// Turns a raw-space graph into a valid kinematic tree.
Extraction extract_graph(const ArticulationGraph& g);

/// Denormalizes a diffusion-space vector and extracts it.
Extraction extract_object(const Eigen::VectorXd& x_hat, const NormalizationStats& stats,
                          const GraphConfig& cfg);

/// Rows are (bbox, latent) features of every training part.
struct PartLibrary {
  Eigen::MatrixXd features;
  std::vector<std::pair<int, int>> source;  // (object index, part index) per row

  bool empty() const { return features.rows() == 0; }
};

PartLibrary build_part_library(const std::vector<ArticulatedObject>& objects);

/// Concatenated (bbox, latent) feature of a part.
Eigen::VectorXd part_feature(const Part& p);

/// Library row closest in Euclidean distance; ties go to the lowest row.
/// Throws std::invalid_argument on an empty library or a width mismatch.
int retrieve_nearest_part(const Eigen::VectorXd& query, const PartLibrary& library);

}  // namespace artdiff
