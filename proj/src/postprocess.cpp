#include "artdiff/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace artdiff {

namespace {

struct DisjointSets {
  std::vector<int> parent;
  explicit DisjointSets(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

std::vector<int> select_foreground(const ArticulationGraph& g, ExtractionReport& report) {
  const int K = g.capacity();
  std::vector<int> fg;
  for (int i = 0; i < K; ++i) {
    if (g.node(i).exists > kExistenceThreshold) fg.push_back(i);
  }
  if (fg.size() >= 2) return fg;
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return g.node(a).exists > g.node(b).exists; });
  fg = {order[0], order[1]};
  std::sort(fg.begin(), fg.end());
  report.top2_fallback = true;
  report.repairs.push_back("top-2 existence fallback kept nodes " + std::to_string(fg[0]) + " and " +
                           std::to_string(fg[1]));
  return fg;
}

// Parent "vote" of the stored pair: +1 lower index, -1 higher index, 0 none.
int vote(double c) { return c > 0.0 ? 1 : (c < 0.0 ? -1 : 0); }

Range sanitize(Range r, const std::string& what, std::vector<std::string>& repairs) {
  if (r.lo > r.hi) {
    std::swap(r.lo, r.hi);
    repairs.push_back(what + " bounds swapped");
  }
  if (r.lo > 0.0) {
    r.lo = 0.0;
    repairs.push_back(what + " lower bound clamped to 0");
  }
  if (r.hi < 0.0) {
    r.hi = 0.0;
    repairs.push_back(what + " upper bound clamped to 0");
  }
  return r;
}

}  // namespace

std::vector<std::pair<int, int>> max_spanning_tree(const ArticulationGraph& g, const std::vector<int>& nodes) {
  std::vector<std::pair<int, int>> candidates;
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = a + 1; b < nodes.size(); ++b) {
      candidates.emplace_back(std::min(nodes[a], nodes[b]), std::max(nodes[a], nodes[b]));
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::stable_sort(candidates.begin(), candidates.end(), [&](const auto& x, const auto& y) {
    return std::abs(g.edge(x.first, x.second).chirality) > std::abs(g.edge(y.first, y.second).chirality);
  });
  DisjointSets sets(g.capacity());
  std::vector<std::pair<int, int>> tree;
  for (const auto& [i, j] : candidates) {
    if (sets.unite(i, j)) tree.emplace_back(i, j);
    if (tree.size() + 1 == nodes.size()) break;
  }
  std::sort(tree.begin(), tree.end());
  return tree;
}

Extraction extract_graph(const ArticulationGraph& g) {
  Extraction out;
  ExtractionReport& report = out.report;
  const GraphConfig& cfg = g.config();
  report.foreground = select_foreground(g, report);
  const std::vector<int>& fg = report.foreground;
  report.tree_edges = max_spanning_tree(g, fg);

  const int n = static_cast<int>(fg.size());
  std::vector<int> part_of_node(cfg.max_parts, -1);
  for (int k = 0; k < n; ++k) part_of_node[fg[k]] = k;

  std::vector<std::vector<int>> adjacency(n);
  for (const auto& [i, j] : report.tree_edges) {
    adjacency[part_of_node[i]].push_back(part_of_node[j]);
    adjacency[part_of_node[j]].push_back(part_of_node[i]);
  }

  // Orient the tree away from a root; count edges that disagree with chirality.
  auto orient = [&](int root, std::vector<int>& parent) {
    parent.assign(n, -1);
    std::vector<int> stack{root};
    std::vector<bool> seen(n, false);
    seen[root] = true;
    int conflicts = 0;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : adjacency[u]) {
        if (seen[v]) continue;
        seen[v] = true;
        parent[v] = u;
        stack.push_back(v);
        const int lo = std::min(fg[u], fg[v]);
        const int hi = std::max(fg[u], fg[v]);
        const int want = vote(g.edge(lo, hi).chirality);
        const int got = fg[u] == lo ? 1 : -1;
        if (want != 0 && want != got) ++conflicts;
      }
    }
    return conflicts;
  };

  int best_root = 0;
  int best_conflicts = std::numeric_limits<int>::max();
  std::vector<int> parent;
  for (int r = 0; r < n; ++r) {
    const int c = orient(r, parent);
    if (c < best_conflicts) {
      best_conflicts = c;
      best_root = r;
    }
  }
  std::vector<int> parent_of;
  orient(best_root, parent_of);
  report.orientation_conflicts = best_conflicts;
  if (best_conflicts > 0) {
    report.repairs.push_back(std::to_string(best_conflicts) + " edge(s) re-oriented away from root node " +
                             std::to_string(fg[best_root]));
  }

  ArticulatedObject& obj = out.object;
  obj.root = best_root;
  obj.parts.resize(n);
  for (int k = 0; k < n; ++k) {
    const NodeAttr& node = g.node(fg[k]);
    Part& p = obj.parts[k];
    p.translation = node.translation;
    p.rotation = cfg.include_rotation ? node.rotation : Vec3::Zero();
    p.bbox = node.bbox;
    for (int a = 0; a < 3; ++a) {
      if (!(p.bbox[a] >= kMinBoxExtent)) {
        report.repairs.push_back("part " + std::to_string(k) + " box extent clamped");
        p.bbox[a] = kMinBoxExtent;
      }
    }
    p.latent = node.latent.size() == cfg.latent_dim ? node.latent : Eigen::VectorXd::Zero(cfg.latent_dim);
  }

  for (int child = 0; child < n; ++child) {
    const int par = parent_of[child];
    if (par < 0) continue;
    const EdgeAttr e = g.oriented_edge(fg[par], fg[child]);
    Joint j;
    j.parent = par;
    j.child = child;
    const std::string tag = "joint " + std::to_string(fg[par]) + "->" + std::to_string(fg[child]);
    if (e.axis.head<3>().norm() > 1e-8) {
      j.axis = project_to_plucker(e.axis);
    } else {
      j.axis = PluckerAxis::through(obj.parts[child].translation, Vec3::UnitZ());
      report.repairs.push_back(tag + " degenerate axis replaced by a vertical line through the child");
    }
    j.prismatic = sanitize(e.prismatic, tag + " prismatic range", report.repairs);
    j.revolute = sanitize(e.revolute, tag + " revolute range", report.repairs);
    obj.joints.push_back(j);
  }
  return out;
}

Extraction extract_object(const Eigen::VectorXd& x_hat, const NormalizationStats& stats, const GraphConfig& cfg) {
  if (x_hat.size() != cfg.flat_dim()) {
    throw std::invalid_argument("extract_object: vector has " + std::to_string(x_hat.size()) +
                                " entries, expected " + std::to_string(cfg.flat_dim()));
  }
  return extract_graph(unflatten(denormalize(x_hat, stats), cfg));
}

Eigen::VectorXd part_feature(const Part& p) {
  Eigen::VectorXd f(3 + p.latent.size());
  f << p.bbox, p.latent;
  return f;
}

PartLibrary build_part_library(const std::vector<ArticulatedObject>& objects) {
  PartLibrary lib;
  std::vector<Eigen::VectorXd> rows;
  for (std::size_t o = 0; o < objects.size(); ++o) {
    for (std::size_t p = 0; p < objects[o].parts.size(); ++p) {
      rows.push_back(part_feature(objects[o].parts[p]));
      lib.source.emplace_back(static_cast<int>(o), static_cast<int>(p));
    }
  }
  if (rows.empty()) return lib;
  lib.features.resize(static_cast<Eigen::Index>(rows.size()), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != lib.features.cols()) {
      throw std::invalid_argument("part library rows have inconsistent latent widths");
    }
    lib.features.row(static_cast<Eigen::Index>(r)) = rows[r].transpose();
  }
  return lib;
}

int retrieve_nearest_part(const Eigen::VectorXd& query, const PartLibrary& library) {
  if (library.empty()) throw std::invalid_argument("part library is empty");
  if (query.size() != library.features.cols()) {
    throw std::invalid_argument("query width does not match the part library");
  }
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index r = 0; r < library.features.rows(); ++r) {
    const double d = (library.features.row(r).transpose() - query).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(r);
    }
  }
  return best;
}

}  // namespace artdiff
