#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "artdiff/kinematics.hpp"

namespace artdiff {

/// Shapes of the padded articulation graph and its flat vector.
struct GraphConfig {
  int max_parts = 8;   // K
  int latent_dim = 8;  // F
  bool include_rotation = false;

  static constexpr int kEdgeDim = 11;  // c, l(3), m(3), prismatic lo/hi, revolute lo/hi

  int pose_dim() const { return include_rotation ? 6 : 3; }
  int node_dim() const { return 1 + pose_dim() + 3 + latent_dim; }
  int edge_dim() const { return kEdgeDim; }
  int edge_count() const { return max_parts * (max_parts - 1) / 2; }
  int flat_dim() const { return max_parts * node_dim() + edge_count() * edge_dim(); }

  /// Index of the stored upper-triangle edge (i<j) in lexicographic order.
  int edge_index(int i, int j) const;
  std::pair<int, int> edge_endpoints(int index) const;
  int node_offset(int i) const { return i * node_dim(); }
  int edge_offset(int i, int j) const {
    return max_parts * node_dim() + edge_index(i, j) * edge_dim();
  }

  void validate() const;
  bool operator==(const GraphConfig&) const = default;
};

// Channel offsets inside a node block.
struct NodeChannels {
  static constexpr int kExists = 0;
  static constexpr int kTranslation = 1;
  int rotation = -1;  // -1 when rotation is off
  int bbox = 0;
  int latent = 0;
  explicit NodeChannels(const GraphConfig& cfg);
};

// Channel offsets inside an edge block.
struct EdgeChannels {
  static constexpr int kChirality = 0;
  static constexpr int kDirection = 1;
  static constexpr int kMomentum = 4;
  static constexpr int kPrismatic = 7;
  static constexpr int kRevolute = 9;
};

struct NodeAttr {
  double exists = 0.0;
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();
  Vec3 bbox = Vec3::Zero();
  Eigen::VectorXd latent;

  bool operator==(const NodeAttr&) const = default;
};

struct EdgeAttr {
  double chirality = 0.0;  // +1: lower index is parent, -1: higher index is parent, 0: absent
  Vec6 axis = Vec6::Zero();
  Range prismatic;
  Range revolute;

  bool operator==(const EdgeAttr&) const = default;
};

class ArticulationGraph {
 public:
  explicit ArticulationGraph(const GraphConfig& cfg);

  const GraphConfig& config() const { return config_; }
  int capacity() const { return config_.max_parts; }

  NodeAttr& node(int i) { return nodes_.at(i); }
  const NodeAttr& node(int i) const { return nodes_.at(i); }
  const std::vector<NodeAttr>& nodes() const { return nodes_; }

  /// Stored record, requires i < j.
  EdgeAttr& edge(int i, int j);
  const EdgeAttr& edge(int i, int j) const;
  const std::vector<EdgeAttr>& edges() const { return edges_; }

  /// Directed view: for a > b returns the (b,a) record with the axis negated
  /// and ranges unchanged.
  EdgeAttr oriented_edge(int a, int b) const;

  bool operator==(const ArticulationGraph&) const = default;

 private:
  GraphConfig config_;
  std::vector<NodeAttr> nodes_;
  std::vector<EdgeAttr> edges_;
};

Eigen::VectorXd flatten(const ArticulationGraph& graph);
ArticulationGraph unflatten(const Eigen::VectorXd& x, const GraphConfig& cfg);

/// Human-readable channel names in flat order, e.g. "node0.exists", "edge0_1.l.x".
std::vector<std::string> channel_layout(const GraphConfig& cfg);

enum class ChannelKind { kExistence, kChirality, kContinuous };
std::vector<ChannelKind> channel_kinds(const GraphConfig& cfg);

/// Graph encoding of a tree; part k occupies node k. Throws if the object has
/// more parts than capacity or a latent of the wrong width.
ArticulationGraph encode_object(const ArticulatedObject& obj, const GraphConfig& cfg);

/// Per-channel affine normalization. Existence indicators map {0,1} -> {-1,+1},
/// chirality is left as-is, every other channel is z-scored.
struct NormalizationStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd scale;

  static constexpr double kMinScale = 1e-6;
  bool operator==(const NormalizationStats&) const = default;
};

NormalizationStats compute_stats(const std::vector<Eigen::VectorXd>& train, const GraphConfig& cfg);
Eigen::VectorXd normalize(const Eigen::VectorXd& x, const NormalizationStats& stats);
Eigen::VectorXd denormalize(const Eigen::VectorXd& x_hat, const NormalizationStats& stats);

/// Zeroes continuous channels of absent nodes (exists <= 0 in normalized
/// space) and absent edges (chirality == 0).
void zero_background(Eigen::VectorXd& x_hat, const GraphConfig& cfg);

/// flatten -> normalize -> zero_background; the diffusion-space encoding.
Eigen::VectorXd encode_for_diffusion(const ArticulatedObject& obj, const GraphConfig& cfg,
                                     const NormalizationStats& stats);

enum class MaskKind { kParts, kMotion, kGAPart, kCustom };
MaskKind parse_mask_kind(std::string_view name);
std::string_view to_string(MaskKind kind);

struct MaskSpec {
  MaskKind kind = MaskKind::kCustom;
  std::vector<int> indices;  // custom only: flat channels that are known
};

/// 1 marks a known entry. The gapart mask reads the known graph to leave its
/// nonzero range bounds free.
Eigen::VectorXd make_mask(const MaskSpec& spec, const GraphConfig& cfg,
                          const ArticulationGraph* known = nullptr);

}  // namespace artdiff
