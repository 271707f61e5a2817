#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "artdiff/kinematics.hpp"

namespace artdiff {

/// Static 3-D KD-tree answering exact nearest-neighbor queries.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(const Eigen::Matrix3Xd& points);

  /// Squared distance to the closest stored point, or `cap` when nothing is
  /// closer than that. Requires a nonempty tree.
  double nearest_sq(const Vec3& q, double cap = std::numeric_limits<double>::infinity()) const;
  std::size_t size() const { return static_cast<std::size_t>(points_.cols()); }

 private:
  struct Node {
    int begin = 0, end = 0;  // point range (leaf) or split bounds
    int left = -1, right = -1;
    int axis = -1;           // -1 for leaves
    double split = 0.0;
  };
  int build(int begin, int end, std::vector<int>& idx, const Eigen::Matrix3Xd& src);
  void search(int node, const Vec3& q, double& best) const;

  Eigen::Matrix3Xd points_;
  std::vector<Node> nodes_;
};

enum class NearestMethod { kKdTree, kBruteForce };

/// Exact squared nearest-neighbor distance of q to the columns of P (capped
/// like KdTree::nearest_sq).
double brute_nearest_sq(const Eigen::Matrix3Xd& P, const Vec3& q,
                        double cap = std::numeric_limits<double>::infinity());

/// mean_a min_b |a-b|^2 + mean_b min_a |a-b|^2. Throws on an empty set.
double chamfer(const Eigen::Matrix3Xd& P1, const Eigen::Matrix3Xd& P2,
               NearestMethod method = NearestMethod::kKdTree);

/// One posed, sampled object state ready for repeated comparisons.
struct Instance {
  Eigen::Matrix3Xd points;
  std::vector<RigidTransform> part_poses;
  KdTree tree;
  SampleKey key;
};

Instance make_instance(const ArticulatedObject& obj, const StateSet& states, int n_points, const SampleKey& key);

/// Min over part-pair canonicalizations of the chamfer distance between the
/// canonicalized clouds. Values >= `bound` may be reported as `bound`; pass
/// infinity for the exact value. Exactly symmetric in its arguments.
double d_tilde(const Instance& a, const Instance& b, NearestMethod method = NearestMethod::kKdTree,
               double bound = std::numeric_limits<double>::infinity());

struct MetricOptions {
  int states = 10;  // M
  int n_points = 2048;
  std::uint64_t seed = 0;
  NearestMethod method = NearestMethod::kKdTree;
  int threads = 1;
};

/// The M sampled states of one object, keyed by its content fingerprint.
struct ObjectSamples {
  std::vector<Instance> instances;
};

ObjectSamples sample_object(const ArticulatedObject& obj, const MetricOptions& opt);

/// (1/M) sum_a min_b d~ + (1/M) sum_b min_a d~.
double instantiation_distance(const ObjectSamples& o1, const ObjectSamples& o2,
                              NearestMethod method = NearestMethod::kKdTree);
double instantiation_distance(const ArticulatedObject& o1, const ArticulatedObject& o2,
                              const MetricOptions& opt);
/// Same value when it is below `bound`; otherwise may return `bound` early.
double instantiation_distance_bounded(const ObjectSamples& o1, const ObjectSamples& o2, double bound,
                                      NearestMethod method = NearestMethod::kKdTree);

/// Rows index `a`, columns index `b`. Entries computed independently, so any
/// thread count yields the same matrix.
Eigen::MatrixXd distance_matrix(const std::vector<ObjectSamples>& a, const std::vector<ObjectSamples>& b,
                                const MetricOptions& opt);
/// Symmetric variant for one set; the diagonal is zero.
Eigen::MatrixXd distance_matrix(const std::vector<ObjectSamples>& a, const MetricOptions& opt);

/// Matrices are sample-by-reference (rows S, columns R).
double mmd(const Eigen::MatrixXd& d_sr);
double cov(const Eigen::MatrixXd& d_sr);
/// Leave-one-out 1-NN two-sample accuracy over S u R. A tie between the two
/// sets counts as a misclassification.
double one_nna(const Eigen::MatrixXd& d_ss, const Eigen::MatrixXd& d_rr, const Eigen::MatrixXd& d_sr);

struct SetMetrics {
  double mmd = 0.0;
  double cov = 0.0;
  double one_nna = 0.0;
  int n_sample = 0;
  int n_reference = 0;
  Eigen::MatrixXd d_sr;
};

SetMetrics evaluate_sets(const std::vector<ArticulatedObject>& samples,
                         const std::vector<ArticulatedObject>& reference, const MetricOptions& opt);

/// Overlap of two closed intervals; equal degenerate intervals count as 1.
double range_iou(const Range& a, const Range& b);

/// Per reference joint: how well a generated object with the same part
/// indexing reproduces it. A joint counts as recovered when the generated
/// object links the same two parts, the direction error is below
/// `max_angle_deg` and every range the reference moves along overlaps with
/// IoU above `min_iou`.
struct JointRecovery {
  bool found = false;
  double angle_deg = 180.0;
  double iou = 0.0;  // min over the ranges the reference uses
  bool recovered = false;
};

std::vector<JointRecovery> compare_joints(const ArticulatedObject& reference, const ArticulatedObject& generated,
                                          double max_angle_deg = 5.0, double min_iou = 0.8);

}  // namespace artdiff
