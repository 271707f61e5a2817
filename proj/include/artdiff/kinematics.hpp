#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace artdiff {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Oriented line: unit direction `l` and momentum `m = p x l` for any point p on it.
struct PluckerAxis {
  Vec3 l = Vec3::UnitZ();
  Vec3 m = Vec3::Zero();

  /// Point on the line closest to the origin.
  Vec3 foot() const { return l.cross(m); }
  PluckerAxis reversed() const { return {-l, -m}; }
  Vec6 as_vector() const;
  static PluckerAxis through(const Vec3& point, const Vec3& direction);
};

struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform translation(const Vec3& t) { return {Mat3::Identity(), t}; }
  /// Rodrigues: rotation vector (axis * angle) plus translation.
  static RigidTransform from_axis_angle(const Vec3& rotvec, const Vec3& t);

  RigidTransform inverse() const { return {R.transpose(), -(R.transpose() * t)}; }
  Vec3 apply(const Vec3& p) const { return R * p + t; }
  RigidTransform operator*(const RigidTransform& rhs) const {
    return {R * rhs.R, R * rhs.t + t};
  }
  Vec3 rotation_vector() const;
};

/// Rotation by `theta` about unit direction `l` (right-handed).
Mat3 axis_angle_matrix(const Vec3& l, double theta);

struct JointState {
  double theta = 0.0;  // radians
  double d = 0.0;      // object units
};

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool operator==(const Range&) const = default;
};

struct Part {
  Vec3 translation = Vec3::Zero();
  Vec3 rotation = Vec3::Zero();  // axis-angle, zero when rotation channels are off
  Vec3 bbox = Vec3::Ones();      // full box extents
  Eigen::VectorXd latent;

  RigidTransform rest_pose() const {
    return RigidTransform::from_axis_angle(rotation, translation);
  }
};

/// Screw joint; the axis lives in the global object frame at rest.
struct Joint {
  int parent = 0;
  int child = 1;
  PluckerAxis axis;
  Range prismatic;
  Range revolute;
};

struct ArticulatedObject {
  int root = 0;
  std::vector<Part> parts;
  std::vector<Joint> joints;

  std::size_t part_count() const { return parts.size(); }
};

/// Throws std::invalid_argument unless joints form a tree rooted at `root`.
void validate_tree(const ArticulatedObject& obj);

/// Parts visited parent-before-child; the joint index that reaches each part
/// (-1 for the root) is returned through `via_joint`.
std::vector<int> topological_order(const ArticulatedObject& obj, std::vector<int>* via_joint = nullptr);

/// Sorts joints by child index and recomputes the root. Pure bookkeeping.
void canonicalize(ArticulatedObject& obj);

/// Normalizes the direction and removes the momentum component along it.
/// Throws std::invalid_argument("degenerate joint axis") when |l| <= 1e-8.
PluckerAxis project_to_plucker(const Vec6& v);

/// Re-expresses a global axis in the frame of a part whose part->global pose is
/// `parent_pose`.
PluckerAxis axis_to_parent_frame(const PluckerAxis& axis_global, const RigidTransform& parent_pose);

/// Relative motion of a screw: rotation `theta` about the axis line combined
/// with translation `d` along it.
RigidTransform screw_transform(const PluckerAxis& axis, const JointState& state);

/// Global part poses for per-joint states (indexed like obj.joints). All-zero
/// states reproduce the rest poses.
std::vector<RigidTransform> forward_kinematics(const ArticulatedObject& obj,
                                               const std::vector<JointState>& states);

using StateSet = std::vector<JointState>;

std::vector<StateSet> sample_joint_states(const ArticulatedObject& obj, int count,
                                          std::mt19937_64& rng);

/// Seed tuple for deterministic surface sampling.
struct SampleKey {
  std::uint64_t object_id = 0;
  std::uint64_t state_index = 0;
  std::uint64_t seed = 0;
};

struct PosedInstance {
  std::vector<RigidTransform> part_poses;
  Eigen::Matrix3Xd points;         // global frame, one column per point
  std::vector<int> point_part;     // owning part for each column
};

/// Area-weighted uniform points on every part box surface, posed by FK.
/// Throws std::invalid_argument on a non-positive-area box.
PosedInstance instantiate(const ArticulatedObject& obj, const std::vector<JointState>& states,
                          int n_points, const SampleKey& key);

struct BoxMesh {
  std::vector<Vec3> vertices;                 // 8 per part
  std::vector<std::array<int, 3>> triangles;  // 12 per part, 0-based into vertices
  std::vector<int> triangle_part;
};

BoxMesh posed_box_mesh(const ArticulatedObject& obj, const std::vector<RigidTransform>& poses);

/// Content hash over every numeric field; identical objects hash identically.
std::uint64_t object_fingerprint(const ArticulatedObject& obj);

/// Translates and uniformly scales the object so its rest-pose boxes fit the
/// [-1,1]^3 cube, centered. Axes and prismatic ranges are transformed along.
void normalize_object_frame(ArticulatedObject& obj);

}  // namespace artdiff
