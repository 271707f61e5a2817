#include "artdiff/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "artdiff/hash.hpp"

namespace artdiff {

Vec6 PluckerAxis::as_vector() const {
  Vec6 v;
  v << l, m;
  return v;
}

PluckerAxis PluckerAxis::through(const Vec3& point, const Vec3& direction) {
  const Vec3 l = direction.normalized();
  return {l, point.cross(l)};
}

Mat3 axis_angle_matrix(const Vec3& l, double theta) {
  return Eigen::AngleAxisd(theta, l).toRotationMatrix();
}

RigidTransform RigidTransform::from_axis_angle(const Vec3& rotvec, const Vec3& t) {
  const double angle = rotvec.norm();
  if (angle == 0.0) return {Mat3::Identity(), t};
  return {axis_angle_matrix(rotvec / angle, angle), t};
}

Vec3 RigidTransform::rotation_vector() const {
  const Eigen::AngleAxisd aa(R);
  return aa.axis() * aa.angle();
}

namespace {

std::string joint_label(std::size_t index, const Joint& j) {
  return "joint " + std::to_string(index) + " (" + std::to_string(j.parent) + "->" +
         std::to_string(j.child) + ")";
}

}  // namespace

std::vector<int> topological_order(const ArticulatedObject& obj, std::vector<int>* via_joint) {
  const int n = static_cast<int>(obj.parts.size());
  if (n == 0) throw std::invalid_argument("articulated object has no parts");
  if (obj.joints.size() != static_cast<std::size_t>(n - 1)) {
    throw std::invalid_argument("a tree over " + std::to_string(n) + " parts needs " +
                                std::to_string(n - 1) + " joints, got " +
                                std::to_string(obj.joints.size()));
  }
  if (obj.root < 0 || obj.root >= n) throw std::invalid_argument("root index out of range");

  std::vector<int> parent_joint(n, -1);
  std::vector<std::vector<int>> children(n);
  for (std::size_t k = 0; k < obj.joints.size(); ++k) {
    const Joint& j = obj.joints[k];
    if (j.parent < 0 || j.parent >= n || j.child < 0 || j.child >= n) {
      throw std::invalid_argument(joint_label(k, j) + " references a missing part");
    }
    if (j.parent == j.child) throw std::invalid_argument(joint_label(k, j) + " is a self loop");
    if (j.child == obj.root) {
      throw std::invalid_argument(joint_label(k, j) + " gives the root a parent");
    }
    if (parent_joint[j.child] != -1) {
      throw std::invalid_argument("part " + std::to_string(j.child) + " has multiple parents");
    }
    parent_joint[j.child] = static_cast<int>(k);
    children[j.parent].push_back(j.child);
  }

  std::vector<int> order;
  order.reserve(n);
  order.push_back(obj.root);
  for (std::size_t head = 0; head < order.size(); ++head) {
    for (int c : children[order[head]]) order.push_back(c);
  }
  if (static_cast<int>(order.size()) != n) {
    throw std::invalid_argument("kinematic loop: joints do not form a connected tree");
  }
  if (via_joint) *via_joint = std::move(parent_joint);
  return order;
}

void validate_tree(const ArticulatedObject& obj) { (void)topological_order(obj); }

void canonicalize(ArticulatedObject& obj) {
  std::sort(obj.joints.begin(), obj.joints.end(),
            [](const Joint& a, const Joint& b) { return a.child < b.child; });
  std::vector<bool> has_parent(obj.parts.size(), false);
  for (const Joint& j : obj.joints) {
    if (j.child >= 0 && j.child < static_cast<int>(has_parent.size())) has_parent[j.child] = true;
  }
  for (std::size_t i = 0; i < has_parent.size(); ++i) {
    if (!has_parent[i]) {
      obj.root = static_cast<int>(i);
      break;
    }
  }
}

PluckerAxis project_to_plucker(const Vec6& v) {
  const Vec3 l_raw = v.head<3>();
  const double norm = l_raw.norm();
  if (!(norm > 1e-8)) throw std::invalid_argument("degenerate joint axis");
  const Vec3 l = l_raw / norm;
  const Vec3 m_raw = v.tail<3>();
  return {l, m_raw - m_raw.dot(l) * l};
}

PluckerAxis axis_to_parent_frame(const PluckerAxis& axis_global, const RigidTransform& parent_pose) {
  const RigidTransform to_parent = parent_pose.inverse();
  const Vec3 l = to_parent.R * axis_global.l;
  return {l, to_parent.R * axis_global.m + to_parent.t.cross(l)};
}

RigidTransform screw_transform(const PluckerAxis& axis, const JointState& state) {
  const Mat3 R = axis_angle_matrix(axis.l, state.theta);
  const Vec3 t = (Mat3::Identity() - R) * axis.foot() + state.d * axis.l;
  return {R, t};
}

std::vector<RigidTransform> forward_kinematics(const ArticulatedObject& obj,
                                               const std::vector<JointState>& states) {
  if (states.size() != obj.joints.size()) {
    throw std::invalid_argument("forward_kinematics: expected " +
                                std::to_string(obj.joints.size()) + " joint states, got " +
                                std::to_string(states.size()));
  }
  std::vector<int> via_joint;
  const std::vector<int> order = topological_order(obj, &via_joint);

  std::vector<RigidTransform> rest(obj.parts.size());
  for (std::size_t i = 0; i < obj.parts.size(); ++i) rest[i] = obj.parts[i].rest_pose();

  std::vector<RigidTransform> global(obj.parts.size());
  global[obj.root] = rest[obj.root];
  for (std::size_t k = 1; k < order.size(); ++k) {
    const int c = order[k];
    const Joint& joint = obj.joints[via_joint[c]];
    const int p = joint.parent;
    const PluckerAxis local_axis = axis_to_parent_frame(joint.axis, rest[p]);
    const RigidTransform motion = screw_transform(local_axis, states[via_joint[c]]);
    const RigidTransform offset = rest[p].inverse() * rest[c];
    global[c] = global[p] * motion * offset;
  }
  return global;
}

std::vector<StateSet> sample_joint_states(const ArticulatedObject& obj, int count,
                                          std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<StateSet> out(std::max(count, 0));
  for (auto& set : out) {
    set.resize(obj.joints.size());
    for (std::size_t k = 0; k < obj.joints.size(); ++k) {
      const Joint& j = obj.joints[k];
      const double u_rev = unit(rng);
      const double u_pri = unit(rng);
      set[k].theta = j.revolute.lo + u_rev * j.revolute.width();
      set[k].d = j.prismatic.lo + u_pri * j.prismatic.width();
    }
  }
  return out;
}

namespace {

double box_area(const Vec3& b) { return 2.0 * (b.x() * b.y() + b.y() * b.z() + b.x() * b.z()); }

// Largest-remainder apportionment; ties go to the lower index.
std::vector<int> apportion(const std::vector<double>& weights, int total) {
  const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<int> counts(weights.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  int assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const double exact = total * weights[i] / sum;
    counts[i] = static_cast<int>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - counts[i], i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < total && k < remainders.size(); ++k, ++assigned) {
    ++counts[remainders[k].second];
  }
  return counts;
}

}  // namespace

PosedInstance instantiate(const ArticulatedObject& obj, const std::vector<JointState>& states,
                          int n_points, const SampleKey& key) {
  PosedInstance out;
  out.part_poses = forward_kinematics(obj, states);

  std::vector<double> areas(obj.parts.size());
  for (std::size_t i = 0; i < obj.parts.size(); ++i) {
    const Vec3& b = obj.parts[i].bbox;
    if (!b.allFinite() || (b.array() < 0.0).any() || !(box_area(b) > 0.0)) {
      throw std::invalid_argument("part " + std::to_string(i) + " has a zero-area box");
    }
    areas[i] = box_area(b);
  }
  const std::vector<int> counts = apportion(areas, std::max(n_points, 0));

  out.points.resize(3, std::accumulate(counts.begin(), counts.end(), 0));
  out.point_part.reserve(out.points.cols());
  std::uniform_real_distribution<double> unit(-0.5, 0.5);
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < obj.parts.size(); ++i) {
    const Vec3& b = obj.parts[i].bbox;
    std::mt19937_64 rng(combine_seeds({key.object_id, key.state_index, key.seed, i}));
    // face pairs: normal x, y, z
    const std::array<double, 3> face_area{b.y() * b.z(), b.x() * b.z(), b.x() * b.y()};
    std::discrete_distribution<int> pick_axis(face_area.begin(), face_area.end());
    std::bernoulli_distribution pick_side(0.5);
    const RigidTransform& pose = out.part_poses[i];
    for (int k = 0; k < counts[i]; ++k) {
      const int axis = pick_axis(rng);
      const bool positive = pick_side(rng);
      Vec3 local;
      for (int a = 0; a < 3; ++a) local[a] = unit(rng) * b[a];
      local[axis] = (positive ? 0.5 : -0.5) * b[axis];
      out.points.col(col++) = pose.apply(local);
      out.point_part.push_back(static_cast<int>(i));
    }
  }
  return out;
}

BoxMesh posed_box_mesh(const ArticulatedObject& obj, const std::vector<RigidTransform>& poses) {
  static constexpr std::array<std::array<int, 3>, 12> kFaces{{{0, 2, 1}, {0, 3, 2},
                                                              {4, 5, 6}, {4, 6, 7},
                                                              {0, 1, 5}, {0, 5, 4},
                                                              {3, 7, 6}, {3, 6, 2},
                                                              {0, 4, 7}, {0, 7, 3},
                                                              {1, 2, 6}, {1, 6, 5}}};
  BoxMesh mesh;
  for (std::size_t i = 0; i < obj.parts.size(); ++i) {
    const Vec3 h = 0.5 * obj.parts[i].bbox;
    const int base = static_cast<int>(mesh.vertices.size());
    const std::array<Vec3, 8> corners{Vec3(-h.x(), -h.y(), -h.z()), Vec3(h.x(), -h.y(), -h.z()),
                                      Vec3(h.x(), h.y(), -h.z()),   Vec3(-h.x(), h.y(), -h.z()),
                                      Vec3(-h.x(), -h.y(), h.z()),  Vec3(h.x(), -h.y(), h.z()),
                                      Vec3(h.x(), h.y(), h.z()),    Vec3(-h.x(), h.y(), h.z())};
    for (const Vec3& c : corners) mesh.vertices.push_back(poses[i].apply(c));
    for (const auto& f : kFaces) {
      mesh.triangles.push_back({base + f[0], base + f[1], base + f[2]});
      mesh.triangle_part.push_back(static_cast<int>(i));
    }
  }
  return mesh;
}

std::uint64_t object_fingerprint(const ArticulatedObject& obj) {
  Fnv1a h;
  h.update(static_cast<std::int64_t>(obj.root));
  h.update(static_cast<std::int64_t>(obj.parts.size()));
  for (const Part& p : obj.parts) {
    h.update(std::span<const double>(p.translation.data(), 3));
    h.update(std::span<const double>(p.rotation.data(), 3));
    h.update(std::span<const double>(p.bbox.data(), 3));
    h.update(static_cast<std::int64_t>(p.latent.size()));
    h.update(std::span<const double>(p.latent.data(), p.latent.size()));
  }
  h.update(static_cast<std::int64_t>(obj.joints.size()));
  for (const Joint& j : obj.joints) {
    h.update(static_cast<std::int64_t>(j.parent));
    h.update(static_cast<std::int64_t>(j.child));
    h.update(std::span<const double>(j.axis.l.data(), 3));
    h.update(std::span<const double>(j.axis.m.data(), 3));
    for (double v : {j.prismatic.lo, j.prismatic.hi, j.revolute.lo, j.revolute.hi}) h.update(v);
  }
  return h.digest();
}

void normalize_object_frame(ArticulatedObject& obj) {
  if (obj.parts.empty()) return;
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Part& p : obj.parts) {
    const RigidTransform pose = p.rest_pose();
    for (int corner = 0; corner < 8; ++corner) {
      const Vec3 local(((corner & 1) ? 0.5 : -0.5) * p.bbox.x(),
                       ((corner & 2) ? 0.5 : -0.5) * p.bbox.y(),
                       ((corner & 4) ? 0.5 : -0.5) * p.bbox.z());
      const Vec3 g = pose.apply(local);
      lo = lo.cwiseMin(g);
      hi = hi.cwiseMax(g);
    }
  }
  const Vec3 center = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo).maxCoeff();
  if (!(half > 0.0)) return;
  const double s = 1.0 / half;
  for (Part& p : obj.parts) {
    p.translation = s * (p.translation - center);
    p.bbox *= s;
  }
  for (Joint& j : obj.joints) {
    j.axis.m = s * (j.axis.m - center.cross(j.axis.l));
    j.prismatic.lo *= s;
    j.prismatic.hi *= s;
  }
}

}  // namespace artdiff
