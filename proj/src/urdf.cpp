#include "artdiff/urdf.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace artdiff {

namespace {

namespace pt = boost::property_tree;

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string triple(const Vec3& v) { return fmt(v.x()) + " " + fmt(v.y()) + " " + fmt(v.z()); }

std::vector<double> numbers(const std::string& s, const std::string& what) {
  std::istringstream is(s);
  std::vector<double> out;
  double v;
  while (is >> v) out.push_back(v);
  if (!is.eof()) throw std::runtime_error("urdf: cannot parse numbers in " + what + ": '" + s + "'");
  return out;
}

Vec3 vec3(const std::string& s, const std::string& what) {
  const auto v = numbers(s, what);
  if (v.size() != 3) throw std::runtime_error("urdf: " + what + " needs 3 numbers");
  return {v[0], v[1], v[2]};
}

RigidTransform read_origin(const pt::ptree& parent) {
  RigidTransform T;
  if (auto o = parent.get_child_optional("origin")) {
    T.t = vec3(o->get<std::string>("<xmlattr>.xyz", "0 0 0"), "origin xyz");
    T.R = rpy_to_matrix(vec3(o->get<std::string>("<xmlattr>.rpy", "0 0 0"), "origin rpy"));
  }
  return T;
}

// Frame of part k's link at rest: the root link is the object frame, every
// other link sits at the point of its joint axis nearest to the part center.
RigidTransform link_frame(const ArticulatedObject& obj, int k, const std::vector<int>& via) {
  const Part& p = obj.parts[k];
  const RigidTransform rest = p.rest_pose();
  if (via[k] < 0) return RigidTransform::identity();
  const PluckerAxis& a = obj.joints[via[k]].axis;
  const Vec3 foot = a.foot();
  return {rest.R, foot + (p.translation - foot).dot(a.l) * a.l};
}

void write_limit(std::ostringstream& os, const Range& r) {
  os << "    <limit lower=\"" << fmt(r.lo) << "\" upper=\"" << fmt(r.hi)
     << "\" effort=\"1\" velocity=\"1\"/>\n";
}

struct RawJoint {
  std::string name, type, parent, child;
  RigidTransform origin;
  Vec3 axis = Vec3::UnitX();
  Range limit;
};

}  // namespace

Mat3 rpy_to_matrix(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 matrix_to_rpy(const Mat3& R) {
  // Yaw first, then roll and pitch from Rz(yaw)^T R; stays accurate near
  // pitch = +-pi/2, where yaw is arbitrary and roll absorbs the rest.
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const double roll = std::atan2(sy * R(0, 2) - cy * R(1, 2), cy * R(1, 1) - sy * R(0, 1));
  const double pitch = std::atan2(-R(2, 0), cy * R(0, 0) + sy * R(1, 0));
  return {roll, pitch, yaw};
}

std::string export_urdf(const ArticulatedObject& obj, const std::string& robot_name) {
  std::vector<int> via;
  const std::vector<int> order = topological_order(obj, &via);
  const int n = static_cast<int>(obj.parts.size());
  std::vector<RigidTransform> frames(n);
  for (int k = 0; k < n; ++k) frames[k] = link_frame(obj, k, via);

  std::ostringstream os;
  os << "<?xml version=\"1.0\"?>\n<robot name=\"" << robot_name << "\">\n";
  for (int k = 0; k < n; ++k) {
    const Part& p = obj.parts[k];
    const RigidTransform visual = frames[k].inverse() * p.rest_pose();
    os << "  <link name=\"part_" << k << "\">\n"
       << "    <visual>\n"
       << "      <origin xyz=\"" << triple(visual.t) << "\" rpy=\"" << triple(matrix_to_rpy(visual.R)) << "\"/>\n"
       << "      <geometry><box size=\"" << triple(p.bbox) << "\"/></geometry>\n"
       << "    </visual>\n";
    if (p.latent.size() > 0) {
      os << "    <shape_code values=\"";
      for (Eigen::Index c = 0; c < p.latent.size(); ++c) os << (c ? " " : "") << fmt(p.latent[c]);
      os << "\"/>\n";
    }
    os << "  </link>\n";
  }
  for (int k : order) {
    if (via[k] < 0) continue;
    const Joint& j = obj.joints[via[k]];
    const RigidTransform origin = frames[j.parent].inverse() * frames[k];
    const PluckerAxis in_parent = axis_to_parent_frame(j.axis, frames[j.parent]);
    const Vec3 axis = origin.R.transpose() * in_parent.l;
    const std::string parent = "part_" + std::to_string(j.parent);
    const std::string child = "part_" + std::to_string(k);
    const std::string origin_xml =
        "    <origin xyz=\"" + triple(origin.t) + "\" rpy=\"" + triple(matrix_to_rpy(origin.R)) + "\"/>\n";
    const std::string axis_xml = "    <axis xyz=\"" + triple(axis) + "\"/>\n";
    const bool slides = j.prismatic.lo != 0.0 || j.prismatic.hi != 0.0;
    const bool turns = j.revolute.lo != 0.0 || j.revolute.hi != 0.0;
    if (slides && turns) {
      const std::string slide = child + "_slide";
      os << "  <link name=\"" << slide << "\"/>\n";
      os << "  <joint name=\"joint_" << k << "_prismatic\" type=\"prismatic\">\n"
         << "    <parent link=\"" << parent << "\"/>\n    <child link=\"" << slide << "\"/>\n"
         << origin_xml << axis_xml;
      write_limit(os, j.prismatic);
      os << "  </joint>\n";
      os << "  <joint name=\"joint_" << k << "_revolute\" type=\"revolute\">\n"
         << "    <parent link=\"" << slide << "\"/>\n    <child link=\"" << child << "\"/>\n"
         << "    <origin xyz=\"0 0 0\" rpy=\"0 0 0\"/>\n"
         << axis_xml;
      write_limit(os, j.revolute);
      os << "  </joint>\n";
    } else {
      const bool prismatic = slides;
      os << "  <joint name=\"joint_" << k << "\" type=\"" << (prismatic ? "prismatic" : "revolute") << "\">\n"
         << "    <parent link=\"" << parent << "\"/>\n    <child link=\"" << child << "\"/>\n"
         << origin_xml << axis_xml;
      write_limit(os, prismatic ? j.prismatic : j.revolute);
      os << "  </joint>\n";
    }
  }
  os << "</robot>\n";
  return os.str();
}

namespace {

ArticulatedObject parse_tree(const pt::ptree& tree);

}  // namespace

ArticulatedObject parse_urdf(const std::string& xml) {
  pt::ptree tree;
  std::istringstream is(xml);
  try {
    pt::read_xml(is, tree);
  } catch (const pt::xml_parser_error& e) {
    throw std::runtime_error(std::string("urdf: malformed XML: ") + e.what());
  }
  try {
    return parse_tree(tree);
  } catch (const pt::ptree_error& e) {
    throw std::runtime_error(std::string("urdf: missing element or attribute: ") + e.what());
  }
}

namespace {

ArticulatedObject parse_tree(const pt::ptree& tree) {
  const auto robot = tree.get_child_optional("robot");
  if (!robot) throw std::runtime_error("urdf: missing <robot> element");

  ArticulatedObject obj;
  std::map<std::string, int> part_of_link;
  std::map<std::string, bool> is_link;
  std::vector<RigidTransform> visual_offset;
  std::vector<RawJoint> raw;
  for (const auto& [tag, node] : *robot) {
    if (tag == "link") {
      const std::string name = node.get<std::string>("<xmlattr>.name");
      is_link[name] = true;
      const auto visual = node.get_child_optional("visual");
      if (!visual) continue;  // massless intermediate link
      Part p;
      p.bbox = vec3(visual->get<std::string>("geometry.box.<xmlattr>.size"), "box size of " + name);
      if (auto code = node.get_optional<std::string>("shape_code.<xmlattr>.values")) {
        const auto v = numbers(*code, "shape_code of " + name);
        p.latent = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
      part_of_link[name] = static_cast<int>(obj.parts.size());
      obj.parts.push_back(p);
      visual_offset.push_back(read_origin(*visual));
    } else if (tag == "joint") {
      RawJoint j;
      j.name = node.get<std::string>("<xmlattr>.name");
      j.type = node.get<std::string>("<xmlattr>.type");
      j.parent = node.get<std::string>("parent.<xmlattr>.link");
      j.child = node.get<std::string>("child.<xmlattr>.link");
      j.origin = read_origin(node);
      j.axis = vec3(node.get<std::string>("axis.<xmlattr>.xyz", "1 0 0"), "axis of " + j.name);
      j.limit = {node.get<double>("limit.<xmlattr>.lower", 0.0), node.get<double>("limit.<xmlattr>.upper", 0.0)};
      if (j.type != "prismatic" && j.type != "revolute") {
        throw std::runtime_error("urdf: joint " + j.name + " has unsupported type '" + j.type + "'");
      }
      raw.push_back(j);
    }
  }
  if (obj.parts.empty()) throw std::runtime_error("urdf: no links with geometry");

  std::map<std::string, const RawJoint*> joint_into;
  for (const RawJoint& j : raw) {
    if (!is_link.count(j.parent) || !is_link.count(j.child)) {
      throw std::runtime_error("urdf: joint " + j.name + " references an undeclared link");
    }
    if (joint_into.count(j.child)) throw std::runtime_error("urdf: link " + j.child + " has two parents");
    joint_into[j.child] = &j;
  }

  // Global frame of every link at rest, resolved parent-first.
  std::map<std::string, RigidTransform> frame;
  std::function<RigidTransform(const std::string&, int)> resolve = [&](const std::string& link, int depth) {
    if (depth > static_cast<int>(raw.size()) + 1) throw std::runtime_error("kinematic loop in urdf");
    if (auto it = frame.find(link); it != frame.end()) return it->second;
    auto jt = joint_into.find(link);
    const RigidTransform T =
        jt == joint_into.end() ? RigidTransform::identity() : resolve(jt->second->parent, depth + 1) * jt->second->origin;
    frame[link] = T;
    return T;
  };

  int roots = 0;
  for (const auto& [name, k] : part_of_link) {
    const RigidTransform G = resolve(name, 0);
    const RigidTransform pose = G * visual_offset[k];
    obj.parts[k].translation = pose.t;
    obj.parts[k].rotation = pose.rotation_vector();
    if (!joint_into.count(name)) {
      obj.root = k;
      ++roots;
    }
  }
  if (roots != 1) throw std::runtime_error("urdf: expected exactly one root link");

  for (const auto& [name, k] : part_of_link) {
    auto it = joint_into.find(name);
    if (it == joint_into.end()) continue;
    const RawJoint* last = it->second;
    const RawJoint* first = last;
    std::optional<Range> prismatic, revolute;
    (last->type == "prismatic" ? prismatic : revolute) = last->limit;
    if (!part_of_link.count(last->parent)) {
      auto up = joint_into.find(last->parent);
      if (up == joint_into.end()) throw std::runtime_error("urdf: intermediate link " + last->parent + " has no parent");
      first = up->second;
      if (first->type == last->type || !part_of_link.count(first->parent)) {
        throw std::runtime_error("urdf: unsupported joint chain into " + name);
      }
      (first->type == "prismatic" ? prismatic : revolute) = first->limit;
    }
    const RigidTransform G = resolve(name, 0);
    Joint j;
    j.parent = part_of_link.at(first->parent);
    j.child = k;
    j.axis = PluckerAxis::through(G.t, (G.R * last->axis).normalized());
    j.prismatic = prismatic.value_or(Range{});
    j.revolute = revolute.value_or(Range{});
    obj.joints.push_back(j);
  }
  canonicalize(obj);
  validate_tree(obj);
  return obj;
}

}  // namespace

}  // namespace artdiff
