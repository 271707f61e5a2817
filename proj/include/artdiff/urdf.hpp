#pragma once

#include <string>

#include "artdiff/kinematics.hpp"

namespace artdiff {

/// URDF text for a valid tree. Links are named part_<k>; a screw with both
/// ranges nonzero becomes a prismatic joint into a massless part_<k>_slide link
/// followed by a revolute joint about the same axis.
std::string export_urdf(const ArticulatedObject& obj, const std::string& robot_name = "artdiff_object");

/// Reads the subset written by export_urdf back into an object. Throws
/// std::runtime_error on unsupported or inconsistent input.
ArticulatedObject parse_urdf(const std::string& xml);

/// URDF fixed-axis roll/pitch/yaw (R = Rz(yaw) Ry(pitch) Rx(roll)).
Vec3 matrix_to_rpy(const Mat3& R);
Mat3 rpy_to_matrix(const Vec3& rpy);

}  // namespace artdiff
