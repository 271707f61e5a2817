#include "artdiff/mesh_io.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace artdiff {

void write_obj(const BoxMesh& mesh, std::ostream& os) {
  const auto old_precision = os.precision(17);
  for (const Vec3& v : mesh.vertices) os << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  int group = -1;
  for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
    if (mesh.triangle_part[f] != group) {
      group = mesh.triangle_part[f];
      os << "g part_" << group << '\n';
    }
    const auto& t = mesh.triangles[f];
    os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
  }
  os.precision(old_precision);
}

std::vector<StateSet> animation_states(const ArticulatedObject& obj, int frames) {
  if (frames < 1) throw std::invalid_argument("animation needs at least one frame");
  std::vector<StateSet> out(frames, StateSet(obj.joints.size()));
  if (frames == 1) return out;
  for (int f = 0; f < frames; ++f) {
    const double s = static_cast<double>(f) / (frames - 1);
    for (std::size_t k = 0; k < obj.joints.size(); ++k) {
      const Joint& j = obj.joints[k];
      out[f][k].theta = j.revolute.lo + s * j.revolute.width();
      out[f][k].d = j.prismatic.lo + s * j.prismatic.width();
    }
  }
  return out;
}

std::vector<std::filesystem::path> write_animation(const ArticulatedObject& obj, int frames,
                                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> paths;
  const auto states = animation_states(obj, frames);
  for (int f = 0; f < frames; ++f) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.obj", f);
    const auto path = dir / name;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_obj(posed_box_mesh(obj, forward_kinematics(obj, states[f])), out);
    paths.push_back(path);
  }
  return paths;
}

}  // namespace artdiff
