#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "artdiff/kinematics.hpp"

namespace artdiff {

/// Wavefront OBJ with one group `part_<k>` per part.
void write_obj(const BoxMesh& mesh, std::ostream& os);

/// States sweeping every joint from its lower to its upper bound, `frames`
/// evenly spaced samples (a single frame is the rest state).
std::vector<StateSet> animation_states(const ArticulatedObject& obj, int frames);

/// Writes frame_0000.obj, frame_0001.obj, ... into `dir`; returns the paths.
std::vector<std::filesystem::path> write_animation(const ArticulatedObject& obj, int frames,
                                                   const std::filesystem::path& dir);

}  // namespace artdiff
