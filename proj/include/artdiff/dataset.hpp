#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "artdiff/artgraph.hpp"
#include "artdiff/kinematics.hpp"

namespace artdiff {

enum class Family { kCabinetDrawers, kCabinetDoors, kLaptop, kScissors, kMixed };

/// Accepts "cabinet-drawers", "cabinet-doors", "cabinet" (either kind),
/// "laptop", "scissors", "mixed".
Family parse_family(std::string_view name);
std::string_view to_string(Family f);

struct SynthSpec {
  Family family = Family::kMixed;
  int min_parts = 2;
  int max_parts = 8;
  double min_size = 0.5;  // overall extent before frame normalization
  double max_size = 1.5;
  int latent_dim = 8;
  std::uint64_t seed = 0;
  bool cabinet_any = false;  // "cabinet": drawers or doors per object

  void validate() const;
};

/// Deterministic signature of the box proportions, `width` values.
Eigen::VectorXd shape_signature(const Vec3& bbox, int width);

/// Objects are independent: object k depends only on (spec.seed, k).
std::vector<ArticulatedObject> generate_synthetic(const SynthSpec& spec, int n);
ArticulatedObject generate_one(const SynthSpec& spec, std::uint64_t index);

struct Split {
  std::vector<ArticulatedObject> train, val, test;
};

/// Largest-remainder sizes; the assignment is a seeded shuffle.
Split split_corpus(const std::vector<ArticulatedObject>& corpus, const std::vector<double>& ratios,
                   std::uint64_t seed);
std::vector<int> split_sizes(int n, const std::vector<double>& ratios);

std::string corpus_to_json(const std::vector<ArticulatedObject>& corpus);
/// Throws std::runtime_error naming the record (and its line) that fails the schema.
std::vector<ArticulatedObject> corpus_from_json(const std::string& text);

void save_corpus(const std::vector<ArticulatedObject>& corpus, const std::filesystem::path& path);
std::vector<ArticulatedObject> load_corpus(const std::filesystem::path& path);

/// Diffusion-space rows for a set of objects.
Eigen::MatrixXd encode_rows(const std::vector<ArticulatedObject>& objects, const GraphConfig& cfg,
                            const NormalizationStats& stats);
NormalizationStats stats_for(const std::vector<ArticulatedObject>& train, const GraphConfig& cfg);

}  // namespace artdiff
