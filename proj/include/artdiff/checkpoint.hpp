#pragma once

#include <filesystem>
#include <string>

#include "artdiff/artgraph.hpp"
#include "artdiff/denoiser.hpp"
#include "artdiff/training.hpp"

namespace artdiff {

/// A trained model plus what is needed to sample from it or resume training.
struct Checkpoint {
  static constexpr int kVersion = 1;

  GraphConfig graph;
  NormalizationStats stats;
  DenoiserConfig denoiser;
  TrainConfig train;
  TrainState state;

  /// Best-validation parameters when available, else the latest ones.
  const Eigen::VectorXd& model_params() const {
    return state.has_best ? state.best_params : state.params;
  }
  Denoiser model() const { return Denoiser(denoiser, model_params(), schedule()); }
  NoiseSchedule schedule() const { return make_schedule(train.schedule); }
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
/// Throws std::runtime_error on malformed text or an unsupported version.
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace artdiff
