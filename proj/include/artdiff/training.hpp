#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "artdiff/denoiser.hpp"
#include "artdiff/diffusion.hpp"

namespace artdiff {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  int epoch_repeat = 1;  // passes over the training rows per epoch
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool weighted_loss = false;
  ScheduleConfig schedule = ScheduleConfig::desk();
  int checkpoint_interval = 0;  // epochs between checkpoint callbacks, 0 = never
  double grad_clip = 10.0;      // global L2 norm, <= 0 disables
  std::uint64_t val_seed = 0x5eed;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  long step = 0;  // optimizer steps completed at the end of the epoch
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_loss;
};

/// Everything needed to continue training exactly where it stopped.
struct TrainState {
  Eigen::VectorXd params;
  AdamState adam;
  long step = 0;
  int epoch = 0;  // completed epochs
  Eigen::VectorXd best_params;
  double best_val = 0.0;
  bool has_best = false;
  std::vector<EpochRecord> history;

  static TrainState fresh(const Eigen::VectorXd& init);
};

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const TrainState&)> on_checkpoint;
};

/// Runs epochs state.epoch+1 .. cfg.epochs on the rows of `train_rows`
/// (diffusion-space vectors). With validation rows the parameters of the
/// lowest-loss epoch are kept as the best ones; without them no best is
/// recorded. Throws std::runtime_error on a non-finite loss.
void train(TrainState& state, const DenoiserConfig& model_cfg, const Eigen::MatrixXd& train_rows,
           const Eigen::MatrixXd& val_rows, const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Mean loss over the validation rows with a fixed t/noise seed.
/// Throws std::invalid_argument on an empty set.
double evaluate_val(const NoisePredictor& model, const Eigen::MatrixXd& val_rows,
                    const NoiseSchedule& schedule, bool weighted, std::uint64_t seed);

/// Optimizer steps in one epoch over `rows` training rows.
long steps_per_epoch(const TrainConfig& cfg, long rows);

/// CSV header plus rows `step,epoch,train_loss,val_loss` (val empty if absent).
void write_log_header(std::ostream& os);
void write_log_row(std::ostream& os, const EpochRecord& r);

/// Scales `grads` in place so its L2 norm is at most max_norm; returns the
/// norm before clipping.
double clip_global_norm(Eigen::VectorXd& grads, double max_norm);

}  // namespace artdiff
