#include "artdiff/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>

#include "artdiff/hash.hpp"

namespace artdiff {

namespace {

constexpr std::uint64_t kShuffleTag = 0x5348;
constexpr std::uint64_t kStepTag = 0x5354;
constexpr int kValChunk = 256;

Eigen::MatrixXd gather(const Eigen::MatrixXd& rows, const std::vector<int>& idx, std::size_t begin,
                       std::size_t end) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), rows.cols());
  for (std::size_t k = begin; k < end; ++k) out.row(static_cast<Eigen::Index>(k - begin)) = rows.row(idx[k]);
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch size must be at least 1");
  if (epochs < 0) throw std::invalid_argument("epochs must be non-negative");
  if (epoch_repeat < 1) throw std::invalid_argument("epoch_repeat must be at least 1");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (checkpoint_interval < 0) throw std::invalid_argument("checkpoint interval must be non-negative");
}

long steps_per_epoch(const TrainConfig& cfg, long rows) {
  const long total = rows * cfg.epoch_repeat;
  return (total + cfg.batch_size - 1) / cfg.batch_size;
}

TrainState TrainState::fresh(const Eigen::VectorXd& init) {
  TrainState s;
  s.params = init;
  s.best_params = init;
  return s;
}

double clip_global_norm(Eigen::VectorXd& grads, double max_norm) {
  const double norm = grads.norm();
  if (max_norm > 0.0 && norm > max_norm) grads *= max_norm / norm;
  return norm;
}

double evaluate_val(const NoisePredictor& model, const Eigen::MatrixXd& val_rows,
                    const NoiseSchedule& schedule, bool weighted, std::uint64_t seed) {
  if (val_rows.rows() == 0) throw std::invalid_argument("validation set is empty");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (Eigen::Index start = 0; start < val_rows.rows(); start += kValChunk) {
    const Eigen::Index n = std::min<Eigen::Index>(kValChunk, val_rows.rows() - start);
    const NoisedBatch batch = draw_noised_batch(val_rows.middleRows(start, n), rng, schedule);
    total += evaluate_loss(batch, model.predict(batch.x_t, batch.t), schedule, weighted).loss *
             static_cast<double>(n);
  }
  return total / static_cast<double>(val_rows.rows());
}

void train(TrainState& state, const DenoiserConfig& model_cfg, const Eigen::MatrixXd& train_rows,
           const Eigen::MatrixXd& val_rows, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train_rows.rows() == 0) throw std::invalid_argument("training set is empty");
  if (train_rows.cols() != model_cfg.flat_dim()) {
    throw std::invalid_argument("training rows have " + std::to_string(train_rows.cols()) +
                                " channels, model expects " + std::to_string(model_cfg.flat_dim()));
  }
  if (val_rows.rows() > 0 && val_rows.cols() != train_rows.cols()) {
    throw std::invalid_argument("validation rows do not match the training width");
  }
  const NoiseSchedule schedule = make_schedule(cfg.schedule);
  Denoiser model(model_cfg, state.params, schedule);
  const int n = static_cast<int>(train_rows.rows());
  const AdamOptions adam{cfg.lr};

  for (int epoch = state.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<int> order;
    order.reserve(static_cast<std::size_t>(n) * cfg.epoch_repeat);
    for (int r = 0; r < cfg.epoch_repeat; ++r) {
      for (int i = 0; i < n; ++i) order.push_back(i);
    }
    std::mt19937_64 shuffle_rng(combine_seeds({cfg.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const Eigen::MatrixXd x0 = gather(train_rows, order, begin, end);
      std::mt19937_64 rng(combine_seeds({cfg.seed, kStepTag, static_cast<std::uint64_t>(state.step)}));
      const NoisedBatch batch = draw_noised_batch(x0, rng, schedule);
      ForwardCache cache;
      const Eigen::MatrixXd eps_hat = model.forward(batch.x_t, batch.t, &cache);
      const LossResult loss = evaluate_loss(batch, eps_hat, schedule, cfg.weighted_loss);
      if (!std::isfinite(loss.loss)) {
        throw std::runtime_error("training loss became non-finite at step " + std::to_string(state.step) +
                                 " (epoch " + std::to_string(epoch) + ")");
      }
      Eigen::VectorXd grads = model.backward(cache, loss.grad_eps_hat);
      clip_global_norm(grads, cfg.grad_clip);
      adam_step(model.params(), grads, state.adam, adam);
      ++state.step;
      loss_sum += loss.loss * static_cast<double>(end - begin);
    }
    state.params = model.params();
    state.epoch = epoch;

    EpochRecord rec;
    rec.step = state.step;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    if (val_rows.rows() > 0) {
      rec.val_loss = evaluate_val(model, val_rows, schedule, cfg.weighted_loss, cfg.val_seed);
      if (!state.has_best || *rec.val_loss < state.best_val) {
        state.best_val = *rec.val_loss;
        state.best_params = state.params;
        state.has_best = true;
      }
    }
    state.history.push_back(rec);
    if (hooks.on_epoch) hooks.on_epoch(rec);
    if (hooks.on_checkpoint && cfg.checkpoint_interval > 0 && epoch % cfg.checkpoint_interval == 0) {
      hooks.on_checkpoint(state);
    }
  }
}

void write_log_header(std::ostream& os) { os << "step,epoch,train_loss,val_loss\n"; }

void write_log_row(std::ostream& os, const EpochRecord& r) {
  os << r.step << ',' << r.epoch << ',' << r.train_loss << ',';
  if (r.val_loss) os << *r.val_loss;
  os << '\n';
}

}  // namespace artdiff
