#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace artdiff {

/// Tables indexed by step t in [1, T]; slot 0 is unused.
struct NoiseSchedule {
  int T = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> sigma;

  /// Builds the tables from explicit betas (non-decreasing, inside (0,1)).
  static NoiseSchedule from_betas(const std::vector<double>& betas);
};

struct ScheduleConfig {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  /// 100-step schedule with betas scaled by 1000/T so the terminal state is
  /// still close to N(0, I).
  static ScheduleConfig desk() { return {100, 1e-3, 0.2}; }
  bool operator==(const ScheduleConfig&) const = default;
};

/// Linear beta interpolation. Requires 0 < beta_start < beta_end < 1 (T == 1
/// uses beta_start) and throws std::invalid_argument otherwise.
NoiseSchedule make_schedule(int T, double beta_start, double beta_end);
inline NoiseSchedule make_schedule(const ScheduleConfig& c) {
  return make_schedule(c.steps, c.beta_start, c.beta_end);
}

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps. Works row-wise on batches too.
Eigen::VectorXd q_sample(const Eigen::VectorXd& x0, int t, const Eigen::VectorXd& eps,
                         const NoiseSchedule& s);

/// One forward-chain step x_t ~ N(sqrt(1 - beta_t) x_{t-1}, beta_t I).
Eigen::VectorXd q_step(const Eigen::VectorXd& x_prev, int t, const Eigen::VectorXd& noise,
                       const NoiseSchedule& s);

/// Ancestral update x_{t-1} = (x_t - beta_t / sqrt(1 - abar_t) eps) / sqrt(alpha_t) + sigma_t z.
/// z is ignored at t == 1.
Eigen::VectorXd reverse_step(const Eigen::VectorXd& x_t, int t, const Eigen::VectorXd& eps_pred,
                             const Eigen::VectorXd& z, const NoiseSchedule& s);

/// Weight that turns the simple loss into the variational bound term at step t.
double loss_weight(int t, const NoiseSchedule& s);

/// Anything that predicts the noise in a batch; rows are samples.
class NoisePredictor {
 public:
  virtual ~NoisePredictor() = default;
  virtual Eigen::MatrixXd predict(const Eigen::MatrixXd& x_t, std::span<const int> t) const = 0;
};

/// Noised batch for one training step.
struct NoisedBatch {
  Eigen::MatrixXd x_t;
  Eigen::MatrixXd eps;
  std::vector<int> t;
};

/// Draws t ~ U{1..T} and eps ~ N(0, I) per row.
NoisedBatch draw_noised_batch(const Eigen::MatrixXd& x0, std::mt19937_64& rng, const NoiseSchedule& s);

struct LossResult {
  double loss = 0.0;
  Eigen::MatrixXd grad_eps_hat;  // dloss / d eps_hat, same shape as the batch
};

/// Mean over rows of w_t * |eps - eps_hat|^2, with w_t = 1 unless `weighted`.
LossResult evaluate_loss(const NoisedBatch& batch, const Eigen::MatrixXd& eps_hat,
                         const NoiseSchedule& s, bool weighted);

LossResult training_loss(const Eigen::MatrixXd& x0, const NoisePredictor& model,
                         std::mt19937_64& rng, const NoiseSchedule& s, bool weighted);

/// Unconditional ancestral sampling: n rows of width dim.
Eigen::MatrixXd sample(const NoisePredictor& model, const NoiseSchedule& s, int n, int dim,
                       std::mt19937_64& rng);

/// Inpainting-style sampling. Entries with mask == 1 follow q(x_{t-1} | x_known)
/// at every step and equal x_known exactly at the end. `x_known` is either a
/// single row broadcast to all n samples or an n-row matrix.
Eigen::MatrixXd conditioned_sample(const NoisePredictor& model, const NoiseSchedule& s,
                                   const Eigen::MatrixXd& x_known, const Eigen::VectorXd& mask,
                                   int n, std::mt19937_64& rng);

/// Predicts the exact noise of a stored clean batch; used to validate samplers.
class OracleNoisePredictor final : public NoisePredictor {
 public:
  OracleNoisePredictor(Eigen::MatrixXd x0, const NoiseSchedule& s) : x0_(std::move(x0)), s_(s) {}
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x_t, std::span<const int> t) const override;

 private:
  Eigen::MatrixXd x0_;
  NoiseSchedule s_;
};

class ZeroNoisePredictor final : public NoisePredictor {
 public:
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x_t, std::span<const int>) const override {
    return Eigen::MatrixXd::Zero(x_t.rows(), x_t.cols());
  }
};

}  // namespace artdiff
