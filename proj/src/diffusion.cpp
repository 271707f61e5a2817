#include "artdiff/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace artdiff {

namespace {

void check_step(int t, const NoiseSchedule& s) {
  if (t < 1 || t > s.T) {
    throw std::out_of_range("diffusion step " + std::to_string(t) + " outside [1, " +
                            std::to_string(s.T) + "]");
  }
}

Eigen::MatrixXd standard_normal(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Eigen::MatrixXd z(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) z(r, c) = n01(rng);
  }
  return z;
}

void reverse_rows(Eigen::MatrixXd& x, int t, const Eigen::MatrixXd& eps, const Eigen::MatrixXd* z,
                  const NoiseSchedule& s) {
  const double c_eps = s.beta[t] / std::sqrt(1.0 - s.alpha_bar[t]);
  const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha[t]);
  x = (x - c_eps * eps) * inv_sqrt_alpha;
  if (t > 1 && z != nullptr) x += s.sigma[t] * *z;
}

Eigen::MatrixXd broadcast_rows(const Eigen::MatrixXd& m, Eigen::Index n) {
  if (m.rows() == n) return m;
  if (m.rows() == 1) return m.replicate(n, 1);
  throw std::invalid_argument("known batch has " + std::to_string(m.rows()) +
                              " rows, expected 1 or " + std::to_string(n));
}

// Overwrites masked columns of x with src. Selection rather than blending so
// unmasked entries are untouched bit-for-bit.
void overwrite_known(Eigen::MatrixXd& x, const Eigen::MatrixXd& src, const Eigen::VectorXd& mask) {
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (mask[c] != 0.0) x.col(c) = src.col(c);
  }
}

Eigen::MatrixXd run_reverse(const NoisePredictor& model, const NoiseSchedule& s, int n, int dim,
                            std::mt19937_64& rng, const Eigen::MatrixXd* known,
                            const Eigen::VectorXd* mask) {
  Eigen::MatrixXd x = standard_normal(n, dim, rng);
  // Separate stream for the known-entry noise so an all-zero mask reproduces
  // the unconditional trajectory.
  std::mt19937_64 known_rng(rng());
  auto noised_known = [&](int t) -> Eigen::MatrixXd {
    if (t == 0) return *known;
    const Eigen::MatrixXd e = standard_normal(n, dim, known_rng);
    return std::sqrt(s.alpha_bar[t]) * *known + std::sqrt(1.0 - s.alpha_bar[t]) * e;
  };
  if (known) overwrite_known(x, noised_known(s.T), *mask);

  std::vector<int> steps(n);
  for (int t = s.T; t >= 1; --t) {
    std::fill(steps.begin(), steps.end(), t);
    const Eigen::MatrixXd eps = model.predict(x, steps);
    if (t > 1) {
      const Eigen::MatrixXd z = standard_normal(n, dim, rng);
      reverse_rows(x, t, eps, &z, s);
    } else {
      reverse_rows(x, t, eps, nullptr, s);
    }
    if (known) overwrite_known(x, noised_known(t - 1), *mask);
  }
  return x;
}

}  // namespace

NoiseSchedule NoiseSchedule::from_betas(const std::vector<double>& betas) {
  if (betas.empty()) throw std::invalid_argument("noise schedule needs at least one step");
  NoiseSchedule s;
  s.T = static_cast<int>(betas.size());
  s.beta.assign(s.T + 1, 0.0);
  s.alpha.assign(s.T + 1, 1.0);
  s.alpha_bar.assign(s.T + 1, 1.0);
  s.sigma.assign(s.T + 1, 0.0);
  for (int t = 1; t <= s.T; ++t) {
    const double b = betas[t - 1];
    if (!(b > 0.0 && b < 1.0)) throw std::invalid_argument("beta must lie in (0, 1)");
    if (t > 1 && b < betas[t - 2]) throw std::invalid_argument("betas must be non-decreasing");
    s.beta[t] = b;
    s.alpha[t] = 1.0 - b;
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
    s.sigma[t] = std::sqrt(b);
  }
  return s;
}

NoiseSchedule make_schedule(int T, double beta_start, double beta_end) {
  if (T < 1) throw std::invalid_argument("schedule needs T >= 1");
  if (!(beta_start > 0.0 && beta_end < 1.0 && (T == 1 || beta_start < beta_end))) {
    throw std::invalid_argument("schedule bounds must satisfy 0 < beta_start < beta_end < 1");
  }
  std::vector<double> betas(T);
  for (int k = 0; k < T; ++k) {
    betas[k] = T == 1 ? beta_start : beta_start + (beta_end - beta_start) * k / (T - 1);
  }
  return NoiseSchedule::from_betas(betas);
}

Eigen::VectorXd q_sample(const Eigen::VectorXd& x0, int t, const Eigen::VectorXd& eps,
                         const NoiseSchedule& s) {
  check_step(t, s);
  if (x0.size() != eps.size()) throw std::invalid_argument("q_sample: shape mismatch");
  return std::sqrt(s.alpha_bar[t]) * x0 + std::sqrt(1.0 - s.alpha_bar[t]) * eps;
}

Eigen::VectorXd q_step(const Eigen::VectorXd& x_prev, int t, const Eigen::VectorXd& noise,
                       const NoiseSchedule& s) {
  check_step(t, s);
  return std::sqrt(1.0 - s.beta[t]) * x_prev + std::sqrt(s.beta[t]) * noise;
}

Eigen::VectorXd reverse_step(const Eigen::VectorXd& x_t, int t, const Eigen::VectorXd& eps_pred,
                             const Eigen::VectorXd& z, const NoiseSchedule& s) {
  check_step(t, s);
  if (x_t.size() != eps_pred.size() || (t > 1 && z.size() != x_t.size())) {
    throw std::invalid_argument("reverse_step: shape mismatch");
  }
  Eigen::MatrixXd x = x_t.transpose();
  const Eigen::MatrixXd e = eps_pred.transpose();
  const Eigen::MatrixXd zz = t > 1 ? Eigen::MatrixXd(z.transpose()) : Eigen::MatrixXd();
  reverse_rows(x, t, e, t > 1 ? &zz : nullptr, s);
  return x.transpose();
}

double loss_weight(int t, const NoiseSchedule& s) {
  check_step(t, s);
  const double b = s.beta[t];
  const double sigma2 = s.sigma[t] * s.sigma[t];
  return b * b / (2.0 * sigma2 * s.alpha[t] * (1.0 - s.alpha_bar[t]));
}

NoisedBatch draw_noised_batch(const Eigen::MatrixXd& x0, std::mt19937_64& rng, const NoiseSchedule& s) {
  NoisedBatch b;
  std::uniform_int_distribution<int> step(1, s.T);
  b.t.resize(x0.rows());
  for (auto& t : b.t) t = step(rng);
  b.eps = standard_normal(x0.rows(), x0.cols(), rng);
  b.x_t.resize(x0.rows(), x0.cols());
  for (Eigen::Index r = 0; r < x0.rows(); ++r) {
    const int t = b.t[r];
    b.x_t.row(r) = std::sqrt(s.alpha_bar[t]) * x0.row(r) + std::sqrt(1.0 - s.alpha_bar[t]) * b.eps.row(r);
  }
  return b;
}

LossResult evaluate_loss(const NoisedBatch& batch, const Eigen::MatrixXd& eps_hat,
                         const NoiseSchedule& s, bool weighted) {
  if (eps_hat.rows() != batch.eps.rows() || eps_hat.cols() != batch.eps.cols()) {
    throw std::invalid_argument("evaluate_loss: prediction shape mismatch");
  }
  const Eigen::Index n = batch.eps.rows();
  LossResult out;
  out.grad_eps_hat.resize(n, batch.eps.cols());
  double total = 0.0;
  for (Eigen::Index r = 0; r < n; ++r) {
    const double w = weighted ? loss_weight(batch.t[r], s) : 1.0;
    const Eigen::RowVectorXd diff = batch.eps.row(r) - eps_hat.row(r);
    total += w * diff.squaredNorm();
    out.grad_eps_hat.row(r) = (-2.0 * w / static_cast<double>(n)) * diff;
  }
  out.loss = total / static_cast<double>(n);
  return out;
}

LossResult training_loss(const Eigen::MatrixXd& x0, const NoisePredictor& model,
                         std::mt19937_64& rng, const NoiseSchedule& s, bool weighted) {
  const NoisedBatch batch = draw_noised_batch(x0, rng, s);
  return evaluate_loss(batch, model.predict(batch.x_t, batch.t), s, weighted);
}

Eigen::MatrixXd sample(const NoisePredictor& model, const NoiseSchedule& s, int n, int dim,
                       std::mt19937_64& rng) {
  return run_reverse(model, s, n, dim, rng, nullptr, nullptr);
}

Eigen::MatrixXd conditioned_sample(const NoisePredictor& model, const NoiseSchedule& s,
                                   const Eigen::MatrixXd& x_known, const Eigen::VectorXd& mask,
                                   int n, std::mt19937_64& rng) {
  if (x_known.cols() != mask.size()) {
    throw std::invalid_argument("conditioned_sample: mask has " + std::to_string(mask.size()) +
                                " entries but known vector has " + std::to_string(x_known.cols()));
  }
  const Eigen::MatrixXd known = broadcast_rows(x_known, n);
  return run_reverse(model, s, n, static_cast<int>(mask.size()), rng, &known, &mask);
}

Eigen::MatrixXd OracleNoisePredictor::predict(const Eigen::MatrixXd& x_t, std::span<const int> t) const {
  const Eigen::MatrixXd x0 = broadcast_rows(x0_, x_t.rows());
  Eigen::MatrixXd eps(x_t.rows(), x_t.cols());
  for (Eigen::Index r = 0; r < x_t.rows(); ++r) {
    const double ab = s_.alpha_bar[t[r]];
    eps.row(r) = (x_t.row(r) - std::sqrt(ab) * x0.row(r)) / std::sqrt(1.0 - ab);
  }
  return eps;
}

}  // namespace artdiff
