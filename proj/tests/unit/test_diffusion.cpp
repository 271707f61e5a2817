#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "artdiff/diffusion.hpp"

namespace artdiff {
namespace {

Eigen::VectorXd gaussian(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  return Eigen::VectorXd::NullaryExpr(n, [&] { return g(rng); });
}

TEST(Schedule, SmallProducts) {
  const NoiseSchedule one = make_schedule(1, 0.1, 0.2);
  EXPECT_NEAR(one.alpha_bar[1], 0.9, 1e-15);
  const NoiseSchedule two = NoiseSchedule::from_betas({0.1, 0.1});
  EXPECT_NEAR(two.alpha_bar[2], 0.81, 1e-15);
}

TEST(Schedule, InvariantsAgainstDirectProduct) {
  for (const ScheduleConfig c : {ScheduleConfig{}, ScheduleConfig::desk()}) {
    const NoiseSchedule s = make_schedule(c);
    double prod = 1.0;
    for (int t = 1; t <= s.T; ++t) {
      const double beta = c.beta_start + (c.beta_end - c.beta_start) * (t - 1) / (s.T - 1);
      EXPECT_NEAR(s.beta[t], beta, 1e-15);
      prod *= 1.0 - beta;
      EXPECT_NEAR(s.alpha_bar[t], prod, 1e-12);
      EXPECT_NEAR(s.sigma[t] * s.sigma[t], s.beta[t], 1e-15);
      if (t > 1) {
        EXPECT_GT(s.beta[t], s.beta[t - 1]);
        EXPECT_LT(s.alpha_bar[t], s.alpha_bar[t - 1]);
      }
    }
  }
  EXPECT_LT(make_schedule(1000, 1e-4, 0.02).alpha_bar[1000], 1e-3);
  EXPECT_LT(make_schedule(ScheduleConfig::desk()).alpha_bar[100], 1e-3);
}

TEST(Schedule, RejectsBadBounds) {
  EXPECT_THROW(make_schedule(10, 0.0, 0.1), std::invalid_argument);
  EXPECT_THROW(make_schedule(10, 0.2, 0.1), std::invalid_argument);
  EXPECT_THROW(make_schedule(10, 0.1, 1.0), std::invalid_argument);
  EXPECT_THROW(make_schedule(0, 0.1, 0.2), std::invalid_argument);
}

TEST(QSample, LimitCases) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  std::mt19937_64 rng(1);
  const Eigen::VectorXd x0 = gaussian(7, rng), eps = gaussian(7, rng);
  EXPECT_LT((q_sample(x0, 9, Eigen::VectorXd::Zero(7), s) - std::sqrt(s.alpha_bar[9]) * x0).norm(), 1e-15);
  EXPECT_LT((q_sample(Eigen::VectorXd::Zero(7), 9, eps, s) - std::sqrt(1 - s.alpha_bar[9]) * eps).norm(), 1e-15);
  EXPECT_THROW(q_sample(x0, 0, eps, s), std::out_of_range);
  EXPECT_THROW(q_sample(x0, s.T + 1, eps, s), std::out_of_range);
}

// Iterated one-step noising matches the closed-form marginal.
TEST(QSample, ChainMatchesClosedFormWithinThreeStandardErrors) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  constexpr int kDim = 4, kSamples = 10000, kT = 5;
  const Eigen::Vector4d x0(1.5, -2.0, 0.0, 0.5);
  std::mt19937_64 rng(2);
  Eigen::MatrixXd chain(kSamples, kDim), direct(kSamples, kDim);
  for (int n = 0; n < kSamples; ++n) {
    Eigen::VectorXd x = x0;
    for (int t = 1; t <= kT; ++t) x = q_step(x, t, gaussian(kDim, rng), s);
    chain.row(n) = x.transpose();
    direct.row(n) = q_sample(x0, kT, gaussian(kDim, rng), s).transpose();
  }
  const double mean_expected_scale = std::sqrt(s.alpha_bar[kT]);
  const double var_expected = 1.0 - s.alpha_bar[kT];
  for (int c = 0; c < kDim; ++c) {
    for (const Eigen::MatrixXd* m : {&chain, &direct}) {
      const double mean = m->col(c).mean();
      const double var = (m->col(c).array() - mean).square().sum() / (kSamples - 1);
      const double se_mean = std::sqrt(var_expected / kSamples);
      const double se_var = var_expected * std::sqrt(2.0 / (kSamples - 1));
      EXPECT_LT(std::abs(mean - mean_expected_scale * x0[c]), 3 * se_mean) << c;
      EXPECT_LT(std::abs(var - var_expected), 3 * se_var) << c;
    }
  }
}

TEST(QSample, MarginalVarianceTracksDataVariance) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  constexpr int kSamples = 20000, kT = 30;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> data(0.0, 2.0);
  Eigen::VectorXd xs(kSamples);
  for (int n = 0; n < kSamples; ++n) {
    Eigen::VectorXd x0(1);
    x0[0] = data(rng);
    xs[n] = q_sample(x0, kT, gaussian(1, rng), s)[0];
  }
  const double var = (xs.array() - xs.mean()).square().sum() / (kSamples - 1);
  const double expected = s.alpha_bar[kT] * 4.0 + (1 - s.alpha_bar[kT]);
  EXPECT_LT(std::abs(var - expected), 3 * expected * std::sqrt(2.0 / (kSamples - 1)));
}

TEST(ReverseStep, RecoversCleanSampleAtFirstStep) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  std::mt19937_64 rng(4);
  const Eigen::VectorXd x0 = gaussian(9, rng), eps = gaussian(9, rng);
  const Eigen::VectorXd x1 = q_sample(x0, 1, eps, s);
  EXPECT_LT((reverse_step(x1, 1, eps, gaussian(9, rng), s) - x0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReverseStep, ZeroNoiseReducesToRescale) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  std::mt19937_64 rng(5);
  const Eigen::VectorXd x = gaussian(6, rng);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(6);
  EXPECT_LT((reverse_step(x, 40, zero, zero, s) - x / std::sqrt(s.alpha[40])).norm(), 1e-14);
}

TEST(ReverseStep, IsLinearInItsInputs) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const int t = 2 + trial;
    const Eigen::VectorXd x1 = gaussian(5, rng), e1 = gaussian(5, rng), z1 = gaussian(5, rng);
    const Eigen::VectorXd x2 = gaussian(5, rng), e2 = gaussian(5, rng), z2 = gaussian(5, rng);
    const double a = 0.7, b = -1.3;
    const Eigen::VectorXd lhs = reverse_step(a * x1 + b * x2, t, a * e1 + b * e2, a * z1 + b * z2, s);
    const Eigen::VectorXd rhs = a * reverse_step(x1, t, e1, z1, s) + b * reverse_step(x2, t, e2, z2, s);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Loss, OracleGivesZeroAndZeroModelGivesDimension) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  std::mt19937_64 rng(7);
  Eigen::MatrixXd x0(10000, 12);
  for (Eigen::Index r = 0; r < x0.rows(); ++r) x0.row(r) = gaussian(12, rng).transpose();
  const NoisedBatch batch = draw_noised_batch(x0, rng, s);
  EXPECT_LT(evaluate_loss(batch, batch.eps, s, false).loss, 1e-24);
  EXPECT_EQ(evaluate_loss(batch, batch.eps, s, true).loss, 0.0);
  const LossResult zero = evaluate_loss(batch, Eigen::MatrixXd::Zero(x0.rows(), 12), s, false);
  EXPECT_NEAR(zero.loss, 12.0, 0.05 * 12.0);

  const OracleNoisePredictor oracle(x0, s);
  EXPECT_LT(training_loss(x0, oracle, rng, s, false).loss, 1e-18);
}

TEST(Loss, WeightAtFirstStepMatchesFormula) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  const double b = s.beta[1];
  EXPECT_NEAR(loss_weight(1, s), b / (2.0 * (1.0 - b) * (1.0 - s.alpha_bar[1])), 1e-12);
  const double b7 = s.beta[7];
  EXPECT_NEAR(loss_weight(7, s), b7 / (2.0 * s.alpha[7] * (1.0 - s.alpha_bar[7])), 1e-12);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  std::mt19937_64 rng(8);
  Eigen::MatrixXd x0(3, 4);
  for (Eigen::Index r = 0; r < 3; ++r) x0.row(r) = gaussian(4, rng).transpose();
  const NoisedBatch batch = draw_noised_batch(x0, rng, s);
  Eigen::MatrixXd eps_hat(3, 4);
  for (Eigen::Index r = 0; r < 3; ++r) eps_hat.row(r) = gaussian(4, rng).transpose();
  for (bool weighted : {false, true}) {
    const LossResult base = evaluate_loss(batch, eps_hat, s, weighted);
    for (Eigen::Index i = 0; i < eps_hat.size(); ++i) {
      Eigen::MatrixXd up = eps_hat, down = eps_hat;
      up.data()[i] += 1e-6;
      down.data()[i] -= 1e-6;
      const double fd =
          (evaluate_loss(batch, up, s, weighted).loss - evaluate_loss(batch, down, s, weighted).loss) / 2e-6;
      EXPECT_NEAR(base.grad_eps_hat.data()[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Sampling, OracleRolloutRecoversCleanData) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  std::mt19937_64 rng(9);
  Eigen::MatrixXd x0(1, 20);
  x0.row(0) = gaussian(20, rng).transpose();
  const OracleNoisePredictor oracle(x0, s);
  const Eigen::MatrixXd out = sample(oracle, s, 3, 20, rng);
  for (Eigen::Index r = 0; r < 3; ++r) EXPECT_LT((out.row(r) - x0.row(0)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Sampling, DeterministicAndShaped) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  const ZeroNoisePredictor zero;
  std::mt19937_64 a(10), b(10);
  const Eigen::MatrixXd xa = sample(zero, s, 4, 17, a);
  const Eigen::MatrixXd xb = sample(zero, s, 4, 17, b);
  EXPECT_EQ(xa.rows(), 4);
  EXPECT_EQ(xa.cols(), 17);
  EXPECT_EQ(xa, xb);
}

TEST(ConditionedSampling, MaskExtremes) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  const ZeroNoisePredictor zero;
  std::mt19937_64 rng(11);
  const Eigen::RowVectorXd known = gaussian(13, rng).transpose();

  std::mt19937_64 r1(12);
  const Eigen::MatrixXd all = conditioned_sample(zero, s, known, Eigen::VectorXd::Ones(13), 3, r1);
  for (Eigen::Index r = 0; r < 3; ++r) EXPECT_EQ(Eigen::RowVectorXd(all.row(r)), known);

  std::mt19937_64 r2(13), r3(13);
  const Eigen::MatrixXd none = conditioned_sample(zero, s, known, Eigen::VectorXd::Zero(13), 3, r2);
  EXPECT_EQ(none, sample(zero, s, 3, 13, r3));
}

TEST(ConditionedSampling, KnownEntriesExactUnknownFollowModel) {
  const NoiseSchedule s = make_schedule(ScheduleConfig::desk());
  std::mt19937_64 rng(14);
  Eigen::MatrixXd x0(1, 10);
  x0.row(0) = gaussian(10, rng).transpose();
  const OracleNoisePredictor oracle(x0, s);
  Eigen::VectorXd mask = Eigen::VectorXd::Zero(10);
  mask.head(4).setOnes();
  Eigen::RowVectorXd known = x0.row(0);
  known.head(4) *= 2.0;
  const Eigen::MatrixXd out = conditioned_sample(oracle, s, known, mask, 2, rng);
  for (Eigen::Index r = 0; r < 2; ++r) {
    EXPECT_EQ(Eigen::RowVectorXd(out.row(r).head(4)), Eigen::RowVectorXd(known.head(4)));
    EXPECT_LT((out.row(r).tail(6) - x0.row(0).tail(6)).cwiseAbs().maxCoeff(), 1e-6);
  }
  EXPECT_THROW(conditioned_sample(oracle, s, known, Eigen::VectorXd::Zero(9), 1, rng), std::invalid_argument);
}

}  // namespace
}  // namespace artdiff
