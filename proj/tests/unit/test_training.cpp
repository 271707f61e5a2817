#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "artdiff/checkpoint.hpp"
#include "artdiff/training.hpp"

namespace artdiff {
namespace {

Eigen::MatrixXd gaussian(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Eigen::MatrixXd::NullaryExpr(rows, cols, [&] { return n(rng); });
}

struct TinyRun {
  DenoiserConfig model;
  TrainConfig train;
  Eigen::MatrixXd rows;
  Eigen::VectorXd init;

  static TinyRun make(int n_rows = 4) {
    TinyRun s;
    s.model = DenoiserConfig::for_graph(GraphConfig{3, 2, false}, 8, 1);
    s.model.time_dim = 4;
    s.model.pos_dim = 4;
    s.model.seed = 21;
    s.train.epochs = 5;
    s.train.batch_size = 3;
    s.train.epoch_repeat = 2;
    s.train.lr = 1e-2;
    s.train.seed = 4;
    std::mt19937_64 rng(8);
    s.rows = gaussian(n_rows, s.model.flat_dim(), rng);
    std::mt19937_64 init_rng(s.model.seed);
    s.init = init_params(s.model, init_rng);
    return s;
  }
  Eigen::MatrixXd no_val() const { return Eigen::MatrixXd(0, rows.cols()); }
};

// Knows the clean rows, so it can return the exact noise for row r.
struct OracleForRows : NoisePredictor {
  Eigen::MatrixXd x0;
  NoiseSchedule s;
  Eigen::MatrixXd predict(const Eigen::MatrixXd& x_t, std::span<const int> t) const override {
    Eigen::MatrixXd out(x_t.rows(), x_t.cols());
    for (Eigen::Index r = 0; r < x_t.rows(); ++r) {
      const double ab = s.alpha_bar[t[r]];
      out.row(r) = (x_t.row(r) - std::sqrt(ab) * x0.row(r)) / std::sqrt(1.0 - ab);
    }
    return out;
  }
};

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.epochs = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.epoch_repeat = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Training, StepsPerEpochRoundsUp) {
  TrainConfig c;
  c.batch_size = 64;
  c.epoch_repeat = 8;
  EXPECT_EQ(steps_per_epoch(c, 8), 1);
  EXPECT_EQ(steps_per_epoch(c, 9), 2);
  c.epoch_repeat = 1;
  EXPECT_EQ(steps_per_epoch(c, 128), 2);
  EXPECT_EQ(steps_per_epoch(c, 129), 3);
}

TEST(Training, ZeroEpochsKeepsInitialParams) {
  TinyRun s = TinyRun::make();
  s.train.epochs = 0;
  TrainState st = TrainState::fresh(s.init);
  train(st, s.model, s.rows, s.no_val(), s.train);
  EXPECT_EQ(st.params, s.init);
  EXPECT_EQ(st.step, 0);
  EXPECT_TRUE(st.history.empty());
}

TEST(Training, StepCountAndLogPerEpoch) {
  TinyRun s = TinyRun::make(5);
  TrainState st = TrainState::fresh(s.init);
  int calls = 0;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) { EXPECT_EQ(r.epoch, ++calls); };
  train(st, s.model, s.rows, s.no_val(), s.train, hooks);
  EXPECT_EQ(calls, s.train.epochs);
  ASSERT_EQ(st.history.size(), 5u);
  const long per_epoch = steps_per_epoch(s.train, 5);
  EXPECT_EQ(per_epoch, 4);
  for (std::size_t e = 0; e < st.history.size(); ++e) {
    EXPECT_EQ(st.history[e].step, per_epoch * static_cast<long>(e + 1));
    EXPECT_TRUE(std::isfinite(st.history[e].train_loss));
    EXPECT_FALSE(st.history[e].val_loss.has_value());
  }
  EXPECT_EQ(st.adam.step, st.step);
  EXPECT_NE(st.params, s.init);
}

TEST(Training, BitDeterministicGivenSeed) {
  const TinyRun s = TinyRun::make();
  TrainState a = TrainState::fresh(s.init), b = TrainState::fresh(s.init);
  train(a, s.model, s.rows, s.no_val(), s.train);
  train(b, s.model, s.rows, s.no_val(), s.train);
  EXPECT_EQ(a.params, b.params);
  for (std::size_t e = 0; e < a.history.size(); ++e) EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);

  TinyRun other = s;
  other.train.seed = 5;
  TrainState c = TrainState::fresh(s.init);
  train(c, other.model, other.rows, other.no_val(), other.train);
  EXPECT_NE(a.params, c.params);
}

TEST(Training, ResumeFromCheckpointMatchesUninterruptedRun) {
  const TinyRun s = TinyRun::make();
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd val = gaussian(2, s.model.flat_dim(), rng);
  TrainState full = TrainState::fresh(s.init);
  train(full, s.model, s.rows, val, s.train);

  Checkpoint ck;
  ck.graph = GraphConfig{3, 2, false};
  ck.stats.mean = Eigen::VectorXd::Zero(ck.graph.flat_dim());
  ck.stats.scale = Eigen::VectorXd::Ones(ck.graph.flat_dim());
  ck.denoiser = s.model;
  ck.train = s.train;
  ck.train.epochs = 2;
  ck.state = TrainState::fresh(s.init);
  train(ck.state, ck.denoiser, s.rows, val, ck.train);

  Checkpoint resumed = checkpoint_from_json(checkpoint_to_json(ck));
  resumed.train.epochs = s.train.epochs;
  train(resumed.state, resumed.denoiser, s.rows, val, resumed.train);

  EXPECT_EQ(resumed.state.params, full.params);
  EXPECT_EQ(resumed.state.best_params, full.best_params);
  EXPECT_EQ(resumed.state.step, full.step);
  ASSERT_EQ(resumed.state.history.size(), full.history.size());
  for (std::size_t e = 0; e < full.history.size(); ++e) {
    EXPECT_EQ(resumed.state.history[e].train_loss, full.history[e].train_loss);
    EXPECT_EQ(resumed.state.history[e].val_loss, full.history[e].val_loss);
  }
}

TEST(Training, KeepsLowestValidationEpoch) {
  TinyRun s = TinyRun::make();
  s.train.epochs = 8;
  std::mt19937_64 rng(6);
  const Eigen::MatrixXd val = gaussian(3, s.model.flat_dim(), rng);
  TrainState st = TrainState::fresh(s.init);
  std::vector<Eigen::VectorXd> params_after;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const TrainState& t) { params_after.push_back(t.params); };
  s.train.checkpoint_interval = 1;
  train(st, s.model, s.rows, val, s.train, hooks);
  ASSERT_TRUE(st.has_best);
  ASSERT_EQ(params_after.size(), 8u);
  std::size_t best = 0;
  for (std::size_t e = 0; e < st.history.size(); ++e) {
    ASSERT_TRUE(st.history[e].val_loss.has_value());
    if (*st.history[e].val_loss < *st.history[best].val_loss) best = e;
  }
  EXPECT_EQ(st.best_val, *st.history[best].val_loss);
  EXPECT_EQ(st.best_params, params_after[best]);

  // The recorded value is reproducible from the stored parameters.
  const NoiseSchedule sched = make_schedule(s.train.schedule);
  const Denoiser net(s.model, st.best_params, sched);
  EXPECT_EQ(evaluate_val(net, val, sched, false, s.train.val_seed), st.best_val);
}

TEST(Training, WithoutValidationNoBestIsRecorded) {
  const TinyRun s = TinyRun::make();
  Checkpoint ck;
  ck.denoiser = s.model;
  ck.state = TrainState::fresh(s.init);
  train(ck.state, s.model, s.rows, s.no_val(), s.train);
  EXPECT_FALSE(ck.state.has_best);
  EXPECT_EQ(ck.model_params(), ck.state.params);
}

TEST(Training, CheckpointCallbackFollowsInterval) {
  TinyRun s = TinyRun::make();
  s.train.epochs = 7;
  s.train.checkpoint_interval = 3;
  std::vector<int> epochs;
  TrainHooks hooks;
  hooks.on_checkpoint = [&](const TrainState& t) { epochs.push_back(t.epoch); };
  TrainState st = TrainState::fresh(s.init);
  train(st, s.model, s.rows, s.no_val(), s.train, hooks);
  EXPECT_EQ(epochs, (std::vector<int>{3, 6}));
}

TEST(Training, Errors) {
  const TinyRun s = TinyRun::make();
  TrainState st = TrainState::fresh(s.init);
  EXPECT_THROW(train(st, s.model, Eigen::MatrixXd(0, s.rows.cols()), s.no_val(), s.train), std::invalid_argument);
  EXPECT_THROW(train(st, s.model, Eigen::MatrixXd::Zero(2, s.rows.cols() + 1), s.no_val(), s.train),
               std::invalid_argument);
  EXPECT_THROW(train(st, s.model, s.rows, Eigen::MatrixXd::Zero(1, 3), s.train), std::invalid_argument);
}

TEST(Training, NonFiniteLossAborts) {
  const TinyRun s = TinyRun::make();
  Eigen::MatrixXd rows = s.rows;
  rows(1, 0) = std::nan("");
  TrainState st = TrainState::fresh(s.init);
  try {
    train(st, s.model, rows, s.no_val(), s.train);
    FAIL() << "expected an abort";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("non-finite"), std::string::npos);
  }
}

TEST(EvaluateVal, EmptySetThrows) {
  const TinyRun s = TinyRun::make();
  const NoiseSchedule sched = make_schedule(s.train.schedule);
  const Denoiser net(s.model, sched);
  EXPECT_THROW(evaluate_val(net, s.no_val(), sched, false, 1), std::invalid_argument);
}

TEST(EvaluateVal, OracleScoresZero) {
  const TinyRun s = TinyRun::make(1);
  // One repeated row spans several validation chunks and the oracle still
  // knows every row.
  const Eigen::MatrixXd rows = s.rows.row(0).replicate(300, 1);
  OracleForRows oracle;
  oracle.x0 = rows;
  oracle.s = make_schedule(s.train.schedule);
  EXPECT_LT(evaluate_val(oracle, rows, oracle.s, false, 9), 1e-20);
  EXPECT_LT(evaluate_val(oracle, rows, oracle.s, true, 9), 1e-20);
}

TEST(EvaluateVal, FixedSeedMakesScoresComparable) {
  const TinyRun s = TinyRun::make();
  const NoiseSchedule sched = make_schedule(s.train.schedule);
  const Denoiser net(s.model, sched);
  EXPECT_EQ(evaluate_val(net, s.rows, sched, false, 3), evaluate_val(net, s.rows, sched, false, 3));
  EXPECT_NE(evaluate_val(net, s.rows, sched, false, 3), evaluate_val(net, s.rows, sched, false, 4));
}

TEST(EvaluateVal, TrainingSetScoreTracksTrainingLoss) {
  TinyRun s = TinyRun::make(4);
  s.train.epochs = 300;
  s.train.batch_size = 32;
  s.train.epoch_repeat = 8;
  s.train.lr = 3e-3;
  TrainState st = TrainState::fresh(s.init);
  train(st, s.model, s.rows, s.no_val(), s.train);
  double recent = 0.0;
  const int window = 100;
  for (int e = 0; e < window; ++e) recent += st.history[st.history.size() - 1 - e].train_loss;
  recent /= window;
  const NoiseSchedule sched = make_schedule(s.train.schedule);
  const Denoiser net(s.model, st.params, sched);
  const double val = evaluate_val(net, s.rows.replicate(64, 1), sched, false, 12);
  EXPECT_LT(recent, 0.5 * st.history.front().train_loss);
  EXPECT_NEAR(val / recent, 1.0, 0.2) << "val " << val << " train " << recent;
}

TEST(TrainingLog, CsvLayout) {
  std::ostringstream os;
  write_log_header(os);
  EpochRecord a;
  a.step = 4;
  a.epoch = 1;
  a.train_loss = 2.5;
  write_log_row(os, a);
  a.step = 8;
  a.epoch = 2;
  a.train_loss = 1.25;
  a.val_loss = 0.5;
  write_log_row(os, a);
  EXPECT_EQ(os.str(), "step,epoch,train_loss,val_loss\n4,1,2.5,\n8,2,1.25,0.5\n");
}

TEST(GradientClip, ScalesOnlyAboveThreshold) {
  Eigen::VectorXd g(2);
  g << 3.0, 4.0;
  EXPECT_EQ(clip_global_norm(g, 10.0), 5.0);
  EXPECT_EQ(g, Eigen::Vector2d(3.0, 4.0));
  EXPECT_EQ(clip_global_norm(g, 1.0), 5.0);
  EXPECT_NEAR(g.norm(), 1.0, 1e-15);
  EXPECT_NEAR(g[0] / g[1], 0.75, 1e-15);
  g << 3.0, 4.0;
  clip_global_norm(g, 0.0);
  EXPECT_EQ(g.norm(), 5.0);
}

}  // namespace
}  // namespace artdiff
