#include "relsal/net/train.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "../support/fixtures.hpp"
#include "relsal/stack.hpp"

namespace relsal::net {
namespace {

std::vector<TrainingSample<float>> tiny_dataset(const ModelConfig& config, int n, int size,
                                                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TrainingSample<float>> data;
  for (int i = 0; i < n; ++i) {
    const auto a = relsal::testing::random_agreement(rng, size, size, config.n_observers);
    TrainingSample<float> s;
    s.id = "s" + std::to_string(i);
    // Image correlated with the agreement so there is something to learn.
    s.image = Tensor<float>(3, size, size);
    for (int c = 0; c < 3; ++c) {
      for (std::size_t p = 0; p < a.counts().size(); ++p) {
        s.image[static_cast<std::size_t>(c) * a.counts().size() + p] =
            static_cast<float>(a.counts()[p]) / 12.0F;
      }
    }
    s.targets = make_targets<float>(build_nested_stack(a), normalize_saliency(a), config);
    s.count_class = i % config.n_classes;
    data.push_back(std::move(s));
  }
  return data;
}

TrainConfig short_run(int epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 2;
  t.learning_rate = 3e-3;
  return t;
}

TEST(TrainConfigTest, RejectsInvalidSettings) {
  TrainConfig t;
  EXPECT_NO_THROW(t.validate());
  t.batch_size = 0;
  EXPECT_THROW(t.validate(), RangeError);
  t = TrainConfig{};
  t.learning_rate = 0.0;
  EXPECT_THROW(t.validate(), RangeError);
  t = TrainConfig{};
  t.momentum = 1.0;
  EXPECT_THROW(t.validate(), RangeError);
  t = TrainConfig{};
  t.lambdas = {1.0, -1.0};
  EXPECT_THROW(t.validate(), RangeError);
  EXPECT_EQ(optimizer_from_name("sgd"), OptimizerKind::kSgd);
  EXPECT_EQ(optimizer_name(OptimizerKind::kAdam), "adam");
  EXPECT_THROW((void)optimizer_from_name("rmsprop"), RangeError);
}

TEST(OptimizerTest, FirstAdamStepMovesByLearningRateTimesSign) {
  auto p = make_params<double>(ModelConfig{});
  auto g = make_params<double>(ModelConfig{});
  g.head.bias[0] = 3.0;
  g.head.bias[1] = -0.01;
  Optimizer<double> opt(OptimizerKind::kAdam, 0.1, 0.0, p);
  opt.step(p, g, 1.0);
  // Bias-corrected moments give m / sqrt(v) = g / |g| on the first step.
  EXPECT_NEAR(p.head.bias[0], -0.1, 1e-8);
  EXPECT_NEAR(p.head.bias[1], 0.1, 1e-6);
  EXPECT_EQ(p.head.bias[2], 0.0);
}

TEST(OptimizerTest, SgdMomentumRecurrence) {
  auto p = make_params<double>(ModelConfig{});
  auto g = make_params<double>(ModelConfig{});
  g.fusion.weight[0] = 2.0;
  Optimizer<double> opt(OptimizerKind::kSgd, 0.5, 0.9, p);
  opt.step(p, g, 0.5);  // effective gradient 1
  EXPECT_DOUBLE_EQ(p.fusion.weight[0], -0.5);
  opt.step(p, g, 0.5);  // velocity 0.9 * 1 + 1
  EXPECT_DOUBLE_EQ(p.fusion.weight[0], -0.5 - 0.5 * 1.9);
}

TEST(OptimizerTest, PrefixRestrictsUpdatedTensors) {
  auto p = make_params<double>(ModelConfig{});
  auto g = make_params<double>(ModelConfig{});
  g.head.bias[0] = 1.0;
  g.sub_fc1.bias[0] = 1.0;
  Optimizer<double> opt(OptimizerKind::kSgd, 1.0, 0.0, p);
  opt.step(p, g, 1.0, "subitizer.");
  EXPECT_EQ(p.head.bias[0], 0.0);
  EXPECT_EQ(p.sub_fc1.bias[0], -1.0);
}

TEST(TrainTest, LossDecreasesOnTinyDataset) {
  const ModelConfig c;
  auto p = init_params<float>(c, 1);
  const auto data = tiny_dataset(c, 4, 16, 2);
  std::vector<double> seen;
  const auto log =
      train_saliency(p, data, short_run(40), [&](int, double loss) { seen.push_back(loss); });
  ASSERT_EQ(log.epochs.size(), 41U);
  EXPECT_EQ(seen.size(), 40U);
  EXPECT_EQ(log.epochs.front().epoch, 0);
  EXPECT_EQ(log.epochs.back().aux.size(), 3U);
  EXPECT_LT(dataset_loss(p, data).total, 0.5 * log.epochs.front().total);
  EXPECT_EQ(log.trajectory().size(), 41U);
}

TEST(TrainTest, SameSeedIsBitIdenticalAndSeedChangesShuffle) {
  const ModelConfig c;
  const auto data = tiny_dataset(c, 5, 16, 3);
  auto a = init_params<float>(c, 4);
  auto b = a;
  auto d = a;
  auto cfg = short_run(4);
  train_saliency(a, data, cfg);
  train_saliency(b, data, cfg);
  EXPECT_EQ(a, b);
  EXPECT_EQ(fingerprint(a), fingerprint(b));
  cfg.seed += 1;
  train_saliency(d, data, cfg);
  EXPECT_NE(fingerprint(a), fingerprint(d));
}

TEST(TrainTest, ZeroEpochsOnlyRecordsInitialLoss) {
  const ModelConfig c;
  auto p = init_params<float>(c, 5);
  const auto before = p;
  const auto log = train_saliency(p, tiny_dataset(c, 2, 16, 6), short_run(0));
  EXPECT_EQ(log.epochs.size(), 1U);
  EXPECT_EQ(p, before);
}

TEST(TrainTest, HugeLearningRateDiverges) {
  const ModelConfig c;
  auto p = init_params<float>(c, 7);
  auto cfg = short_run(50);
  cfg.optimizer = OptimizerKind::kSgd;
  cfg.learning_rate = 1e12;
  EXPECT_THROW(train_saliency(p, tiny_dataset(c, 2, 16, 8), cfg), TrainingDiverged);
}

TEST(TrainTest, SubitizerLearnsLabelsAndTouchesOnlyDenseLayers) {
  const ModelConfig c;
  auto p = init_params<float>(c, 9);
  const auto before = p;
  auto data = tiny_dataset(c, 6, 16, 10);
  data[0].count_class = -1;
  auto cfg = short_run(0);
  cfg.subitizer_epochs = 80;
  cfg.subitizer_learning_rate = 0.1;
  const auto traj = train_subitizer(p, data, cfg);
  ASSERT_EQ(traj.size(), 81U);
  EXPECT_LT(traj.back(), 0.5 * traj.front());
  EXPECT_EQ(p.encoder, before.encoder);
  EXPECT_EQ(p.head, before.head);
  EXPECT_NE(p.sub_fc2, before.sub_fc2);

  for (auto& s : data) {
    s.count_class = -1;
  }
  EXPECT_THROW((void)train_subitizer(p, data, cfg), RangeError);
  data[1].count_class = c.n_classes;
  EXPECT_THROW((void)train_subitizer(p, data, cfg), RangeError);
}

}  // namespace
}  // namespace relsal::net
