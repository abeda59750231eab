// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "jqg/errors.hpp"
#include "jqg/optim.hpp"
#include "jqg/training.hpp"
#include "grad_suite.hpp"

using namespace jqg;
using namespace jqg::training;
using models::LrGroup;
using models::ParameterRegistry;
using TD = ad::Tensor<double>;

namespace {

// One scalar parameter with value p and gradient g.
struct Scalar {
  ParameterRegistry<double> reg;
  TD t;
  Scalar(double p, double g) {
    t = reg.add("w", TD({1}, {p}, true));
    t.grad()[0] = g;
  }
  double value() const { return t.values()[0]; }
};

SampleSet toy_set(std::size_t n, std::uint64_t seed) {
  Philox rng(seed, 0);
  SampleSet s;
  for (std::size_t i = 0; i < n; ++i) {
    augment::PlanarImage img(16, 16);
    const std::uint8_t y = static_cast<std::uint8_t>(i % 2);
    for (float& v : img.data) v = static_cast<float>(rng.uniform() * (y ? 0.5 : 1.0));
    s.images.push_back(std::move(img));
    s.labels.push_back(y);
  }
  return s;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.max_epochs = 1;
  c.seeds = {1};
  return c;
}

}  // namespace

TEST(Optim, AdamWZeroGradientIsPureDecay) {
  Scalar s(2.0, 0.0);
  optim::Optimizer(optim::Kind::AdamW).step(s.reg, 1e-2, 0, 0.1);
  EXPECT_DOUBLE_EQ(s.value(), 2.0 * (1 - 1e-3));
}

TEST(Optim, AdamWFirstStep) {
  Scalar s(0.5, 1.0);
  optim::Optimizer(optim::Kind::AdamW).step(s.reg, 1e-4, 0, 0.0);
  // bias-corrected m = v = 1 -> step lr / (1 + eps)
  EXPECT_NEAR(s.value() - 0.5, -1e-4 * 0.99999999000000010, 1e-16);
}

TEST(Optim, LionFirstStepIsSign) {
  Scalar s(0.5, 3.0);
  optim::Optimizer(optim::Kind::Lion).step(s.reg, 1e-3, 0, 0.0);
  EXPECT_DOUBLE_EQ(s.value(), 0.5 - 1e-3);
}

TEST(Optim, AdamCouplesDecayIntoGradient) {
  Scalar s(1.0, 0.0);
  optim::Optimizer(optim::Kind::Adam).step(s.reg, 1e-3, 0, 0.5);
  // g = wd * p > 0, first normalized step is -lr
  EXPECT_NEAR(s.value(), 1.0 - 1e-3, 1e-10);
}

TEST(Optim, RMSpropFirstStep) {
  Scalar s(1.0, 2.0);
  optim::Optimizer(optim::Kind::RMSprop).step(s.reg, 1e-3, 0, 0.0);
  // v = 0.01 * 4, step lr * g / (sqrt(v) + eps)
  EXPECT_NEAR(s.value(), 1.0 - 1e-3 * 2.0 / (std::sqrt(0.04) + 1e-8), 1e-12);
}

TEST(Optim, SkipsFrozenAndUsesGroupRates) {
  ParameterRegistry<double> reg;
  auto a = reg.add("a", TD({1}, {1.0}, true), true, LrGroup::Head);
  auto b = reg.add("b", TD({1}, {1.0}, true), true, LrGroup::Unfrozen);
  auto c = reg.add("c", TD({1}, {1.0}, true), false);
  for (auto t : {a, b, c}) t.grad()[0] = 1.0;
  optim::Optimizer(optim::Kind::Lion).step(reg, 1e-2, 1e-4, 0.0);
  EXPECT_DOUBLE_EQ(a.values()[0], 1.0 - 1e-2);
  EXPECT_DOUBLE_EQ(b.values()[0], 1.0 - 1e-4);
  EXPECT_EQ(c.values()[0], 1.0);
  EXPECT_EQ(optim::parse_kind("rmsprop"), optim::Kind::RMSprop);
  EXPECT_THROW(optim::parse_kind("sgd"), DomainError);
}

TEST(Schedule, Cosine) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 1e-4, 50), 1e-4);
  EXPECT_NEAR(cosine_lr(25, 1e-4, 50), 5e-5, 1e-20);
  EXPECT_NEAR(cosine_lr(50, 1e-4, 50), 0.0, 1e-20);
  EXPECT_NEAR(cosine_lr(80, 1e-4, 50), 0.0, 1e-20);
}

TEST(Schedule, UnfreezeCounts) {
  auto spec = jqg::testing::tiny_vit_spec();
  spec.vit.depth = 3;
  models::Classifier<float> m(spec, 1);
  m.freeze_backbones();
  TrainConfig c;
  const std::size_t base = m.registry().trainable_count();
  EXPECT_EQ(apply_unfreeze_schedule(4, m, c), 0u);
  EXPECT_EQ(m.registry().trainable_count(), base);
  EXPECT_EQ(apply_unfreeze_schedule(5, m, c), m.last_blocks_size(1));
  EXPECT_EQ(m.registry().trainable_count(), base + m.last_blocks_size(1));
  EXPECT_EQ(apply_unfreeze_schedule(5, m, c), 0u);
  EXPECT_EQ(apply_unfreeze_schedule(8, m, c), m.last_blocks_size(2) - m.last_blocks_size(1));
  EXPECT_EQ(m.registry().trainable_count(), base + m.last_blocks_size(2));
  std::size_t unfrozen = 0;
  for (const auto& e : m.registry().entries())
    if (e.trainable && e.group == LrGroup::Unfrozen) unfrozen += e.tensor.numel();
  EXPECT_EQ(unfrozen, m.last_blocks_size(2));
}

TEST(EarlyStop, Boundaries) {
  const std::vector<double> dec{5, 4, 3, 2, 1, 0.5, 0.4, 0.3, 0.2};
  EXPECT_EQ(early_stop_check(dec, 5), StopDecision::Continue);
  std::vector<double> h{5, 4, 1, 2, 2, 2, 2, 2};  // best epoch 3, now epoch 8
  EXPECT_EQ(early_stop_check(h, 5), StopDecision::Continue);
  h.push_back(2);  // epoch 9
  EXPECT_EQ(early_stop_check(h, 5), StopDecision::Stop);
  const std::vector<double> tie{3, 1, 1, 1, 1, 1, 1, 1};  // first minimum counts
  EXPECT_EQ(early_stop_check(tie, 5), StopDecision::Stop);
}

TEST(Fit, StepCountAndSeedDeterminism) {
  const auto train = toy_set(64, 1), val = toy_set(10, 2);
  const auto spec = jqg::testing::tiny_vit_spec();
  augment::AugmentConfig aug;
  const auto r1 = fit(train, val, spec, quick_config(), aug, 3);
  EXPECT_EQ(r1.record.optimizer_steps, 2u);
  const auto r2 = fit(train, val, spec, quick_config(), aug, 3);
  EXPECT_EQ(r1.record.epochs[0].train_loss, r2.record.epochs[0].train_loss);
  EXPECT_EQ(r1.record.epochs[0].val_loss, r2.record.epochs[0].val_loss);
  EXPECT_EQ(r1.model->registry().snapshot(), r2.model->registry().snapshot());
}

TEST(Fit, StagedProtocolRecordsUnfreezing) {
  const auto train = toy_set(8, 3), val = toy_set(6, 4);
  auto spec = jqg::testing::tiny_vit_spec();
  spec.vit.depth = 3;
  TrainConfig c = quick_config();
  c.mode = FitMode::Staged;
  c.max_epochs = 9;
  c.patience = 100;
  c.batch_size = 8;
  const auto r = fit(train, val, spec, c, {}, 1);
  ASSERT_EQ(r.record.epochs.size(), 9u);
  models::Classifier<float> probe(spec, 1);
  const std::size_t head = probe.registry().count("head."), one = probe.last_blocks_size(1),
                    two = probe.last_blocks_size(2);
  for (const auto& e : r.record.epochs) {
    const std::size_t want = e.epoch < 5 ? head : e.epoch < 8 ? head + one : head + two;
    EXPECT_EQ(e.trainable_params, want) << "epoch " << e.epoch;
    EXPECT_DOUBLE_EQ(e.head_lr, cosine_lr(static_cast<double>(e.epoch - 1), 1e-4, 50));
  }
}

TEST(Fit, BestEpochRestoredAndBudget) {
  const auto train = toy_set(16, 5), val = toy_set(8, 6);
  TrainConfig c = quick_config();
  c.max_epochs = 3;
  const auto r = fit(train, val, jqg::testing::tiny_vit_spec(), c, {}, 2);
  double best = 1e300;
  for (const auto& e : r.record.epochs) best = std::min(best, e.val_loss);
  EXPECT_EQ(r.record.epochs[r.record.best_epoch - 1].val_loss, best);
  const auto ev = evaluate(*r.model, val, path_augment({}, jqg::testing::tiny_vit_spec()));
  EXPECT_NEAR(ev.loss, best, 1e-9);
  c.time_budget_s = 1e-9;
  c.max_epochs = 5;
  const auto b = fit(train, val, jqg::testing::tiny_vit_spec(), c, {}, 2);
  EXPECT_TRUE(b.record.budget_exhausted);
  EXPECT_EQ(b.record.epochs.size(), 1u);
}

TEST(Fit, PathAugment) {
  auto spec = jqg::testing::tiny_vit_spec();
  auto a = path_augment({}, spec);
  EXPECT_EQ(a.out_size, 32u);
  EXPECT_FALSE(a.imagenet_normalize);
  spec.kind = models::ModelKind::Conv;
  EXPECT_TRUE(path_augment({}, spec).imagenet_normalize);
  SampleSet s = toy_set(10, 7);
  EXPECT_EQ(take_fraction(s, 0.6).size(), 6u);
  EXPECT_THROW(take_fraction(s, 0.0), DomainError);
}

TEST(Fit, RunExperimentAggregatesSeeds) {
  const auto train = toy_set(8, 8), val = toy_set(6, 9);
  TrainConfig c = quick_config();
  c.seeds = {1, 2};
  const auto r = run_experiment(train, val, jqg::testing::tiny_vit_spec(), c, {});
  EXPECT_EQ(r.runs.size(), 2u);
  EXPECT_EQ(r.aggregate.runs, 2u);
  EXPECT_EQ(r.params, r.runs[0].model->registry().count());
}
