#include <gtest/gtest.h>

#include <cmath>

#include "segforge/losses.hpp"
#include "segforge/metrics.hpp"
#include "segforge/optim.hpp"
#include "support/oracles.hpp"

using namespace segforge;
namespace adn = segforge::ad;

namespace {

Tensor<double> filled(std::int64_t h, std::int64_t w, double v) { return Tensor<double>::full(Shape::nchw(1, 1, h, w), v); }

double loss_value(LossKind kind, const Tensor<double>& p, const Tensor<double>& t) {
  adn::Tape<double> tape;
  return segmentation_loss(kind, tape.constant(p), t).value()[0];
}

ModelParams<double> single(double v) {
  ModelParams<double> p;
  p.entries.push_back({"w", Tensor<double>(Shape{1}, std::vector<double>{v})});
  return p;
}

}  // namespace

TEST(SoftDice, PerfectPredictionIsZero) {
  EXPECT_NEAR(loss_value(LossKind::soft_dice, filled(4, 4, 1.0), filled(4, 4, 1.0)), 0.0, 1e-15);
}

TEST(SoftDice, HalfProbabilityAgainstAllOnes) {
  // 1 - (2*8 + 1) / (8 + 16 + 1)
  EXPECT_NEAR(loss_value(LossKind::soft_dice, filled(4, 4, 0.5), filled(4, 4, 1.0)), 0.32, 1e-12);
}

TEST(SoftDice, BinaryPredictionEqualToTruthIsZero) {
  std::mt19937_64 rng(3);
  const auto m = oracle::random_mask(6, 7, 0.4, rng);
  Tensor<double> t(Shape::nchw(1, 1, 6, 7));
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 7; ++x) t.at(0, 0, y, x) = m.get(y, x);
  EXPECT_NEAR(loss_value(LossKind::soft_dice, t, t), 0.0, 1e-12);
}

TEST(SoftDice, AveragedOverBatch) {
  Tensor<double> p(Shape::nchw(2, 1, 4, 4), 1.0), t(Shape::nchw(2, 1, 4, 4), 1.0);
  for (int i = 0; i < 16; ++i) p[16 + i] = 0.5;
  EXPECT_NEAR(loss_value(LossKind::soft_dice, p, t), 0.16, 1e-12);
}

TEST(SoftDice, ShapeMismatchRejected) {
  adn::Tape<double> tape;
  EXPECT_THROW(soft_dice_loss(tape.constant(filled(4, 4, 0.5)), filled(4, 3, 1.0)), ShapeError);
  EXPECT_THROW(bce_loss(tape.constant(filled(4, 4, 0.5)), filled(3, 4, 1.0)), ShapeError);
}

TEST(Bce, HalfProbabilityIsLn2) {
  std::mt19937_64 rng(1);
  Tensor<double> t(Shape::nchw(2, 1, 3, 5));
  std::bernoulli_distribution bit(0.5);
  for (auto& v : t.storage()) v = bit(rng);
  EXPECT_NEAR(loss_value(LossKind::bce, Tensor<double>::full(t.shape(), 0.5), t), std::log(2.0), 1e-12);
}

TEST(Bce, ExactPredictionIsNearZero) {
  Tensor<double> t(Shape::nchw(1, 1, 2, 2), std::vector<double>{0, 1, 1, 0});
  EXPECT_LE(loss_value(LossKind::bce, t, t), 1e-6);
  EXPECT_GE(loss_value(LossKind::bce, t, t), 0.0);
}

TEST(Bce, ClampKeepsLossAndGradientFinite) {
  adn::Tape<double> tape;
  auto p = tape.leaf(Tensor<double>(Shape::nchw(1, 1, 1, 2), std::vector<double>{0.0, 1.0}), true);
  const Tensor<double> t(Shape::nchw(1, 1, 1, 2), std::vector<double>{1.0, 0.0});
  auto l = bce_loss(p, t);
  EXPECT_TRUE(std::isfinite(l.value()[0]));
  tape.backward(l);
  EXPECT_EQ(p.grad().storage(), std::vector<double>(2, 0.0));
}

TEST(CombinedLoss, IsSumOfParts) {
  std::mt19937_64 rng(2);
  const auto p = oracle::random_tensor<double>(Shape::nchw(2, 1, 4, 4), rng, 0.05, 0.95);
  Tensor<double> t(p.shape());
  for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = i % 3 == 0;
  EXPECT_NEAR(loss_value(LossKind::bce_plus_dice, p, t),
              loss_value(LossKind::bce, p, t) + loss_value(LossKind::soft_dice, p, t), 1e-14);
  EXPECT_EQ(parse_loss_kind(to_string(LossKind::soft_dice)), LossKind::soft_dice);
  EXPECT_THROW(parse_loss_kind("hinge"), Error);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = single(1.0);
  auto state = AdamState<double>::zeros_like(p);
  TrainConfig cfg;
  adam_step(p, {Tensor<double>(Shape{1}, std::vector<double>{0.3})}, state, cfg);
  // bias-corrected m_hat = 0.3, v_hat = 0.09
  EXPECT_NEAR(p.entries[0].value[0] - 1.0, -1e-4 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_EQ(state.step, 1);
  EXPECT_NEAR(state.m[0][0], 0.03, 1e-15);
  EXPECT_NEAR(state.v[0][0], 0.001 * 0.09, 1e-15);
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  auto p = single(-2.5);
  auto state = AdamState<double>::zeros_like(p);
  for (int i = 0; i < 10; ++i) adam_step(p, {Tensor<double>::zeros(Shape{1})}, state, TrainConfig{});
  EXPECT_EQ(p.entries[0].value[0], -2.5);
  EXPECT_EQ(state.step, 10);
}

TEST(Adam, StepOpposesFirstMomentAndVStaysNonNegative) {
  std::mt19937_64 rng(4);
  ModelParams<double> p;
  p.entries.push_back({"a", oracle::random_tensor<double>(Shape{5, 3}, rng)});
  auto state = AdamState<double>::zeros_like(p);
  for (int s = 0; s < 20; ++s) {
    const auto before = p.entries[0].value;
    adam_step(p, {oracle::random_tensor<double>(Shape{5, 3}, rng)}, state, TrainConfig{});
    for (std::int64_t i = 0; i < before.numel(); ++i) {
      const double delta = p.entries[0].value[i] - before[i];
      if (state.m[0][i] != 0.0) {
        EXPECT_LT(delta * state.m[0][i], 0.0);
      }
      EXPECT_GE(state.v[0][i], 0.0);
    }
  }
}

TEST(Adam, ShapeMismatchRejected) {
  auto p = single(0.0);
  auto state = AdamState<double>::zeros_like(p);
  EXPECT_THROW(adam_step(p, {Tensor<double>::zeros(Shape{2})}, state, TrainConfig{}), ShapeError);
  EXPECT_THROW(adam_step(p, {}, state, TrainConfig{}), Error);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epochs = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), Error);
  c = TrainConfig{};
  c.adam_beta2 = 1.0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Dice, SpecExamples) {
  BinaryMask a(4, 4), b(4, 4);
  for (int x = 0; x < 4; ++x) a.set(0, x, true);
  EXPECT_DOUBLE_EQ(dice_binary(a, a), 1.0);
  for (int x = 0; x < 4; ++x) b.set(3, x, true);
  EXPECT_DOUBLE_EQ(dice_binary(a, b), 0.0);
  BinaryMask c(4, 4);
  c.set(0, 0, true);
  c.set(0, 1, true);
  c.set(1, 0, true);
  c.set(1, 1, true);
  EXPECT_DOUBLE_EQ(dice_binary(a, c), 0.5);
  EXPECT_DOUBLE_EQ(dice_binary(BinaryMask(3, 3), BinaryMask(3, 3)), 1.0);
  EXPECT_THROW(dice_binary(a, BinaryMask(4, 5)), Error);
}

TEST(Dice, MatchesCountingOracleAndIouIdentity) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> dens(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const auto a = oracle::random_mask(32, 32, dens(rng), rng), b = oracle::random_mask(32, 32, dens(rng), rng);
    const double d = dice_binary(a, b), j = iou_binary(a, b);
    EXPECT_LT(std::abs(d - oracle::dice(a, b)), 1e-12);
    EXPECT_LT(std::abs(j - oracle::iou(a, b)), 1e-12);
    EXPECT_NEAR(d, 2 * j / (1 + j), 1e-9);
    EXPECT_GE(d, j);
  }
}

TEST(Report, MeansPooledAndOrder) {
  ReportBuilder rb(EvalStage::postprocessed);
  BinaryMask t(2, 2, true), half(2, 2);
  half.set(0, 0, true);
  half.set(0, 1, true);
  rb.add("b", t, t);
  rb.add("a", half, t);
  const auto r = rb.finish();
  ASSERT_EQ(r.count, 2u);
  EXPECT_EQ(r.samples[0].id, "b");
  EXPECT_EQ(r.samples[1].id, "a");
  const double d_half = 2.0 * 2 / (2 + 4);
  EXPECT_DOUBLE_EQ(r.mean_dice, (1.0 + d_half) / 2);
  EXPECT_DOUBLE_EQ(r.mean_iou, (1.0 + 0.5) / 2);
  EXPECT_DOUBLE_EQ(r.pooled_dice, 2.0 * 6 / (6 + 8));
  EXPECT_DOUBLE_EQ(r.pooled_iou, 6.0 / 8);
  EXPECT_EQ(r.stage, EvalStage::postprocessed);
}
