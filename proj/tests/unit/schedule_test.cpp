#include <vector>

#include <gtest/gtest.h>

#include "cmls/errors.hpp"
#include "cmls/schedule.hpp"

namespace cmls {
namespace {

std::vector<StopDecision> trace(const std::vector<double>& losses, int patience, double min_delta = 1e-4) {
  TrainState s;
  std::vector<StopDecision> out;
  for (double l : losses) out.push_back(early_stop_check(s, l, patience, min_delta));
  return out;
}

TEST(EarlyStop, MonotoneImprovementContinues) {
  for (StopDecision d : trace({1.0, 0.9, 0.8}, 2)) EXPECT_EQ(d, StopDecision::continue_training);
}

TEST(EarlyStop, StopsAfterPatienceNonImprovements) {
  const auto d = trace({1.0, 1.1, 1.2}, 2);
  EXPECT_EQ(d[0], StopDecision::continue_training);
  EXPECT_EQ(d[1], StopDecision::continue_training);
  EXPECT_EQ(d[2], StopDecision::stop);
}

TEST(EarlyStop, TinyImprovementDoesNotCount) {
  TrainState s;
  early_stop_check(s, 1.0, 3, 1e-4);
  early_stop_check(s, 1.0 - 1e-9, 3, 1e-4);
  EXPECT_EQ(s.patience_counter, 1);
  EXPECT_FALSE(s.last_improved);
  EXPECT_EQ(s.best_valid_loss, 1.0);
}

TEST(EarlyStop, ImprovementResetsCounterAndBestIsNonIncreasing) {
  TrainState s;
  const std::vector<double> losses = {2.0, 2.5, 2.4, 1.5, 1.6, 1.7, 1.2, 3.0};
  double best = 1e300;
  for (double l : losses) {
    early_stop_check(s, l, 10);
    EXPECT_LE(s.best_valid_loss, best);
    best = s.best_valid_loss;
  }
  EXPECT_EQ(s.best_valid_loss, 1.2);
  EXPECT_EQ(s.patience_counter, 1);
  EXPECT_EQ(s.epoch, 8);
}

TEST(Plateau, ThreeStagnantEpochsHalveTheRate) {
  ScheduleConfig cfg;
  cfg.kind = ScheduleKind::plateau_decay;
  EXPECT_EQ(plateau_multiplier(cfg, std::vector<double>{1.0}), 1.0);
  EXPECT_EQ(plateau_multiplier(cfg, std::vector<double>{1.0, 1.0, 1.0}), 1.0);
  EXPECT_EQ(plateau_multiplier(cfg, std::vector<double>{1.0, 1.0, 1.0, 1.0}), 0.5);
  EXPECT_EQ(schedule_lr(cfg, 0, 10, std::vector<double>{1.0, 1.2, 1.1, 1.05}), 0.5);
}

TEST(Plateau, RepeatedPlateausCompound) {
  ScheduleConfig cfg;
  const std::vector<double> h = {1, 1, 1, 1, 1, 1, 1, 0.5, 0.6};
  EXPECT_EQ(plateau_multiplier(cfg, h), 0.25);
  const std::vector<double> improving = {1, 0.9, 0.8, 0.7, 0.6};
  EXPECT_EQ(plateau_multiplier(cfg, improving), 1.0);
}

TEST(OneCycle, PeakStartAndEnd) {
  ScheduleConfig cfg;
  cfg.kind = ScheduleKind::one_cycle;
  const long total = 1000;
  EXPECT_DOUBLE_EQ(one_cycle_multiplier(cfg, 500, total), 1.0);
  EXPECT_DOUBLE_EQ(one_cycle_multiplier(cfg, 0, total), 1.0 / 25);
  EXPECT_DOUBLE_EQ(one_cycle_multiplier(cfg, total, total), 1.0 / 25 / 1e4);
  EXPECT_DOUBLE_EQ(schedule_lr(cfg, 500, total, {}) * cfg.max_lr, 6e-3);
  double prev = 0.0;
  for (long s = 0; s <= 500; s += 50) {
    EXPECT_GT(one_cycle_multiplier(cfg, s, total), prev);
    prev = one_cycle_multiplier(cfg, s, total);
  }
  for (long s = 550; s <= 1000; s += 50) {
    EXPECT_LT(one_cycle_multiplier(cfg, s, total), prev);
    prev = one_cycle_multiplier(cfg, s, total);
  }
}

TEST(Constant, AlwaysOne) {
  ScheduleConfig cfg;
  cfg.kind = ScheduleKind::constant;
  EXPECT_EQ(schedule_lr(cfg, 17, 20, std::vector<double>{1, 1, 1, 1, 1, 1}), 1.0);
}

TEST(ScheduleConfig, ValidationAndNames) {
  ScheduleConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.plateau_factor = 1.5;
  EXPECT_THROW(cfg.validate(), ValidationError);
  cfg = ScheduleConfig{};
  cfg.div_factor = 0;
  EXPECT_THROW(cfg.validate(), ValidationError);
  for (ScheduleKind k : {ScheduleKind::constant, ScheduleKind::plateau_decay, ScheduleKind::one_cycle})
    EXPECT_EQ(parse_schedule(to_string(k)), k);
  EXPECT_THROW(parse_schedule("cosine"), ValidationError);
}

}  // namespace
}  // namespace cmls
