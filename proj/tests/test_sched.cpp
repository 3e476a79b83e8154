#include <gtest/gtest.h>

#include <cmath>

#include "adamtrack/sched.hpp"

using namespace adamtrack;

TEST(Schedule, ConstantReturnsOffset) {
  const auto s = ScheduleSpec::constant(0.25);
  EXPECT_EQ(schedule_value(s, 0), 0.25);
  EXPECT_EQ(schedule_value(s, 1000), 0.25);
}

TEST(Schedule, LogGrowsWithStep) {
  const auto s = ScheduleSpec::log(0.5);
  EXPECT_DOUBLE_EQ(schedule_value(s, 0), 0.5 * std::log(2.0));
  EXPECT_DOUBLE_EQ(schedule_value(s, 98), 0.5 * std::log(100.0));
  for (long t = 0; t < 50; ++t) {
    EXPECT_LT(schedule_value(s, t), schedule_value(s, t + 1));
  }
}

TEST(Schedule, RejectsNegativeInputs) {
  EXPECT_THROW(schedule_value(ScheduleSpec::constant(1.0), -1), PreconditionError);
  EXPECT_THROW(validate(ScheduleSpec::constant(-1.0)), PreconditionError);
  EXPECT_THROW(validate(ScheduleSpec::log(NAN)), PreconditionError);
}

TEST(Drift, StepHasRequestedNorm) {
  Rng rng = make_stream(3, 2);
  const Vec target = gaussian_vector(40, rng);
  for (double delta : {1e-3, 0.5, 7.0}) {
    const Vec next = advance_target(target, delta, DriftMode::full_space(), rng);
    EXPECT_NEAR((next - target).norm(), delta, 1e-12 * std::max(1.0, delta));
  }
}

TEST(Drift, ZeroDeltaConsumesNoRandomness) {
  Rng a = make_stream(5, 2), b = make_stream(5, 2);
  const Vec target = Vec::Ones(8);
  const Vec same = advance_target(target, 0.0, DriftMode::full_space(), a);
  EXPECT_EQ(same, target);
  EXPECT_EQ(a(), b());
}

TEST(Drift, SupportModeMovesOnlySupport) {
  Rng rng = make_stream(1, 2);
  const Vec target = Vec::Zero(10);
  const Vec next = advance_target(target, 2.0, DriftMode::on_support({1, 4, 7}), rng);
  for (Index j = 0; j < 10; ++j) {
    if (j == 1 || j == 4 || j == 7) continue;
    EXPECT_EQ(next[j], 0.0);
  }
  EXPECT_NEAR(next.norm(), 2.0, 1e-12);
}

TEST(Drift, SubspaceModeStaysInSpan) {
  Rng rng = make_stream(2, 2);
  const Mat q = Eigen::HouseholderQR<Mat>(Mat::Random(12, 3)).householderQ() *
                Mat::Identity(12, 3);
  const DriftMode mode = DriftMode::subspace(q);
  validate(mode, 12);
  const Vec step = advance_target(Vec::Zero(12), 1.0, mode, rng);
  EXPECT_NEAR((step - q * (q.transpose() * step)).norm(), 0.0, 1e-12);
  EXPECT_NEAR(step.norm(), 1.0, 1e-12);
}

TEST(Drift, ModeValidation) {
  EXPECT_THROW(validate(DriftMode::on_support({}), 5), PreconditionError);
  EXPECT_THROW(validate(DriftMode::on_support({0, 5}), 5), PreconditionError);
  EXPECT_THROW(validate(DriftMode::on_support({2, 2}), 5), PreconditionError);
  EXPECT_THROW(validate(DriftMode::subspace(Mat::Ones(5, 2)), 5), PreconditionError);
  Rng rng = make_stream(0, 2);
  EXPECT_THROW(advance_target(Vec::Zero(3), -1.0, DriftMode::full_space(), rng),
               PreconditionError);
}

TEST(Streams, SameSeedAndTagReplay) {
  Rng a = make_stream(11, 3), b = make_stream(11, 3), c = make_stream(11, 4);
  const Vec x = gaussian_vector(16, a);
  EXPECT_EQ(x, gaussian_vector(16, b));
  EXPECT_NE(x, gaussian_vector(16, c));
}
