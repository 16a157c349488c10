#include <gtest/gtest.h>

#include <cmath>

#include "acc/sim.hpp"

using namespace acc;

namespace {

WorldState at(double lead_x, double lead_v, double host_x, double host_v) {
  WorldState w;
  w.lead = {lead_x, lead_v, 0.0};
  w.host = {host_x, host_v, 0.0};
  return w;
}

}  // namespace

TEST(ForceToAccel, Endpoints) {
  const ActuatorMap m;
  EXPECT_DOUBLE_EQ(force_to_accel(1.0, m), 3.5);
  EXPECT_DOUBLE_EQ(force_to_accel(0.0, m), 0.0);
  EXPECT_DOUBLE_EQ(force_to_accel(-1.0, m), -5.5);
  EXPECT_DOUBLE_EQ(force_to_accel(-0.5, m), -2.75);
}

TEST(ForceToAccel, RejectsOutOfRange) {
  EXPECT_THROW(force_to_accel(1.0001, {}), ContractError);
  EXPECT_THROW(force_to_accel(-1.5, {}), ContractError);
  EXPECT_THROW(force_to_accel(std::nan(""), {}), ContractError);
}

TEST(ForceToAccel, MonotoneAndContinuous) {
  double prev = force_to_accel(-1.0, {});
  for (int i = -999; i <= 1000; ++i) {
    const double a = force_to_accel(i / 1000.0, {});
    EXPECT_GE(a, prev);
    prev = a;
  }
  EXPECT_NEAR(force_to_accel(1e-12, {}), force_to_accel(-1e-12, {}), 1e-10);
}

TEST(Gap, Definition) {
  EXPECT_DOUBLE_EQ(gap(at(100, 0, 40, 0)), 55.0);
  EXPECT_DOUBLE_EQ(gap(at(1100, 0, 1040, 0)), 55.0);
  EXPECT_DOUBLE_EQ(gap(at(45, 0, 40, 0)), 0.0);
}

TEST(Step, EqualSpeedsKeepGap) {
  const EpisodeSpec spec;
  WorldState w = at(60, 30, 0, 30);
  const double g0 = gap(w);
  for (int i = 0; i < 1000; ++i) w = step(w, 0.0, 30.0, spec);
  EXPECT_NEAR(gap(w), g0, 1e-9);
  EXPECT_EQ(w.step_index, 1000u);
  EXPECT_DOUBLE_EQ(w.sim_time, 1000 * 0.02);
}

TEST(Step, HandArithmetic) {
  const EpisodeSpec spec;
  const WorldState w = at(100, 20, 0, 20);
  const WorldState n = step(w, 1.0, 20.0, spec);
  EXPECT_NEAR(n.host.speed, 20.02, 1e-12);
  EXPECT_NEAR(n.host.position - w.host.position, 0.4004, 1e-12);
}

TEST(Step, GapGrowsByRelativeSpeed) {
  const EpisodeSpec spec;
  WorldState w = at(60, 31, 0, 30);
  for (int i = 0; i < 50; ++i) {
    const WorldState n = step(w, 0.0, 31.0, spec);
    EXPECT_NEAR(gap(n) - gap(w), 0.02, 1e-9);
    w = n;
  }
}

TEST(Step, GapChangeMatchesSpeedUpdates) {
  // One tick in closed form: dgap = (v_lead' - v_host') * dt with v_host' = v + a dt.
  const EpisodeSpec spec;
  Rng rng(3);
  std::uniform_real_distribution<double> v(5, 35), a(-5.5, 3.5);
  for (int i = 0; i < 1000; ++i) {
    const WorldState w = at(100, v(rng), 0, v(rng));
    const double acc = a(rng), lead_next = v(rng);
    const WorldState n = step(w, acc, lead_next, spec);
    const double host_next = w.host.speed + acc * spec.dt;
    EXPECT_NEAR(gap(n) - gap(w), (lead_next - host_next) * spec.dt, 1e-9);
  }
}

TEST(Step, HostSpeedNeverNegativeFuzz) {
  const EpisodeSpec spec;
  Rng rng(11);
  std::uniform_real_distribution<double> accel(-5.5, 3.5), lead(0.0, 35.0);
  WorldState w = at(1e6, 10, 0, 1.0);
  for (int i = 0; i < 1'000'000; ++i) {
    w = step(w, accel(rng) - 2.0, lead(rng), spec);
    ASSERT_GE(w.host.speed, 0.0);
  }
}

TEST(Step, BrakingToStopRecordsRealizedAccel) {
  const EpisodeSpec spec;
  const WorldState w = at(100, 0, 0, 0.05);
  const WorldState n = step(w, -5.5, 0.0, spec);
  EXPECT_EQ(n.host.speed, 0.0);
  EXPECT_DOUBLE_EQ(n.host.accel, -0.05 / 0.02);
}

TEST(Step, Deterministic) {
  const EpisodeSpec spec;
  const WorldState w = at(73.25, 29.1, 3.5, 27.7);
  EXPECT_EQ(step(w, 1.37, 29.3, spec), step(w, 1.37, 29.3, spec));
}

TEST(Step, RejectsBadInput) {
  const EpisodeSpec spec;
  const WorldState w = at(60, 30, 0, 30);
  EXPECT_THROW(step(w, std::nan(""), 30, spec), ContractError);
  EXPECT_THROW(step(w, 0, INFINITY, spec), ContractError);
  EXPECT_THROW(step(w, 0, -1, spec), ContractError);
}

TEST(Termination, Cases) {
  EpisodeSpec spec;
  spec.max_steps = 1000;
  WorldState w = at(100, 30, 0, 30);
  w.lead.position = 5 - 0.1;
  EXPECT_EQ(check_termination(w, spec), TerminationStatus::Collision);
  w.lead.position = 305.5;
  EXPECT_EQ(check_termination(w, spec), TerminationStatus::GapExceeded);
  w.lead.position = 60;
  w.step_index = 10;
  EXPECT_EQ(check_termination(w, spec), TerminationStatus::Running);
  w.step_index = 1000;
  EXPECT_EQ(check_termination(w, spec), TerminationStatus::TimeLimit);
}

TEST(Termination, CollisionBeatsTimeLimit) {
  EpisodeSpec spec;
  spec.max_steps = 10;
  WorldState w = at(4, 30, 0, 30);
  w.step_index = 50;
  EXPECT_EQ(check_termination(w, spec), TerminationStatus::Collision);
  w.lead.position = 400;
  EXPECT_EQ(check_termination(w, spec), TerminationStatus::GapExceeded);
}

TEST(Reset, IceRanges) {
  const EpisodeSpec spec = EpisodeSpec::ice();
  Rng rng(5);
  for (int i = 0; i < 10000; ++i) {
    const WorldState w = reset(spec, rng);
    ASSERT_TRUE(w.lead.speed >= 27 && w.lead.speed <= 33);
    ASSERT_TRUE(w.host.speed >= 25 && w.host.speed <= 30);
    ASSERT_TRUE(gap(w) >= 25 - 1e-12 && gap(w) <= 35 + 1e-12);
    ASSERT_EQ(w.host.position, 0.0);
    ASSERT_EQ(w.sim_time, 0.0);
  }
}

TEST(Reset, EvRanges) {
  const EpisodeSpec spec = EpisodeSpec::ev();
  Rng rng(6);
  for (int i = 0; i < 10000; ++i) {
    const WorldState w = reset(spec, rng);
    ASSERT_TRUE(w.host.speed >= 11 && w.host.speed <= 16);
  }
}

TEST(Reset, SeedDeterminism) {
  Rng a(42), b(42);
  EXPECT_EQ(reset(EpisodeSpec::ice(), a), reset(EpisodeSpec::ice(), b));
}

TEST(Spec, Validation) {
  EpisodeSpec s;
  EXPECT_NO_THROW(s.validate());
  s.dt = 0;
  EXPECT_THROW(s.validate(), ContractError);
  s = {};
  s.max_gap = 30;
  EXPECT_THROW(s.validate(), ContractError);
  s = {};
  s.gap0 = {40, 30};
  EXPECT_THROW(s.validate(), ContractError);
}
