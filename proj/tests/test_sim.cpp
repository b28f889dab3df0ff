#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "voicepilot/dsl/validator.hpp"
#include "voicepilot/error.hpp"
#include "voicepilot/sim/executor.hpp"

using namespace voicepilot;
using namespace voicepilot::sim;
using dsl::Program;

namespace {

RobotConfig default_config() {
  RobotConfig c;
  c.bowls = {"blueberries", "granola", "yogurt", "empty"};
  return c;
}

dsl::ValidatedProgram validated(const Program& p, const RobotConfig& c = default_config()) {
  return dsl::validate(p, c.variables, {}).validated;
}

std::vector<ExecutionEvent> run_all(Executor& ex) {
  ex.run_until_settled();
  return ex.drain_events();
}

std::vector<std::string> announcements(const std::vector<ExecutionEvent>& events) {
  std::vector<std::string> out;
  for (const auto& e : events) {
    if (e.kind == EventKind::announce) out.push_back(e.detail);
  }
  return out;
}

// Independent trapezoid/triangle profile: accelerate at `a` to at most `v`,
// cruise, decelerate symmetrically.
double oracle_duration_s(double length, double v, double a) {
  const double t_ramp = v / a;
  const double d_ramp = 0.5 * a * t_ramp * t_ramp;
  if (2 * d_ramp <= length) return 2 * t_ramp + (length - 2 * d_ramp) / v;
  const double t_half = std::sqrt(length / a);
  return 2 * t_half;
}

std::int64_t first_time(const std::vector<ExecutionEvent>& events, EventKind kind) {
  for (const auto& e : events) {
    if (e.kind == kind) return e.t_ms;
  }
  return -1;
}

}  // namespace

TEST(Environment, LoadsBowlsAndDefaults) {
  const RobotState s = load_environment(default_config());
  EXPECT_EQ(s.bowl_contents[2], "yogurt");
  EXPECT_EQ(s.exec_status, ExecStatus::idle);
  EXPECT_TRUE(s.spoon_attached);
  EXPECT_EQ(s.arm_phase.kind, ArmPhaseKind::home);
  // Grounded default 2.5 on 0..5 lands on the midpoint of each native range.
  EXPECT_NEAR(s.variables_native.speed, 0.6, 1e-12);
  EXPECT_NEAR(s.variables_native.acceleration, 0.6, 1e-12);
  EXPECT_NEAR(s.variables_native.scoop_depth, 30.0, 1e-12);
}

TEST(Environment, RejectsWrongBowlCount) {
  RobotConfig c = default_config();
  c.bowls.pop_back();
  EXPECT_THROW(load_environment(c), ConfigError);
  c = default_config();
  c.trajectories.travel = 0;
  EXPECT_THROW(load_environment(c), ConfigError);
  c = default_config();
  c.speed = 7;
  EXPECT_THROW(load_environment(c), ConfigError);
}

TEST(Timing, MatchesKinematicOracle) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> len(0.01, 3.0), v(0.05, 2.0), a(0.05, 5.0);
  for (int i = 0; i < 2000; ++i) {
    const double l = len(rng), sp = v(rng), ac = a(rng);
    EXPECT_NEAR(segment_duration_s(l, sp, ac), oracle_duration_s(l, sp, ac), 1e-9);
  }
}

TEST(Executor, AnnouncesScoopingThenReady) {
  Executor ex(default_config());
  ex.execute(validated(Program{{dsl::Scoop{1}, dsl::MoveToMouth{}}}));
  const auto events = run_all(ex);
  EXPECT_EQ(announcements(events), (std::vector<std::string>{"Scooping now", "Ready for another command"}));
  EXPECT_EQ(events.back().kind, EventKind::program_done);
  EXPECT_EQ(ex.state().exec_status, ExecStatus::idle);
  EXPECT_EQ(ex.state().arm_phase.kind, ArmPhaseKind::at_mouth);
}

TEST(Executor, EmptyProgramFinishesImmediately) {
  Executor ex(default_config());
  ex.execute(validated(Program{}));
  const auto events = run_all(ex);
  ASSERT_EQ(events.size(), 2u);
  EXPECT_EQ(events[0].detail, "Ready for another command");
  EXPECT_EQ(events[1].kind, EventKind::program_done);
}

TEST(Executor, EventsAreOrdered) {
  Executor ex(default_config());
  ex.execute(validated(Program{{dsl::ScrapeThenScoop{2}, dsl::MoveToMouth{}, dsl::Scoop{0},
                                dsl::MoveToMouth{}}}));
  const auto events = run_all(ex);
  for (std::size_t i = 1; i < events.size(); ++i) {
    EXPECT_GT(events[i].seq, events[i - 1].seq);
    EXPECT_GE(events[i].t_ms, events[i - 1].t_ms);
  }
  EXPECT_EQ(announcements(events).front(), "Scraping now");
}

TEST(Executor, SegmentDurationsFollowVariables) {
  RobotConfig c = default_config();
  Executor ex(c);
  ex.execute(validated(Program{{dsl::SetVar{dsl::Variable::speed, 5}, dsl::SetVar{dsl::Variable::scoop_depth, 3.2},
                                dsl::Scoop{0}}}));
  const auto events = run_all(ex);
  // scoop_dip: base length plus a 35.6 mm dip down and back up.
  const double dip = c.trajectories.scoop_dip + 2 * 35.6 * c.trajectories.path_units_per_mm;
  const auto expected = std::llround(oracle_duration_s(dip, 1.0, 0.6) * 1000);
  std::int64_t start = -1, end = -1;
  for (const auto& e : events) {
    if (e.kind == EventKind::segment_start && e.detail.rfind("scoop_dip", 0) == 0) start = e.t_ms;
    if (e.kind == EventKind::segment_end && e.detail.rfind("scoop_dip", 0) == 0) end = e.t_ms;
  }
  EXPECT_EQ(end - start, expected);
}

TEST(Executor, DoublingSpeedHalvesTravelTime) {
  RobotConfig c = default_config();
  c.variables.speed = {0, 5, 0.1, 1.1, 2.5};
  c.variables.acceleration = {0, 5, 1000, 2000, 2.5};
  c.trajectories.travel = 20;  // long enough that ramps are negligible
  const auto travel_ms = [&](double grounded_speed) {
    Executor ex(c);
    ex.execute(validated(Program{{dsl::SetVar{dsl::Variable::speed, grounded_speed}, dsl::Scoop{1},
                                  dsl::MoveToMouth{}}},
                         c));
    std::int64_t total = 0, started = 0;
    for (const auto& e : run_all(ex)) {
      if (e.detail.rfind("travel", 0) != 0) continue;
      if (e.kind == EventKind::segment_start) started = e.t_ms;
      if (e.kind == EventKind::segment_end) total += e.t_ms - started;
    }
    return total;
  };
  const auto slow = travel_ms(0.5);  // native 0.2
  const auto fast = travel_ms(1.5);  // native 0.4
  ASSERT_GT(slow, 0);
  EXPECT_NEAR(static_cast<double>(fast) / static_cast<double>(slow), 0.5, 1e-3);
}

TEST(Executor, EmptyBowlWarnsBeforeAnnouncing) {
  Executor ex(default_config());
  ex.execute(validated(Program{{dsl::Scoop{3}}}));
  const auto events = run_all(ex);
  ASSERT_GE(events.size(), 2u);
  EXPECT_EQ(events[0].kind, EventKind::warning);
  EXPECT_EQ(events[1].detail, "Scooping now");
}

TEST(Executor, RejectsSecondProgramWhileRunning) {
  Executor ex(default_config());
  ex.execute(validated(Program{{dsl::Scoop{1}}}));
  EXPECT_THROW(ex.execute(validated(Program{{dsl::Scoop{1}}})), AlreadyRunning);
}

TEST(Executor, RejectsUnvalidatedValues) {
  Executor ex(default_config());
  EXPECT_THROW(ex.execute(dsl::ValidatedProgram{Program{{dsl::SetVar{dsl::Variable::speed, 9}}}}), InternalAssert);
}

TEST(Interrupt, StopWithinOneTickAndPermanent) {
  Executor ex(default_config());
  const auto h = ex.execute(validated(Program{{dsl::Scoop{1}, dsl::MoveToMouth{}, dsl::Scoop{2}}}));
  for (int i = 0; i < 7; ++i) ex.tick();
  const auto ack = ex.interrupt(h, InterruptKind::stop);
  ex.tick();
  auto events = ex.drain_events();
  const auto stopped = first_time(events, EventKind::stopped);
  ASSERT_GE(stopped, 0);
  EXPECT_LE(stopped - ack.requested_at_ms, ex.tick_ms());
  for (int i = 0; i < 500; ++i) ex.tick();
  EXPECT_TRUE(ex.drain_events().empty());
  EXPECT_EQ(ex.state().exec_status, ExecStatus::stopped);
  EXPECT_THROW(ex.resume(h), NotPaused);
  EXPECT_THROW(ex.interrupt(h, InterruptKind::pause), NotRunning);
}

TEST(Interrupt, PauseWhenIdleIsRefused) {
  Executor ex(default_config());
  EXPECT_THROW(ex.interrupt(ExecutionHandle{1}, InterruptKind::pause), NotRunning);
  EXPECT_THROW(ex.resume(ExecutionHandle{1}), NotPaused);
}

TEST(Interrupt, PauseMidTravelPreservesRemainingTime) {
  Executor ex(default_config());
  const auto h = ex.execute(validated(Program{{dsl::Scoop{1}}}));
  ex.tick();  // travel starts at t=0
  auto events = ex.drain_events();
  const auto travel_ms = std::stoll(events.back().detail.substr(events.back().detail.rfind("bowl 1 ") + 7));
  for (int i = 0; i < 9; ++i) ex.tick();
  const std::int64_t elapsed = ex.now_ms();
  ex.interrupt(h, InterruptKind::pause);
  for (int i = 0; i < 40; ++i) ex.tick();  // two simulated seconds paused
  const std::int64_t resumed_at = ex.now_ms();
  ex.resume(h);
  ex.run_until_settled();
  events = ex.drain_events();
  std::int64_t end = -1;
  for (const auto& e : events) {
    if (e.kind == EventKind::segment_end && e.detail == "travel bowl 1") end = e.t_ms;
  }
  EXPECT_NEAR(static_cast<double>(end - resumed_at), static_cast<double>(travel_ms - elapsed),
              static_cast<double>(ex.tick_ms()));
}

TEST(Interrupt, SleepClockSuspendsWhilePaused) {
  Executor ex(default_config());
  const auto h = ex.execute(validated(Program{{dsl::Sleep{2}}}));
  for (int i = 0; i < 10; ++i) ex.tick();
  ex.interrupt(h, InterruptKind::pause);
  for (int i = 0; i < 100; ++i) ex.tick();
  ex.resume(h);
  ex.run_until_settled();
  const auto events = ex.drain_events();
  const auto start = first_time(events, EventKind::sleep_start);
  const auto end = first_time(events, EventKind::sleep_end);
  const auto paused = first_time(events, EventKind::paused);
  const auto resumed = first_time(events, EventKind::resumed);
  EXPECT_EQ((end - start) - (resumed - paused), 2000);
}

TEST(Interrupt, ImmediateResumeHasNoMotionBetween) {
  Executor ex(default_config());
  const auto h = ex.execute(validated(Program{{dsl::Scoop{1}}}));
  ex.tick();
  ex.drain_events();
  ex.interrupt(h, InterruptKind::pause);
  ex.tick();
  ex.resume(h);
  ex.tick();
  const auto events = ex.drain_events();
  ASSERT_GE(events.size(), 2u);
  EXPECT_EQ(events[0].kind, EventKind::paused);
  EXPECT_EQ(events[1].kind, EventKind::resumed);
}

TEST(Interrupt, ProgramPauseWaitsForResume) {
  Executor ex(default_config());
  const auto h = ex.execute(validated(Program{{dsl::PauseIndefinitely{}, dsl::Scoop{0}}}));
  ex.run_until_settled();
  EXPECT_EQ(ex.state().exec_status, ExecStatus::paused);
  ex.resume(h);
  ex.run_until_settled();
  EXPECT_EQ(ex.state().exec_status, ExecStatus::idle);
}

TEST(Interrupt, ProgramStopEndsRun) {
  Executor ex(default_config());
  ex.execute(validated(Program{{dsl::Stop{}, dsl::Scoop{0}}}));
  const auto events = run_all(ex);
  EXPECT_EQ(events.back().kind, EventKind::stopped);
  EXPECT_EQ(ex.state().exec_status, ExecStatus::stopped);
  // A new program may follow a stopped one.
  EXPECT_NO_THROW(ex.execute(validated(Program{{dsl::MoveToMouth{}}})));
}

TEST(Fault, SpoonDetachStopsTheRun) {
  Executor ex(default_config());
  ex.execute(validated(Program{{dsl::Scoop{1}, dsl::MoveToMouth{}}}));
  ex.tick();
  ex.inject_fault(Fault::spoon_detached);
  ex.tick();
  const auto events = ex.drain_events();
  EXPECT_EQ(events[events.size() - 2].kind, EventKind::warning);
  EXPECT_EQ(events.back().detail, "fault");
  EXPECT_FALSE(ex.state().spoon_attached);
  ex.reattach_spoon();
  EXPECT_TRUE(ex.state().spoon_attached);
}

TEST(TickDriver, UnpacedDriverCompletesProgram) {
  Executor ex(default_config());
  ex.execute(validated(Program{{dsl::Scoop{1}, dsl::MoveToMouth{}}}));
  {
    TickDriver driver(ex, false);
    for (int i = 0; i < 2000 && ex.state().exec_status == ExecStatus::running; ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  }
  EXPECT_EQ(ex.state().exec_status, ExecStatus::idle);
}
