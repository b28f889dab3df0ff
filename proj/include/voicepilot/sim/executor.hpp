#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "voicepilot/dsl/validator.hpp"
#include "voicepilot/sim/robot.hpp"

namespace voicepilot::sim {

struct ExecutionHandle {
  std::uint64_t run = 0;
  bool operator==(const ExecutionHandle&) const = default;
};

enum class InterruptKind { stop, pause };
enum class Fault { spoon_detached };

// Returned when a control request is accepted. The matching paused /
// stopped / resumed event follows at the next tick boundary.
struct ControlAck {
  std::uint64_t run = 0;
  std::int64_t requested_at_ms = 0;
};

// Tick-based program executor on a simulated clock.
//
// State mutation happens inside tick(); execute/interrupt/resume only
// validate against the projected state and enqueue a request, so they are
// safe to call from any thread. Control requests are drained at the start
// of every tick, which bounds interrupt latency by one tick.
class Executor {
 public:
  explicit Executor(RobotConfig config);

  ExecutionHandle execute(const dsl::ValidatedProgram& program);
  ControlAck interrupt(ExecutionHandle handle, InterruptKind kind);
  ControlAck resume(ExecutionHandle handle);
  void inject_fault(Fault fault);
  // Puts a new spoon on the arm after a detachment fault.
  void reattach_spoon();

  // Advances the simulated clock by one tick.
  void tick();
  // Ticks until the current run finishes or pauses, at most `max_ticks`.
  void run_until_settled(std::size_t max_ticks = 1'000'000);

  std::vector<ExecutionEvent> drain_events();

  std::int64_t now_ms() const;
  std::int64_t tick_ms() const { return config_.tick_ms; }
  RobotState state() const;
  std::optional<ExecutionHandle> current() const;
  const RobotConfig& config() const { return config_; }

 private:
  struct Step {
    enum class Kind { announce, warning, segment, sleep, set_var, pause, stop } kind;
    std::string text;
    SegmentKind segment = SegmentKind::travel;
    SegmentTarget target;
    std::int64_t sleep_ms = 0;
    dsl::Variable var = dsl::Variable::speed;
    double native = 0.0;
  };
  struct Activity {
    std::size_t step = 0;
    std::int64_t remaining_ms = 0;
    bool is_sleep = false;
  };
  enum class ControlKind { stop, pause, resume, fault };
  struct Control {
    ControlKind kind;
    std::uint64_t run;
  };

  void apply_controls_locked();
  void advance_locked(std::int64_t budget);
  void begin_step_locked(std::int64_t t);
  void finish_activity_locked(std::int64_t t);
  void emit_locked(std::int64_t t, EventKind kind, std::string detail);
  ExecStatus projected_status_locked() const;

  RobotConfig config_;
  mutable std::mutex mu_;
  RobotState state_;
  std::int64_t now_ms_ = 0;
  std::uint64_t next_seq_ = 1;
  std::uint64_t run_ = 0;
  std::vector<Step> plan_;
  std::size_t next_step_ = 0;
  std::optional<Activity> activity_;
  std::deque<Control> controls_;
  std::deque<ExecutionEvent> events_;
};

// Drives an Executor from a background thread. With `paced` set, ticks are
// spaced by tick_ms of wall-clock time; otherwise the simulated clock runs
// as fast as the thread is scheduled.
class TickDriver {
 public:
  TickDriver(Executor& executor, bool paced);
  ~TickDriver();
  TickDriver(const TickDriver&) = delete;
  TickDriver& operator=(const TickDriver&) = delete;

  void stop();

 private:
  Executor& executor_;
  bool paced_;
  std::atomic<bool> running_{true};
  std::thread thread_;
};

}  // namespace voicepilot::sim
