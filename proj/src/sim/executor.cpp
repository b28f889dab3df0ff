#include "voicepilot/sim/executor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <variant>

#include "voicepilot/error.hpp"

namespace voicepilot::sim {

namespace {

std::string describe(SegmentKind kind, const SegmentTarget& target) {
  std::string s(to_string(kind));
  if (target.bowl) return s + " bowl " + std::to_string(*target.bowl);
  return s + " mouth";
}

bool within(double v, const dsl::VariableRange& r) { return v >= r.native_lo && v <= r.native_hi; }

}  // namespace

Executor::Executor(RobotConfig config) : config_(std::move(config)) {
  state_ = load_environment(config_);
}

ExecStatus Executor::projected_status_locked() const {
  ExecStatus s = state_.exec_status;
  for (const Control& c : controls_) {
    if (c.kind == ControlKind::fault) {
      if (s == ExecStatus::running || s == ExecStatus::paused) s = ExecStatus::stopped;
      continue;
    }
    if (c.run != run_) continue;
    switch (c.kind) {
      case ControlKind::stop:
        if (s == ExecStatus::running || s == ExecStatus::paused) s = ExecStatus::stopped;
        break;
      case ControlKind::pause:
        if (s == ExecStatus::running) s = ExecStatus::paused;
        break;
      case ControlKind::resume:
        if (s == ExecStatus::paused) s = ExecStatus::running;
        break;
      case ControlKind::fault:
        break;
    }
  }
  return s;
}

ExecutionHandle Executor::execute(const dsl::ValidatedProgram& program) {
  std::vector<Step> plan;
  NativeVariables vars;
  {
    std::lock_guard lock(mu_);
    vars = state_.variables_native;
  }
  const auto& spec = config_.variables;

  for (const dsl::Stmt& stmt : program.program.stmts) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          auto segment = [&](SegmentKind k, SegmentTarget target) {
            Step st{Step::Kind::segment};
            st.segment = k;
            st.target = target;
            plan.push_back(st);
          };
          auto bite_prelude = [&](int bowl, std::string_view cue) {
            if (bowl >= 0 && static_cast<std::size_t>(bowl) < kBowlCount &&
                config_.bowls[static_cast<std::size_t>(bowl)] == kEmptyBowl) {
              plan.push_back({Step::Kind::warning, "bowl " + std::to_string(bowl) + " is empty"});
            }
            plan.push_back({Step::Kind::announce, std::string(cue)});
          };
          if constexpr (std::is_same_v<T, dsl::Scoop>) {
            bite_prelude(s.bowl, kScoopingNow);
            segment(SegmentKind::travel, {s.bowl});
            segment(SegmentKind::scoop_dip, {s.bowl});
          } else if constexpr (std::is_same_v<T, dsl::ScrapeThenScoop>) {
            bite_prelude(s.bowl, kScrapingNow);
            segment(SegmentKind::travel, {s.bowl});
            segment(SegmentKind::scrape_pass, {s.bowl});
            segment(SegmentKind::scoop_dip, {s.bowl});
          } else if constexpr (std::is_same_v<T, dsl::MoveToMouth>) {
            segment(SegmentKind::travel, {});
            segment(SegmentKind::present_at_mouth, {});
          } else if constexpr (std::is_same_v<T, dsl::Start>) {
            // Already running; nothing to do.
          } else if constexpr (std::is_same_v<T, dsl::Stop>) {
            plan.push_back({Step::Kind::stop});
          } else if constexpr (std::is_same_v<T, dsl::PauseIndefinitely>) {
            plan.push_back({Step::Kind::pause});
          } else if constexpr (std::is_same_v<T, dsl::SetVar>) {
            Step st{Step::Kind::set_var};
            st.var = s.var;
            st.native = dsl::scale_variable(s.var, s.value, spec);
            if (!within(st.native, spec[s.var])) {
              throw InternalAssert(std::string(dsl::to_string(s.var)) +
                                   " outside native range; program was not validated");
            }
            vars[s.var] = st.native;
            plan.push_back(st);
          } else if constexpr (std::is_same_v<T, dsl::Sleep>) {
            Step st{Step::Kind::sleep};
            st.sleep_ms = std::llround(s.seconds * 1000.0);
            if (st.sleep_ms < 0) throw InternalAssert("negative sleep; program was not validated");
            plan.push_back(st);
          }
        },
        stmt);
  }
  for (dsl::Variable v : dsl::kAllVariables) {
    if (!within(vars[v], spec[v])) {
      throw InternalAssert(std::string(dsl::to_string(v)) + " outside native range");
    }
  }

  std::lock_guard lock(mu_);
  const ExecStatus s = projected_status_locked();
  if (s == ExecStatus::running || s == ExecStatus::paused) {
    throw AlreadyRunning("a program is already executing");
  }
  // Settle requests still queued for the previous run before replacing it.
  apply_controls_locked();
  ++run_;
  plan_ = std::move(plan);
  next_step_ = 0;
  activity_.reset();
  state_.exec_status = ExecStatus::running;
  return ExecutionHandle{run_};
}

ControlAck Executor::interrupt(ExecutionHandle handle, InterruptKind kind) {
  std::lock_guard lock(mu_);
  const ExecStatus s = projected_status_locked();
  const bool live = handle.run == run_;
  if (kind == InterruptKind::pause) {
    if (!live || s != ExecStatus::running) throw NotRunning("pause requires a running program");
    controls_.push_back({ControlKind::pause, handle.run});
  } else {
    if (!live || (s != ExecStatus::running && s != ExecStatus::paused)) {
      throw NotRunning("stop requires a running or paused program");
    }
    controls_.push_back({ControlKind::stop, handle.run});
  }
  return {handle.run, now_ms_};
}

ControlAck Executor::resume(ExecutionHandle handle) {
  std::lock_guard lock(mu_);
  if (handle.run != run_ || projected_status_locked() != ExecStatus::paused) {
    throw NotPaused("resume requires a paused program");
  }
  controls_.push_back({ControlKind::resume, handle.run});
  return {handle.run, now_ms_};
}

void Executor::inject_fault(Fault) {
  std::lock_guard lock(mu_);
  controls_.push_back({ControlKind::fault, run_});
}

void Executor::reattach_spoon() {
  std::lock_guard lock(mu_);
  state_.spoon_attached = true;
}

void Executor::emit_locked(std::int64_t t, EventKind kind, std::string detail) {
  events_.push_back(ExecutionEvent{next_seq_++, t, run_, kind, std::move(detail)});
}

void Executor::apply_controls_locked() {
  const std::int64_t t = now_ms_;
  while (!controls_.empty()) {
    const Control c = controls_.front();
    controls_.pop_front();
    ExecStatus& s = state_.exec_status;
    if (c.kind == ControlKind::fault) {
      state_.spoon_attached = false;
      emit_locked(t, EventKind::warning, "spoon detached");
      if (s == ExecStatus::running || s == ExecStatus::paused) {
        s = ExecStatus::stopped;
        activity_.reset();
        emit_locked(t, EventKind::stopped, "fault");
      }
      continue;
    }
    if (c.run != run_) continue;
    switch (c.kind) {
      case ControlKind::stop:
        if (s == ExecStatus::running || s == ExecStatus::paused) {
          s = ExecStatus::stopped;
          activity_.reset();
          emit_locked(t, EventKind::stopped, "interrupt");
        }
        break;
      case ControlKind::pause:
        if (s == ExecStatus::running) {
          s = ExecStatus::paused;
          emit_locked(t, EventKind::paused, "interrupt");
        }
        break;
      case ControlKind::resume:
        if (s == ExecStatus::paused) {
          s = ExecStatus::running;
          emit_locked(t, EventKind::resumed, "");
        }
        break;
      case ControlKind::fault:
        break;
    }
  }
}

void Executor::begin_step_locked(std::int64_t t) {
  const std::size_t index = next_step_++;
  const Step& step = plan_[index];
  switch (step.kind) {
    case Step::Kind::announce:
      emit_locked(t, EventKind::announce, step.text);
      break;
    case Step::Kind::warning:
      emit_locked(t, EventKind::warning, step.text);
      break;
    case Step::Kind::segment: {
      double length = config_.trajectories.length(step.segment);
      if (step.segment == SegmentKind::scoop_dip) {
        length += 2.0 * state_.variables_native.scoop_depth * config_.trajectories.path_units_per_mm;
      }
      const auto ms = segment_duration_ms(length, state_.variables_native.speed,
                                          state_.variables_native.acceleration);
      activity_ = Activity{index, ms, false};
      switch (step.segment) {
        case SegmentKind::scoop_dip:
          state_.arm_phase = {ArmPhaseKind::scooping, step.target.bowl, std::nullopt};
          break;
        case SegmentKind::scrape_pass:
          state_.arm_phase = {ArmPhaseKind::scraping, step.target.bowl, std::nullopt};
          break;
        default:
          state_.arm_phase = {ArmPhaseKind::moving, std::nullopt, step.segment};
          break;
      }
      emit_locked(t, EventKind::segment_start,
                  describe(step.segment, step.target) + " " + std::to_string(ms) + " ms");
      break;
    }
    case Step::Kind::sleep:
      activity_ = Activity{index, step.sleep_ms, true};
      emit_locked(t, EventKind::sleep_start, std::to_string(step.sleep_ms) + " ms");
      break;
    case Step::Kind::set_var:
      state_.variables_native[step.var] = step.native;
      break;
    case Step::Kind::pause:
      state_.exec_status = ExecStatus::paused;
      emit_locked(t, EventKind::paused, "program");
      break;
    case Step::Kind::stop:
      state_.exec_status = ExecStatus::stopped;
      emit_locked(t, EventKind::stopped, "program");
      break;
  }
}

void Executor::finish_activity_locked(std::int64_t t) {
  const Step& step = plan_[activity_->step];
  if (activity_->is_sleep) {
    emit_locked(t, EventKind::sleep_end, "");
  } else {
    if (step.target.bowl) {
      state_.arm_phase = {ArmPhaseKind::at_bowl, step.target.bowl, std::nullopt};
    } else {
      state_.arm_phase = {ArmPhaseKind::at_mouth, std::nullopt, std::nullopt};
    }
    emit_locked(t, EventKind::segment_end, describe(step.segment, step.target));
  }
  activity_.reset();
}

void Executor::advance_locked(std::int64_t budget) {
  std::int64_t t = now_ms_;
  while (state_.exec_status == ExecStatus::running) {
    if (!activity_) {
      if (next_step_ >= plan_.size()) {
        emit_locked(t, EventKind::announce, std::string(kReadyForAnother));
        emit_locked(t, EventKind::program_done, "");
        state_.exec_status = ExecStatus::idle;
        break;
      }
      begin_step_locked(t);
      continue;
    }
    if (activity_->remaining_ms == 0) {
      finish_activity_locked(t);
      continue;
    }
    if (budget == 0) break;
    const std::int64_t used = std::min(budget, activity_->remaining_ms);
    activity_->remaining_ms -= used;
    budget -= used;
    t += used;
  }
}

void Executor::tick() {
  std::lock_guard lock(mu_);
  apply_controls_locked();
  if (state_.exec_status == ExecStatus::running) advance_locked(config_.tick_ms);
  now_ms_ += config_.tick_ms;
}

void Executor::run_until_settled(std::size_t max_ticks) {
  for (std::size_t i = 0; i < max_ticks; ++i) {
    tick();
    std::lock_guard lock(mu_);
    if (state_.exec_status != ExecStatus::running && controls_.empty()) return;
  }
}

std::vector<ExecutionEvent> Executor::drain_events() {
  std::lock_guard lock(mu_);
  std::vector<ExecutionEvent> out(events_.begin(), events_.end());
  events_.clear();
  return out;
}

std::int64_t Executor::now_ms() const {
  std::lock_guard lock(mu_);
  return now_ms_;
}

RobotState Executor::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

std::optional<ExecutionHandle> Executor::current() const {
  std::lock_guard lock(mu_);
  if (run_ == 0) return std::nullopt;
  return ExecutionHandle{run_};
}

TickDriver::TickDriver(Executor& executor, bool paced) : executor_(executor), paced_(paced) {
  thread_ = std::thread([this] {
    using clock = std::chrono::steady_clock;
    auto next = clock::now();
    const auto tick = std::chrono::milliseconds(executor_.tick_ms());
    while (running_.load()) {
      executor_.tick();
      if (paced_) {
        next += tick;
        std::this_thread::sleep_until(next);
      } else if (executor_.state().exec_status != ExecStatus::running) {
        std::this_thread::sleep_for(std::chrono::milliseconds(2));
      } else {
        std::this_thread::yield();
      }
    }
  });
}

TickDriver::~TickDriver() { stop(); }

void TickDriver::stop() {
  running_.store(false);
  if (thread_.joinable()) thread_.join();
}

}  // namespace voicepilot::sim
