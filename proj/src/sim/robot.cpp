#include "voicepilot/sim/robot.hpp"

#include <algorithm>
#include <cmath>

#include "voicepilot/error.hpp"

namespace voicepilot::sim {

std::string_view to_string(SegmentKind k) {
  switch (k) {
    case SegmentKind::travel:
      return "travel";
    case SegmentKind::scoop_dip:
      return "scoop_dip";
    case SegmentKind::scrape_pass:
      return "scrape_pass";
    case SegmentKind::present_at_mouth:
      return "present_at_mouth";
    case SegmentKind::retreat:
      return "retreat";
  }
  return "unknown";
}

std::string_view to_string(ExecStatus s) {
  switch (s) {
    case ExecStatus::idle:
      return "idle";
    case ExecStatus::running:
      return "running";
    case ExecStatus::paused:
      return "paused";
    case ExecStatus::stopped:
      return "stopped";
  }
  return "unknown";
}

std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::announce:
      return "announce";
    case EventKind::segment_start:
      return "segment_start";
    case EventKind::segment_end:
      return "segment_end";
    case EventKind::sleep_start:
      return "sleep_start";
    case EventKind::sleep_end:
      return "sleep_end";
    case EventKind::paused:
      return "paused";
    case EventKind::resumed:
      return "resumed";
    case EventKind::stopped:
      return "stopped";
    case EventKind::program_done:
      return "program_done";
    case EventKind::warning:
      return "warning";
  }
  return "unknown";
}

std::string to_string(const ArmPhase& p) {
  switch (p.kind) {
    case ArmPhaseKind::home:
      return "home";
    case ArmPhaseKind::at_bowl:
      return "at_bowl(" + std::to_string(p.bowl.value_or(-1)) + ")";
    case ArmPhaseKind::scooping:
      return "scooping(" + std::to_string(p.bowl.value_or(-1)) + ")";
    case ArmPhaseKind::scraping:
      return "scraping(" + std::to_string(p.bowl.value_or(-1)) + ")";
    case ArmPhaseKind::at_mouth:
      return "at_mouth";
    case ArmPhaseKind::moving:
      return "moving(" + std::string(to_string(p.segment.value_or(SegmentKind::travel))) + ")";
  }
  return "unknown";
}

double TrajectoryConfig::length(SegmentKind k) const {
  switch (k) {
    case SegmentKind::travel:
      return travel;
    case SegmentKind::scoop_dip:
      return scoop_dip;
    case SegmentKind::scrape_pass:
      return scrape_pass;
    case SegmentKind::present_at_mouth:
      return present_at_mouth;
    case SegmentKind::retreat:
      return retreat;
  }
  return travel;
}

void TrajectoryConfig::check() const {
  for (auto k : {SegmentKind::travel, SegmentKind::scoop_dip, SegmentKind::scrape_pass,
                 SegmentKind::present_at_mouth, SegmentKind::retreat}) {
    if (!(length(k) > 0.0)) {
      throw ConfigError("trajectory '" + std::string(to_string(k)) + "' must have positive length");
    }
  }
  if (!(path_units_per_mm >= 0.0)) throw ConfigError("path_units_per_mm must be non-negative");
}

double segment_duration_s(double length, double speed, double acceleration) {
  const double ramp_distance = speed * speed / acceleration;  // both ramps together
  if (length >= ramp_distance) return length / speed + speed / acceleration;
  return 2.0 * std::sqrt(length / acceleration);
}

std::int64_t segment_duration_ms(double length, double speed, double acceleration) {
  const auto ms = static_cast<std::int64_t>(std::llround(segment_duration_s(length, speed, acceleration) * 1000.0));
  return std::max<std::int64_t>(ms, 1);
}

double& NativeVariables::operator[](dsl::Variable v) {
  switch (v) {
    case dsl::Variable::speed:
      return speed;
    case dsl::Variable::acceleration:
      return acceleration;
    case dsl::Variable::scoop_depth:
      return scoop_depth;
  }
  return speed;
}

double NativeVariables::operator[](dsl::Variable v) const {
  return const_cast<NativeVariables&>(*this)[v];
}

RobotState load_environment(const RobotConfig& config) {
  if (config.bowls.size() != kBowlCount) {
    throw ConfigError("expected exactly 4 bowls, got " + std::to_string(config.bowls.size()));
  }
  config.variables.check();
  config.trajectories.check();
  if (config.tick_ms <= 0) throw ConfigError("tick_ms must be positive");

  RobotState state;
  std::copy(config.bowls.begin(), config.bowls.end(), state.bowl_contents.begin());
  const auto start = [&](dsl::Variable v, const std::optional<double>& override_value) {
    const auto& range = config.variables[v];
    const double g = override_value.value_or(range.default_grounded);
    if (g < range.grounded_lo || g > range.grounded_hi) {
      throw ConfigError(std::string(dsl::to_string(v)) + ": start value outside grounded range");
    }
    state.variables_native[v] = dsl::scale_variable(v, g, config.variables);
  };
  start(dsl::Variable::speed, config.speed);
  start(dsl::Variable::acceleration, config.acceleration);
  start(dsl::Variable::scoop_depth, config.scoop_depth);
  return state;
}

}  // namespace voicepilot::sim
