#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "voicepilot/dsl/validator.hpp"

namespace voicepilot::sim {

inline constexpr std::size_t kBowlCount = 4;
inline constexpr std::string_view kEmptyBowl = "empty";

inline constexpr std::string_view kScoopingNow = "Scooping now";
inline constexpr std::string_view kScrapingNow = "Scraping now";
inline constexpr std::string_view kReadyForAnother = "Ready for another command";

enum class SegmentKind { travel, scoop_dip, scrape_pass, present_at_mouth, retreat };
std::string_view to_string(SegmentKind k);

// Target of a segment: a bowl index, or the user's mouth when empty.
struct SegmentTarget {
  std::optional<int> bowl;
  bool operator==(const SegmentTarget&) const = default;
};

struct TrajectorySegment {
  SegmentKind kind = SegmentKind::travel;
  double nominal_length = 0.0;  // normalized path units, > 0
  SegmentTarget target;
};

// Nominal path lengths of the predefined trajectories.
struct TrajectoryConfig {
  double travel = 0.5;
  double scoop_dip = 0.2;  // base length, extended by the scoop depth
  double scrape_pass = 0.4;
  double present_at_mouth = 0.3;
  double retreat = 0.2;
  double path_units_per_mm = 0.01;  // dip goes down and up: adds 2 * depth * this

  double length(SegmentKind k) const;
  void check() const;
};

// Duration of one segment under a trapezoidal velocity profile with peak
// speed `speed` and ramp rate `acceleration`; falls back to a triangular
// profile when the segment is too short to reach peak speed.
double segment_duration_s(double length, double speed, double acceleration);
std::int64_t segment_duration_ms(double length, double speed, double acceleration);

enum class ArmPhaseKind { home, at_bowl, scooping, scraping, at_mouth, moving };

struct ArmPhase {
  ArmPhaseKind kind = ArmPhaseKind::home;
  std::optional<int> bowl;              // at_bowl / scooping / scraping
  std::optional<SegmentKind> segment;   // moving
  bool operator==(const ArmPhase&) const = default;
};
std::string to_string(const ArmPhase& p);

enum class ExecStatus { idle, running, paused, stopped };
std::string_view to_string(ExecStatus s);

struct NativeVariables {
  double speed = 0.0;
  double acceleration = 0.0;
  double scoop_depth = 0.0;

  double& operator[](dsl::Variable v);
  double operator[](dsl::Variable v) const;
};

struct RobotState {
  ArmPhase arm_phase;
  NativeVariables variables_native;
  std::array<std::string, kBowlCount> bowl_contents;
  bool spoon_attached = true;
  ExecStatus exec_status = ExecStatus::idle;
};

struct RobotConfig {
  std::vector<std::string> bowls;  // must hold exactly four entries
  dsl::VariableSpec variables;
  // Grounded start values; the spec's default_grounded is used when absent.
  std::optional<double> speed;
  std::optional<double> acceleration;
  std::optional<double> scoop_depth;
  TrajectoryConfig trajectories;
  std::int64_t tick_ms = 50;
};

// Builds the initial state: arm at home, idle, spoon attached, variables at
// their grounded defaults scaled to native units. Throws ConfigError.
RobotState load_environment(const RobotConfig& config);

enum class EventKind {
  announce,
  segment_start,
  segment_end,
  sleep_start,
  sleep_end,
  paused,
  resumed,
  stopped,
  program_done,
  warning,
};
std::string_view to_string(EventKind k);

struct ExecutionEvent {
  std::uint64_t seq = 0;   // strictly increasing per executor
  std::int64_t t_ms = 0;   // simulated clock, non-decreasing
  std::uint64_t run = 0;   // program run that produced the event
  EventKind kind = EventKind::announce;
  std::string detail;
};

inline bool is_motion_start(EventKind k) {
  return k == EventKind::segment_start || k == EventKind::sleep_start ||
         k == EventKind::announce;
}

}  // namespace voicepilot::sim
