#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "voicepilot/dsl/program.hpp"

namespace voicepilot::dsl {

// Grounded (model-facing) and native (robot-facing) range of one variable.
struct VariableRange {
  double grounded_lo = 0.0;
  double grounded_hi = 5.0;
  double native_lo = 0.0;
  double native_hi = 1.0;
  double default_grounded = 2.5;
};

struct VariableSpec {
  VariableRange speed{0.0, 5.0, 0.2, 1.0, 2.5};
  VariableRange acceleration{0.0, 5.0, 0.2, 1.0, 2.5};
  VariableRange scoop_depth{0.0, 5.0, 10.0, 50.0, 2.5};  // native in mm

  const VariableRange& operator[](Variable v) const;
  VariableRange& operator[](Variable v);

  // Throws ConfigError when an ordering or default invariant is broken.
  void check() const;
};

struct PauseConfig {
  double inter_bite_delay_s = 4.0;
  double max_sleep_s = 60.0;

  void check() const;
};

// Tolerance used when comparing accumulated sleep against the required delay.
inline constexpr double kPauseTolerance = 1e-9;

struct ClipRecord {
  std::size_t stmt_index = 0;
  std::string target;  // variable name, or "sleep"
  double raw_value = 0.0;
  double clipped_value = 0.0;
  bool operator==(const ClipRecord&) const = default;
};

struct InsertionRecord {
  std::size_t position = 0;  // index of the inserted Sleep in the output program
  Sleep inserted;
  bool operator==(const InsertionRecord&) const = default;
};

struct RejectionRecord {
  std::size_t line = 0;  // 1-based source line; 0 when the rejection is per statement
  std::optional<std::size_t> stmt_index;
  std::string token;
  std::string reason;
  bool operator==(const RejectionRecord&) const = default;
};

struct SafetyReport {
  std::vector<ClipRecord> clips;
  std::vector<InsertionRecord> insertions;
  std::vector<RejectionRecord> rejections;

  bool accepted() const { return rejections.empty(); }
  bool empty() const { return clips.empty() && insertions.empty() && rejections.empty(); }
  bool operator==(const SafetyReport&) const = default;
};

struct ValidatedProgram {
  Program program;
};

struct Validation {
  ValidatedProgram validated;
  SafetyReport report;
};

// Clips variables and sleeps, bounds bowl indices, then enforces the
// inter-bite pause. Throws ValidationError for an out-of-range bowl.
Validation validate(const Program& program, const VariableSpec& spec, const PauseConfig& pause);

// Affine map from the grounded range onto the native range.
double scale_variable(Variable var, double grounded, const VariableSpec& spec);
// Inverse of scale_variable, used for display.
double unscale_variable(Variable var, double native, const VariableSpec& spec);

struct PauseEnforcement {
  Program program;
  std::vector<InsertionRecord> insertions;
};

PauseEnforcement enforce_inter_bite_pause(const Program& program, double min_delay_s);

// Parse + validate in one step, folding every failure into the report's
// rejections instead of throwing.
struct CheckResult {
  std::optional<ValidatedProgram> validated;
  SafetyReport report;
};

CheckResult check_code(std::string_view code, const VariableSpec& spec, const PauseConfig& pause);

}  // namespace voicepilot::dsl
