#include "voicepilot/dsl/validator.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include "voicepilot/error.hpp"

namespace voicepilot::dsl {

namespace {

constexpr int kBowlCount = 4;

void check_range(std::string_view name, const VariableRange& r) {
  const std::string n(name);
  if (!(r.grounded_lo < r.grounded_hi)) throw ConfigError(n + ": grounded_lo must be < grounded_hi");
  if (!(r.native_lo < r.native_hi)) throw ConfigError(n + ": native_lo must be < native_hi");
  if (!(r.default_grounded >= r.grounded_lo && r.default_grounded <= r.grounded_hi)) {
    throw ConfigError(n + ": default_grounded outside grounded range");
  }
}

}  // namespace

const VariableRange& VariableSpec::operator[](Variable v) const {
  switch (v) {
    case Variable::speed:
      return speed;
    case Variable::acceleration:
      return acceleration;
    case Variable::scoop_depth:
      return scoop_depth;
  }
  return speed;
}

VariableRange& VariableSpec::operator[](Variable v) {
  return const_cast<VariableRange&>(std::as_const(*this)[v]);
}

void VariableSpec::check() const {
  for (Variable v : kAllVariables) check_range(to_string(v), (*this)[v]);
  // Segment timing divides by native speed and acceleration.
  if (speed.native_lo <= 0.0) throw ConfigError("speed: native_lo must be positive");
  if (acceleration.native_lo <= 0.0) throw ConfigError("acceleration: native_lo must be positive");
}

void PauseConfig::check() const {
  if (!(max_sleep_s >= 0.0)) throw ConfigError("max_sleep_s must be non-negative");
  if (!(inter_bite_delay_s >= 0.0 && inter_bite_delay_s <= max_sleep_s)) {
    throw ConfigError("inter_bite_delay_s must lie in [0, max_sleep_s]");
  }
}

double scale_variable(Variable var, double grounded, const VariableSpec& spec) {
  const VariableRange& r = spec[var];
  return r.native_lo +
         (grounded - r.grounded_lo) / (r.grounded_hi - r.grounded_lo) * (r.native_hi - r.native_lo);
}

double unscale_variable(Variable var, double native, const VariableSpec& spec) {
  const VariableRange& r = spec[var];
  return r.grounded_lo +
         (native - r.native_lo) / (r.native_hi - r.native_lo) * (r.grounded_hi - r.grounded_lo);
}

PauseEnforcement enforce_inter_bite_pause(const Program& program, double min_delay_s) {
  PauseEnforcement out;
  const auto& in = program.stmts;
  out.program.stmts.reserve(in.size());

  // Index (in the output) of the last MoveToMouth not yet followed by a
  // bite, plus the sleep accumulated since it.
  std::optional<std::size_t> mouth_at;
  double slept = 0.0;

  for (const Stmt& stmt : in) {
    if (is_bite(stmt) && mouth_at) {
      if (slept < min_delay_s - kPauseTolerance) {
        const std::size_t position = *mouth_at + 1;
        Sleep pad{min_delay_s - slept};
        out.program.stmts.insert(out.program.stmts.begin() + static_cast<std::ptrdiff_t>(position),
                                 pad);
        out.insertions.push_back({position, pad});
      }
      mouth_at.reset();
    }
    out.program.stmts.push_back(stmt);
    if (std::holds_alternative<MoveToMouth>(stmt)) {
      mouth_at = out.program.stmts.size() - 1;
      slept = 0.0;
    } else if (const auto* s = std::get_if<Sleep>(&stmt)) {
      slept += s->seconds;
    }
  }
  return out;
}

Validation validate(const Program& program, const VariableSpec& spec, const PauseConfig& pause) {
  Validation result;
  Program clipped;
  clipped.stmts.reserve(program.stmts.size());

  for (std::size_t i = 0; i < program.stmts.size(); ++i) {
    Stmt stmt = program.stmts[i];
    if (const auto* s = std::get_if<Scoop>(&stmt); s && (s->bowl < 0 || s->bowl >= kBowlCount)) {
      throw ValidationError(i, "bowl index " + std::to_string(s->bowl) + " outside 0..3");
    }
    if (const auto* s = std::get_if<ScrapeThenScoop>(&stmt);
        s && (s->bowl < 0 || s->bowl >= kBowlCount)) {
      throw ValidationError(i, "bowl index " + std::to_string(s->bowl) + " outside 0..3");
    }
    if (auto* s = std::get_if<SetVar>(&stmt)) {
      const VariableRange& r = spec[s->var];
      const double v = std::clamp(s->value, r.grounded_lo, r.grounded_hi);
      if (v != s->value) {
        result.report.clips.push_back({i, std::string(to_string(s->var)), s->value, v});
        s->value = v;
      }
    }
    if (auto* s = std::get_if<Sleep>(&stmt)) {
      const double v = std::clamp(s->seconds, 0.0, pause.max_sleep_s);
      if (v != s->seconds) {
        result.report.clips.push_back({i, "sleep", s->seconds, v});
        s->seconds = v;
      }
    }
    clipped.stmts.push_back(stmt);
  }

  auto paused = enforce_inter_bite_pause(clipped, pause.inter_bite_delay_s);
  result.validated.program = std::move(paused.program);
  result.report.insertions = std::move(paused.insertions);
  return result;
}

CheckResult check_code(std::string_view code, const VariableSpec& spec, const PauseConfig& pause) {
  CheckResult result;
  Program program;
  try {
    program = parse(code);
  } catch (const ParseError& e) {
    result.report.rejections.push_back({e.line(), std::nullopt, e.token(), e.reason()});
    return result;
  }
  try {
    auto v = validate(program, spec, pause);
    result.validated = std::move(v.validated);
    result.report = std::move(v.report);
  } catch (const ValidationError& e) {
    std::string token;
    if (e.stmt_index() < program.stmts.size()) token = pretty_print(program.stmts[e.stmt_index()]);
    result.report.rejections.push_back({0, e.stmt_index(), token, e.reason()});
  }
  return result;
}

}  // namespace voicepilot::dsl
