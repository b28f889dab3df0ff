#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace voicepilot::dsl {

// Robot variables the model may adjust. All three are expressed on the
// grounded scale inside programs and rescaled to native units at execution.
enum class Variable { speed, acceleration, scoop_depth };

inline constexpr Variable kAllVariables[] = {Variable::speed, Variable::acceleration,
                                             Variable::scoop_depth};

std::string_view to_string(Variable v);
std::optional<Variable> variable_from_string(std::string_view name);

struct Scoop {
  int bowl = 0;
  bool operator==(const Scoop&) const = default;
};
struct ScrapeThenScoop {
  int bowl = 0;
  bool operator==(const ScrapeThenScoop&) const = default;
};
struct MoveToMouth {
  bool operator==(const MoveToMouth&) const = default;
};
struct Start {
  bool operator==(const Start&) const = default;
};
struct Stop {
  bool operator==(const Stop&) const = default;
};
struct PauseIndefinitely {
  bool operator==(const PauseIndefinitely&) const = default;
};
struct SetVar {
  Variable var = Variable::speed;
  double value = 0.0;
  bool operator==(const SetVar&) const = default;
};
struct Sleep {
  double seconds = 0.0;
  bool operator==(const Sleep&) const = default;
};

using Stmt = std::variant<Scoop, ScrapeThenScoop, MoveToMouth, Start, Stop,
                          PauseIndefinitely, SetVar, Sleep>;

// Straight-line sequence of statements; the only executable form.
struct Program {
  std::vector<Stmt> stmts;
  bool operator==(const Program&) const = default;
};

inline bool is_bite(const Stmt& s) {
  return std::holds_alternative<Scoop>(s) || std::holds_alternative<ScrapeThenScoop>(s);
}

// Parses command-language text. Blank lines and `#` comments are skipped;
// any other construct throws ParseError naming the line and token.
Program parse(std::string_view code);

// Canonical numeral: at most three decimals, trailing zeros trimmed.
std::string format_number(double value);

std::string pretty_print(const Stmt& stmt);
// One statement per line, newline separated, no trailing newline.
std::string pretty_print(const Program& program);

}  // namespace voicepilot::dsl
