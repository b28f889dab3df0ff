#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "voicepilot/dsl/program.hpp"

namespace vp_test {

inline std::filesystem::path source_dir() { return VP_SOURCE_DIR; }
inline std::filesystem::path shipped_config() { return source_dir() / "config" / "voicepilot.json"; }

// Random straight-line program. Values stay inside the grounded range and
// bowls inside 0..3 unless `wild` is set.
inline voicepilot::dsl::Program random_program(std::mt19937_64& rng, std::size_t max_len, bool wild = false) {
  using namespace voicepilot::dsl;
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> kind(0, 7);
  std::uniform_int_distribution<int> bowl(wild ? -2 : 0, wild ? 6 : 3);
  std::uniform_real_distribution<double> value(wild ? -3.0 : 0.0, wild ? 9.0 : 5.0);
  std::uniform_real_distribution<double> secs(0.0, wild ? 90.0 : 10.0);
  const auto round3 = [](double v) { return std::round(v * 1000.0) / 1000.0; };

  Program p;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    switch (kind(rng)) {
      case 0:
        p.stmts.push_back(Scoop{bowl(rng)});
        break;
      case 1:
        p.stmts.push_back(ScrapeThenScoop{bowl(rng)});
        break;
      case 2:
        p.stmts.push_back(MoveToMouth{});
        break;
      case 3:
        p.stmts.push_back(Start{});
        break;
      case 4:
        p.stmts.push_back(MoveToMouth{});
        break;
      case 5: {
        const auto v = static_cast<Variable>(std::uniform_int_distribution<int>(0, 2)(rng));
        p.stmts.push_back(SetVar{v, round3(value(rng))});
        break;
      }
      case 6:
        p.stmts.push_back(Sleep{round3(secs(rng))});
        break;
      default:
        p.stmts.push_back(Scoop{bowl(rng)});
        break;
    }
  }
  return p;
}

}  // namespace vp_test
