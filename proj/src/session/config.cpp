#include "voicepilot/session/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "voicepilot/error.hpp"

namespace voicepilot::session {

namespace {

using nlohmann::json;

void read_range(const json& j, dsl::VariableRange& r) {
  r.grounded_lo = j.value("grounded_lo", r.grounded_lo);
  r.grounded_hi = j.value("grounded_hi", r.grounded_hi);
  r.native_lo = j.value("native_lo", r.native_lo);
  r.native_hi = j.value("native_hi", r.native_hi);
  r.default_grounded = j.value("default_grounded", r.default_grounded);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());

  AppConfig cfg;
  cfg.path = path;
  const auto base = path.parent_path();
  try {
    const json j = json::parse(in);
    const int version = j.at("schema_version").get<int>();
    if (version != kConfigSchemaVersion) {
      throw ConfigError("unsupported config schema_version " + std::to_string(version));
    }

    const json& env = j.at("environment");
    cfg.robot.bowls = env.at("bowls").get<std::vector<std::string>>();
    if (cfg.robot.bowls.size() != sim::kBowlCount) {
      throw ConfigError("environment.bowls must list exactly 4 bowls");
    }
    std::copy(cfg.robot.bowls.begin(), cfg.robot.bowls.end(), cfg.environment.bowl_contents.begin());
    cfg.environment.task_summary = env.value("task_summary", "");
    cfg.environment.robot_physical_summary = env.value("robot_physical_summary", "");

    if (j.contains("variables")) {
      const json& vars = j.at("variables");
      for (dsl::Variable v : dsl::kAllVariables) {
        const std::string name(dsl::to_string(v));
        if (vars.contains(name)) read_range(vars.at(name), cfg.robot.variables[v]);
      }
    }
    cfg.robot.variables.check();

    if (j.contains("pause")) {
      cfg.pause.inter_bite_delay_s = j["pause"].value("inter_bite_delay_s", cfg.pause.inter_bite_delay_s);
      cfg.pause.max_sleep_s = j["pause"].value("max_sleep_s", cfg.pause.max_sleep_s);
    }
    cfg.pause.check();

    if (j.contains("executor")) {
      const json& ex = j.at("executor");
      cfg.robot.tick_ms = ex.value("tick_ms", cfg.robot.tick_ms);
      if (ex.contains("trajectories")) {
        const json& t = ex.at("trajectories");
        auto& tr = cfg.robot.trajectories;
        tr.travel = t.value("travel", tr.travel);
        tr.scoop_dip = t.value("scoop_dip", tr.scoop_dip);
        tr.scrape_pass = t.value("scrape_pass", tr.scrape_pass);
        tr.present_at_mouth = t.value("present_at_mouth", tr.present_at_mouth);
        tr.retreat = t.value("retreat", tr.retreat);
        tr.path_units_per_mm = t.value("path_units_per_mm", tr.path_units_per_mm);
      }
    }

    if (j.contains("speech")) {
      const json& s = j.at("speech");
      cfg.speech.wake_backend = s.value("wake_backend", cfg.speech.wake_backend);
      cfg.speech.wake_phrase = s.value("wake_phrase", cfg.speech.wake_phrase);
      cfg.speech.endpoint.max_duration_ms = s.value("max_utterance_ms", cfg.speech.endpoint.max_duration_ms);
      cfg.speech.endpoint.silence_cutoff_ms = s.value("silence_cutoff_ms", cfg.speech.endpoint.silence_cutoff_ms);
      const std::string overlong = s.value("overlong", std::string("truncate"));
      if (overlong == "truncate") {
        cfg.speech.endpoint.overlong = speech::OverlongPolicy::truncate;
      } else if (overlong == "timeout") {
        cfg.speech.endpoint.overlong = speech::OverlongPolicy::timeout;
      } else {
        throw ConfigError("speech.overlong must be 'truncate' or 'timeout'");
      }
      cfg.speech.backend = s.value("backend", cfg.speech.backend);
      cfg.speech.mock_corpus = resolve(base, s.value("mock_corpus", std::string()));
    }

    if (j.contains("llm")) {
      const json& l = j.at("llm");
      cfg.llm.backend = l.value("backend", cfg.llm.backend);
      cfg.llm.mock_rules = resolve(base, l.value("mock_rules", std::string()));
      cfg.llm.prompt_template = resolve(base, l.value("prompt_template", std::string()));
      cfg.llm.history_cap = l.value("history_cap", cfg.llm.history_cap);
    }
    if (cfg.llm.prompt_template.empty()) throw ConfigError("llm.prompt_template is required");

    cfg.cheat_sheet = j.value("cheat_sheet", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw ConfigError("bad config " + path.string() + ": " + e.what());
  }

  sim::load_environment(cfg.robot);  // surfaces range and trajectory errors now
  return cfg;
}

}  // namespace voicepilot::session
