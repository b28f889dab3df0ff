#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "voicepilot/dsl/validator.hpp"
#include "voicepilot/llm/gateway.hpp"
#include "voicepilot/sim/robot.hpp"
#include "voicepilot/speech/frontend.hpp"

namespace voicepilot::session {

inline constexpr int kConfigSchemaVersion = 1;

struct SpeechConfig {
  std::string wake_backend = "keyword";  // keyword | push_to_talk | always_on
  std::string wake_phrase = "hey obi";
  speech::EndpointConfig endpoint;
  std::string backend = "mock";  // mock | remote
  std::filesystem::path mock_corpus;
};

struct LlmConfig {
  std::string backend = "mock";  // mock | remote
  std::filesystem::path mock_rules;
  std::filesystem::path prompt_template;
  std::size_t history_cap = llm::ExchangeHistory::kDefaultCap;
};

struct AppConfig {
  std::filesystem::path path;  // file the config was read from
  llm::EnvironmentDescription environment;
  sim::RobotConfig robot;
  dsl::PauseConfig pause;
  SpeechConfig speech;
  LlmConfig llm;
  std::vector<std::string> cheat_sheet;
};

// Reads and checks a JSON config file. Relative paths inside it resolve
// against the file's directory. Throws ConfigError.
AppConfig load_config(const std::filesystem::path& path);

}  // namespace voicepilot::session
