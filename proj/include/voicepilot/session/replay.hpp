#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "voicepilot/session/config.hpp"
#include "voicepilot/session/session.hpp"

namespace voicepilot::session {

std::unique_ptr<speech::Transcriber> make_transcriber(const AppConfig& config, bool force_mock);
std::unique_ptr<llm::CompletionBackend> make_completion_backend(const AppConfig& config, bool force_mock);

// One line of a replay script:
//
//   <t_ms> command <text>          typed command (wake + utterance)
//   <t_ms> say <text>              text through the speech listener
//   <t_ms> ptt                     push-to-talk press
//   <t_ms> audio <file> <dur_ms>   audio payload through the listener
//   <t_ms> interrupt stop|pause|resume
//   <t_ms> config_set <key> <value>
//   <t_ms> fault spoon_detached
//
// Blank lines and lines starting with '#' are ignored. Times must not
// decrease.
struct ScriptLine {
  std::size_t line = 0;
  std::int64_t t_ms = 0;
  std::string verb;
  std::string argument;
};

// Throws ConfigError naming the offending line.
std::vector<ScriptLine> parse_script(std::string_view text);

struct ReplayOutcome {
  std::uint64_t completion_calls = 0;
  std::int64_t end_ms = 0;
  Phase final_phase = Phase::awaiting_wake;
  std::vector<SessionEvent> events;
};

// Plays a script against a fresh executor and session on the virtual clock.
// Every outbound wire message goes to `sink` in order; error replies to
// refused inputs are included as error messages.
ReplayOutcome run_replay(const AppConfig& config, std::string_view script,
                         const std::filesystem::path& base_dir, speech::Transcriber& transcriber,
                         llm::CompletionBackend& completion, const Session::Observer& sink);

}  // namespace voicepilot::session
