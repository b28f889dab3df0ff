#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "voicepilot/dsl/validator.hpp"
#include "voicepilot/llm/gateway.hpp"
#include "voicepilot/session/config.hpp"
#include "voicepilot/sim/executor.hpp"
#include "voicepilot/speech/frontend.hpp"

namespace voicepilot::session {

enum class Phase { awaiting_wake, capturing, processing, validating, executing, paused, error };
std::string_view to_string(Phase p);

enum class CueKind { beep, got_it, scooping, scraping, ready, busy, noop, error };
std::string_view to_string(CueKind k);
// Fixed spoken text of each cue.
std::string_view cue_text(CueKind k);

// Renders cues to the user. The default does nothing.
class CueSink {
 public:
  virtual ~CueSink() = default;
  virtual void play(CueKind kind, std::string_view text) = 0;
};

class NullCueSink : public CueSink {
 public:
  void play(CueKind, std::string_view) override {}
};

// One entry of the merged session stream: session cues and errors, speech
// listener milestones, and every executor event in order.
struct SessionEvent {
  std::uint64_t seq = 0;
  std::int64_t t_ms = 0;
  std::string source;  // session | speech | robot
  std::string kind;
  std::string detail;
  std::optional<std::uint64_t> run;
};

// Single-intent keyword classification used while a program is active.
enum class ControlIntent { none, stop, pause, resume };
ControlIntent classify_control_utterance(std::string_view transcript);

struct WakeInput {
  speech::WakeEvent wake;
};
struct UtteranceInput {
  speech::Utterance utterance;
};
// Typed command: equivalent to a wake followed by a text utterance.
struct TextCommandInput {
  std::string text;
};
struct InterruptInput {
  std::string kind;  // stop | pause | resume
};
struct ConfigSetInput {
  std::string key;
  double value = 0.0;
};
struct ListenerErrorInput {
  std::string code;
};
using SessionInput = std::variant<WakeInput, UtteranceInput, TextCommandInput, InterruptInput,
                                  ConfigSetInput, ListenerErrorInput>;

struct SessionView {
  Phase phase = Phase::awaiting_wake;
  std::shared_ptr<const llm::ExchangeHistory> history;
  dsl::SafetyReport last_report;
  dsl::PauseConfig pause;
  sim::RobotState robot;
  dsl::VariableSpec variables;
  std::vector<std::string> cheat_sheet;
  std::int64_t t_ms = 0;
};

struct Backends {
  speech::Transcriber& transcriber;
  llm::CompletionBackend& completion;
  CueSink& cues;
};

// Session state machine. Not thread-safe: one owner drives handle() and
// pump(); other threads may call latest_snapshot().
class Session {
 public:
  using Observer = std::function<void(const nlohmann::json& message)>;

  Session(const AppConfig& config, sim::Executor& executor, Backends backends);

  void add_observer(Observer observer);

  // Emits the initial snapshot.
  void start();
  // Applies one input. Returns an error reason for the sender when the input
  // is refused outright (for example an interrupt with nothing running).
  std::optional<std::string> handle(const SessionInput& input);
  // Forwards executor events and advances the phase accordingly.
  void pump();

  Phase phase() const { return phase_; }
  SessionView view() const;
  std::shared_ptr<const llm::ExchangeHistory> history() const { return history_; }
  const std::string& last_prompt() const { return last_prompt_; }
  const std::vector<SessionEvent>& events() const { return events_; }
  nlohmann::json latest_snapshot() const;

 private:
  void on_wake(const speech::WakeEvent& wake);
  void on_utterance(const speech::Utterance& utterance);
  void run_command(const std::string& command);
  void fast_path(const std::string& transcript);
  std::optional<std::string> apply_interrupt(const std::string& kind);
  void fail(const std::string& code, const std::string& message);

  void set_phase(Phase p);
  void cue(CueKind kind);
  void emit_event(std::string source, std::string kind, std::string detail,
                  std::optional<std::uint64_t> run = std::nullopt, std::optional<std::int64_t> t = {});
  void emit_snapshot();
  void publish(const nlohmann::json& message);

  AppConfig config_;
  sim::Executor& executor_;
  Backends backends_;
  llm::PromptTemplate template_;
  Phase phase_ = Phase::awaiting_wake;
  bool awaiting_utterance_ = false;
  std::shared_ptr<const llm::ExchangeHistory> history_;
  dsl::SafetyReport last_report_;
  dsl::PauseConfig pause_;
  std::optional<sim::ExecutionHandle> handle_;
  std::string last_prompt_;
  std::uint64_t next_seq_ = 1;
  std::int64_t last_t_ = 0;
  std::vector<SessionEvent> events_;
  std::vector<Observer> observers_;
  mutable std::mutex snapshot_mu_;
  nlohmann::json snapshot_;
};

}  // namespace voicepilot::session
