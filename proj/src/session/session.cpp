#include "voicepilot/session/session.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "voicepilot/error.hpp"
#include "voicepilot/session/wire.hpp"

namespace voicepilot::session {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::awaiting_wake:
      return "awaiting_wake";
    case Phase::capturing:
      return "capturing";
    case Phase::processing:
      return "processing";
    case Phase::validating:
      return "validating";
    case Phase::executing:
      return "executing";
    case Phase::paused:
      return "paused";
    case Phase::error:
      return "error";
  }
  return "unknown";
}

std::string_view to_string(CueKind k) {
  switch (k) {
    case CueKind::beep:
      return "beep";
    case CueKind::got_it:
      return "got_it";
    case CueKind::scooping:
      return "scooping";
    case CueKind::scraping:
      return "scraping";
    case CueKind::ready:
      return "ready";
    case CueKind::busy:
      return "busy";
    case CueKind::noop:
      return "noop";
    case CueKind::error:
      return "error";
  }
  return "unknown";
}

std::string_view cue_text(CueKind k) {
  switch (k) {
    case CueKind::beep:
      return "beep";
    case CueKind::got_it:
      return "Got it, processing";
    case CueKind::scooping:
      return sim::kScoopingNow;
    case CueKind::scraping:
      return sim::kScrapingNow;
    case CueKind::ready:
      return sim::kReadyForAnother;
    case CueKind::busy:
      return "I'm busy right now";
    case CueKind::noop:
      return "Nothing to do right now";
    case CueKind::error:
      return "Sorry, I couldn't do that";
  }
  return "";
}

ControlIntent classify_control_utterance(std::string_view transcript) {
  static const std::set<std::string> kFiller = {"please", "obi", "hey", "now", "ok", "okay"};
  std::vector<std::string> words;
  std::string word;
  const auto flush = [&] {
    if (!word.empty() && kFiller.count(word) == 0) words.push_back(word);
    word.clear();
  };
  for (char c : transcript) {
    if (std::isalnum(static_cast<unsigned char>(c)) != 0) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else {
      flush();
    }
  }
  flush();
  if (words.size() != 1) return ControlIntent::none;
  const std::string& w = words.front();
  if (w == "stop") return ControlIntent::stop;
  if (w == "pause" || w == "wait") return ControlIntent::pause;
  if (w == "start" || w == "resume" || w == "continue" || w == "go") return ControlIntent::resume;
  return ControlIntent::none;
}

Session::Session(const AppConfig& config, sim::Executor& executor, Backends backends)
    : config_(config),
      executor_(executor),
      backends_(backends),
      template_(llm::PromptTemplate::from_file(config.llm.prompt_template.string())),
      history_(std::make_shared<const llm::ExchangeHistory>(config.llm.history_cap)),
      pause_(config.pause) {}

void Session::add_observer(Observer observer) { observers_.push_back(std::move(observer)); }

void Session::start() { emit_snapshot(); }

void Session::publish(const nlohmann::json& message) {
  for (const auto& o : observers_) o(message);
}

void Session::emit_event(std::string source, std::string kind, std::string detail,
                         std::optional<std::uint64_t> run, std::optional<std::int64_t> t) {
  SessionEvent ev;
  ev.seq = next_seq_++;
  ev.t_ms = t.value_or(std::max(executor_.now_ms(), last_t_));
  last_t_ = std::max(last_t_, ev.t_ms);
  ev.source = std::move(source);
  ev.kind = std::move(kind);
  ev.detail = std::move(detail);
  ev.run = run;
  events_.push_back(ev);
  publish(wire::event_message(ev));
}

void Session::cue(CueKind kind) {
  backends_.cues.play(kind, cue_text(kind));
  emit_event("session", "cue", std::string(cue_text(kind)));
}

SessionView Session::view() const {
  SessionView v;
  v.phase = phase_;
  v.history = history_;
  v.last_report = last_report_;
  v.pause = pause_;
  v.robot = executor_.state();
  v.variables = config_.robot.variables;
  v.cheat_sheet = config_.cheat_sheet;
  v.t_ms = std::max(executor_.now_ms(), last_t_);
  return v;
}

void Session::emit_snapshot() {
  auto msg = wire::snapshot_message(view());
  {
    std::lock_guard lock(snapshot_mu_);
    snapshot_ = msg;
  }
  publish(msg);
}

nlohmann::json Session::latest_snapshot() const {
  std::lock_guard lock(snapshot_mu_);
  return snapshot_;
}

void Session::set_phase(Phase p) {
  if (p == phase_) return;
  phase_ = p;
  emit_snapshot();
}

void Session::fail(const std::string& code, const std::string& message) {
  emit_event("session", "error", code + ": " + message);
  cue(CueKind::error);
  if (phase_ == Phase::executing || phase_ == Phase::paused) return;
  set_phase(Phase::error);
  set_phase(Phase::awaiting_wake);
}

std::optional<std::string> Session::handle(const SessionInput& input) {
  return std::visit(
      [&](const auto& in) -> std::optional<std::string> {
        using T = std::decay_t<decltype(in)>;
        if constexpr (std::is_same_v<T, WakeInput>) {
          on_wake(in.wake);
          return std::nullopt;
        } else if constexpr (std::is_same_v<T, UtteranceInput>) {
          if (!awaiting_utterance_) {
            emit_event("session", "error", "no_wake: utterance arrived without a wake event");
            return std::string("no_wake");
          }
          awaiting_utterance_ = false;
          on_utterance(in.utterance);
          return std::nullopt;
        } else if constexpr (std::is_same_v<T, TextCommandInput>) {
          on_wake(speech::WakeEvent{std::max(executor_.now_ms(), last_t_),
                                    speech::WakeSource::text_injection});
          awaiting_utterance_ = false;
          if (in.text.find_first_not_of(" \t\r\n") == std::string::npos) {
            fail("timeout", "empty utterance");
            return std::nullopt;
          }
          speech::Utterance u;
          u.text_hint = in.text;
          on_utterance(u);
          return std::nullopt;
        } else if constexpr (std::is_same_v<T, InterruptInput>) {
          return apply_interrupt(in.kind);
        } else if constexpr (std::is_same_v<T, ConfigSetInput>) {
          if (in.key != "inter_bite_delay_s") return std::string("unknown_key");
          if (!(in.value >= 0.0 && in.value <= pause_.max_sleep_s)) return std::string("value");
          pause_.inter_bite_delay_s = in.value;
          emit_event("session", "config_set", in.key + "=" + dsl::format_number(in.value));
          emit_snapshot();
          return std::nullopt;
        } else if constexpr (std::is_same_v<T, ListenerErrorInput>) {
          awaiting_utterance_ = false;
          fail(in.code, "speech listener");
          return std::nullopt;
        }
      },
      input);
}

void Session::on_wake(const speech::WakeEvent& wake) {
  emit_event("speech", "wake", speech::to_string(wake.source));
  cue(CueKind::beep);
  awaiting_utterance_ = true;
  if (phase_ == Phase::awaiting_wake) set_phase(Phase::capturing);
}

void Session::on_utterance(const speech::Utterance& utterance) {
  emit_event("speech", "utterance",
             utterance.text_hint ? "text" : "audio " + std::to_string(utterance.duration_ms) + " ms");
  const bool active = phase_ == Phase::executing || phase_ == Phase::paused;
  if (!active) {
    cue(CueKind::got_it);
    set_phase(Phase::processing);
  }

  speech::Transcript transcript;
  try {
    transcript = speech::transcribe(utterance, backends_.transcriber);
  } catch (const Error& e) {
    fail(e.code(), e.what());
    return;
  }
  emit_event("speech", "transcript", transcript.text);

  if (active) {
    fast_path(transcript.text);
    return;
  }
  if (classify_control_utterance(transcript.text) != ControlIntent::none) {
    // Nothing is running, so there is nothing to stop, pause or resume.
    cue(CueKind::noop);
    set_phase(Phase::awaiting_wake);
    return;
  }
  run_command(transcript.text);
}

void Session::run_command(const std::string& command) {
  const std::string api = llm::render_api_spec(template_, pause_);
  const std::string vars = llm::render_var_spec(template_, config_.robot.variables, pause_);
  last_prompt_ = llm::build_prompt(template_, config_.environment, api, vars, *history_, command);

  llm::RawCompletion completion;
  try {
    completion = backends_.completion.complete(last_prompt_);
  } catch (const Error& e) {
    fail(e.code(), e.what());
    return;
  }

  std::string code;
  try {
    code = llm::extract_code(completion);
  } catch (const NoCode& e) {
    last_report_ = {};
    last_report_.rejections.push_back({0, std::nullopt, "", e.what()});
    publish(wire::report_message(last_report_, {command, completion.text, "", "", last_prompt_}));
    fail(e.code(), e.what());
    return;
  }

  set_phase(Phase::validating);
  auto checked = dsl::check_code(code, config_.robot.variables, pause_);
  last_report_ = checked.report;
  const std::string canonical = checked.validated ? dsl::pretty_print(checked.validated->program) : "";
  publish(wire::report_message(last_report_, {command, completion.text, code, canonical, last_prompt_}));
  if (!checked.validated) {
    fail("rejected", last_report_.rejections.front().reason);
    return;
  }

  history_ = std::make_shared<const llm::ExchangeHistory>(
      llm::append_exchange(*history_, command, canonical));
  try {
    handle_ = executor_.execute(*checked.validated);
  } catch (const Error& e) {
    fail(e.code(), e.what());
    return;
  }
  set_phase(Phase::executing);
}

void Session::fast_path(const std::string& transcript) {
  switch (classify_control_utterance(transcript)) {
    case ControlIntent::none:
      emit_event("session", "busy", transcript);
      cue(CueKind::busy);
      return;
    case ControlIntent::stop:
      if (apply_interrupt("stop")) cue(CueKind::noop);
      return;
    case ControlIntent::pause:
      if (phase_ == Phase::paused || apply_interrupt("pause")) cue(CueKind::noop);
      return;
    case ControlIntent::resume:
      if (phase_ != Phase::paused || apply_interrupt("resume")) cue(CueKind::noop);
      return;
  }
}

std::optional<std::string> Session::apply_interrupt(const std::string& kind) {
  if (kind != "stop" && kind != "pause" && kind != "resume") return std::string("schema");
  if (!handle_) return std::string("state");
  try {
    if (kind == "resume") {
      executor_.resume(*handle_);
    } else {
      executor_.interrupt(*handle_, kind == "stop" ? sim::InterruptKind::stop : sim::InterruptKind::pause);
    }
  } catch (const NotRunning&) {
    return std::string("state");
  } catch (const NotPaused&) {
    return std::string("state");
  }
  emit_event("session", "interrupt_requested", kind, handle_->run);
  return std::nullopt;
}

void Session::pump() {
  for (const auto& ev : executor_.drain_events()) {
    emit_event("robot", std::string(sim::to_string(ev.kind)), ev.detail, ev.run, ev.t_ms);
    if (ev.kind == sim::EventKind::announce) {
      if (ev.detail == sim::kScoopingNow) {
        backends_.cues.play(CueKind::scooping, ev.detail);
      } else if (ev.detail == sim::kScrapingNow) {
        backends_.cues.play(CueKind::scraping, ev.detail);
      } else if (ev.detail == sim::kReadyForAnother) {
        backends_.cues.play(CueKind::ready, ev.detail);
      }
    }
    if (!handle_ || ev.run != handle_->run) continue;
    switch (ev.kind) {
      case sim::EventKind::paused:
        set_phase(Phase::paused);
        break;
      case sim::EventKind::resumed:
        set_phase(Phase::executing);
        break;
      case sim::EventKind::stopped:
      case sim::EventKind::program_done:
        set_phase(Phase::awaiting_wake);
        break;
      default:
        break;
    }
  }
}

}  // namespace voicepilot::session
