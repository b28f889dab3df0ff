#include "voicepilot/session/replay.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>

#include "voicepilot/error.hpp"
#include "voicepilot/session/wire.hpp"

namespace voicepilot::session {

std::unique_ptr<speech::Transcriber> make_transcriber(const AppConfig& config, bool force_mock) {
  if (force_mock || config.speech.backend == "mock") {
    if (config.speech.mock_corpus.empty()) return std::make_unique<speech::MockTranscriber>(
        std::map<std::string, std::string>{});
    return std::make_unique<speech::MockTranscriber>(
        speech::MockTranscriber::from_file(config.speech.mock_corpus.string()));
  }
  if (config.speech.backend == "remote") {
    return std::make_unique<speech::RemoteTranscriber>(speech::RemoteTranscriber::from_env());
  }
  throw ConfigError("unknown speech backend '" + config.speech.backend + "'");
}

std::unique_ptr<llm::CompletionBackend> make_completion_backend(const AppConfig& config, bool force_mock) {
  if (force_mock || config.llm.backend == "mock") {
    if (config.llm.mock_rules.empty()) throw ConfigError("llm.mock_rules is required for the mock backend");
    return std::make_unique<llm::MockCompletionBackend>(
        llm::MockCompletionBackend::from_file(config.llm.mock_rules.string()));
  }
  if (config.llm.backend == "remote") {
    return std::make_unique<llm::RemoteCompletionBackend>(llm::RemoteCompletionBackend::from_env());
  }
  throw ConfigError("unknown llm backend '" + config.llm.backend + "'");
}

std::vector<ScriptLine> parse_script(std::string_view text) {
  std::vector<ScriptLine> out;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t n = 0;
  std::int64_t last_t = 0;
  while (std::getline(in, raw)) {
    ++n;
    const auto b = raw.find_first_not_of(" \t\r");
    if (b == std::string::npos || raw[b] == '#') continue;
    std::string line = raw.substr(b);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();

    const auto fail = [&](const std::string& why) {
      throw ConfigError("script line " + std::to_string(n) + ": " + why);
    };
    ScriptLine sl;
    sl.line = n;
    const auto sp1 = line.find(' ');
    if (sp1 == std::string::npos) fail("expected '<t_ms> <verb>'");
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + sp1, sl.t_ms);
    if (ec != std::errc{} || ptr != line.data() + sp1 || sl.t_ms < 0) fail("bad timestamp");
    if (sl.t_ms < last_t) fail("timestamps must not decrease");
    last_t = sl.t_ms;
    const auto rest = line.substr(sp1 + 1);
    const auto sp2 = rest.find(' ');
    sl.verb = rest.substr(0, sp2);
    sl.argument = sp2 == std::string::npos ? "" : rest.substr(sp2 + 1);

    static const char* kVerbs[] = {"command", "say", "ptt", "audio", "interrupt", "config_set", "fault"};
    if (std::find(std::begin(kVerbs), std::end(kVerbs), sl.verb) == std::end(kVerbs)) {
      fail("unknown verb '" + sl.verb + "'");
    }
    out.push_back(std::move(sl));
  }
  return out;
}

namespace {

struct TimedInput {
  std::int64_t t_ms = 0;
  std::size_t order = 0;
  std::variant<SessionInput, sim::Fault> input;
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open audio fixture " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

ReplayOutcome run_replay(const AppConfig& config, std::string_view script,
                         const std::filesystem::path& base_dir, speech::Transcriber& transcriber,
                         llm::CompletionBackend& completion, const Session::Observer& sink) {
  const auto lines = parse_script(script);

  std::vector<TimedInput> inputs;
  std::vector<speech::InputItem> spoken;
  std::size_t order = 0;
  for (const ScriptLine& sl : lines) {
    if (sl.verb == "say") {
      spoken.push_back({sl.t_ms, speech::TextItem{sl.argument}});
    } else if (sl.verb == "ptt") {
      spoken.push_back({sl.t_ms, speech::PushToTalkItem{}});
    } else if (sl.verb == "audio") {
      std::istringstream args(sl.argument);
      std::string file;
      std::int64_t duration = 0;
      args >> file >> duration;
      if (file.empty() || duration <= 0) {
        throw ConfigError("script line " + std::to_string(sl.line) + ": audio needs <file> <dur_ms>");
      }
      spoken.push_back({sl.t_ms, speech::AudioItem{read_bytes(base_dir / file), duration}});
    } else if (sl.verb == "command") {
      inputs.push_back({sl.t_ms, order++, SessionInput{TextCommandInput{sl.argument}}});
    } else if (sl.verb == "interrupt") {
      inputs.push_back({sl.t_ms, order++, SessionInput{InterruptInput{sl.argument}}});
    } else if (sl.verb == "config_set") {
      std::istringstream args(sl.argument);
      ConfigSetInput cs;
      if (!(args >> cs.key >> cs.value)) {
        throw ConfigError("script line " + std::to_string(sl.line) + ": config_set needs <key> <value>");
      }
      inputs.push_back({sl.t_ms, order++, SessionInput{cs}});
    } else if (sl.verb == "fault") {
      if (sl.argument != "spoon_detached") {
        throw ConfigError("script line " + std::to_string(sl.line) + ": unknown fault");
      }
      inputs.push_back({sl.t_ms, order++, sim::Fault::spoon_detached});
    }
  }

  // The listener is a function of the timed item stream, so it can run
  // ahead of the clock; its outputs are delivered at their own timestamps.
  if (!spoken.empty()) {
    speech::ScriptedInputStream stream(std::move(spoken));
    auto detector = speech::make_wake_detector(config.speech.wake_backend, config.speech.wake_phrase);
    speech::run_listener(stream, *detector, config.speech.endpoint, [&](speech::ListenerOutput out) {
      SessionInput in = std::visit(
          [](auto&& v) -> SessionInput {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, speech::WakeEvent>) {
              return WakeInput{v};
            } else if constexpr (std::is_same_v<T, speech::Utterance>) {
              return UtteranceInput{std::move(v)};
            } else {
              return ListenerErrorInput{std::move(v)};
            }
          },
          std::move(out.value));
      inputs.push_back({out.t_ms, order++, std::move(in)});
    });
  }
  std::stable_sort(inputs.begin(), inputs.end(),
                   [](const TimedInput& a, const TimedInput& b) { return a.t_ms < b.t_ms; });

  sim::Executor executor(config.robot);
  NullCueSink cues;
  Session session(config, executor, Backends{transcriber, completion, cues});
  session.add_observer(sink);
  session.start();

  const std::uint64_t calls_before = completion.calls();
  std::size_t next = 0;
  constexpr std::size_t kMaxTicks = 10'000'000;
  for (std::size_t ticks = 0; ticks < kMaxTicks; ++ticks) {
    while (next < inputs.size() && inputs[next].t_ms <= executor.now_ms()) {
      auto& item = inputs[next++];
      if (auto* fault = std::get_if<sim::Fault>(&item.input)) {
        executor.inject_fault(*fault);
        continue;
      }
      if (auto reason = session.handle(std::get<SessionInput>(item.input))) {
        sink(wire::error_message(*reason));
      }
    }
    if (next >= inputs.size() && executor.state().exec_status != sim::ExecStatus::running) {
      // One more tick settles requests queued by the last inputs.
      executor.tick();
      session.pump();
      if (executor.state().exec_status != sim::ExecStatus::running) break;
      continue;
    }
    executor.tick();
    session.pump();
  }

  ReplayOutcome outcome;
  outcome.completion_calls = completion.calls() - calls_before;
  outcome.end_ms = executor.now_ms();
  outcome.final_phase = session.phase();
  outcome.events = session.events();
  return outcome;
}

}  // namespace voicepilot::session
