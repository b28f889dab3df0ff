// voicepilot: run a live session, validate robot code, or replay a script.

#include <atomic>
#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "voicepilot/app/runtime.hpp"
#include "voicepilot/dsl/validator.hpp"
#include "voicepilot/error.hpp"
#include "voicepilot/session/config.hpp"
#include "voicepilot/session/replay.hpp"
#include "voicepilot/session/wire.hpp"

namespace {

using namespace voicepilot;

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

std::string read_text(const std::string& path) {
  if (path == "-") return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::uint8_t> read_bytes(const std::string& path) {
  const std::string text = read_text(path);
  return {text.begin(), text.end()};
}

int cmd_validate(const std::string& file, const std::string& config_path) {
  dsl::VariableSpec spec;
  dsl::PauseConfig pause;
  if (!config_path.empty()) {
    const auto cfg = session::load_config(config_path);
    spec = cfg.robot.variables;
    pause = cfg.pause;
  }
  const auto result = dsl::check_code(read_text(file), spec, pause);
  nlohmann::json out = {{"report", session::wire::to_json(result.report)},
                        {"canonical", result.validated ? dsl::pretty_print(result.validated->program) : ""}};
  std::cout << out.dump(2) << '\n';
  return result.validated ? 0 : 2;
}

int cmd_replay(const std::string& script_path, const std::string& config_path, const std::string& out_path,
               bool force_mock) {
  const auto cfg = session::load_config(config_path);
  auto transcriber = session::make_transcriber(cfg, force_mock);
  auto completion = session::make_completion_backend(cfg, force_mock);

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw ConfigError("cannot write " + out_path);
  }
  std::ostream& out = out_path.empty() ? std::cout : file;
  const auto base = script_path == "-" ? std::filesystem::current_path()
                                       : std::filesystem::path(script_path).parent_path();
  session::run_replay(cfg, read_text(script_path), base, *transcriber, *completion,
                      [&](const nlohmann::json& m) { out << session::wire::serialize(m) << '\n'; });
  return 0;
}

// Console commands: plain text is a typed command; lines starting with '!'
// are speech input or controls.
bool handle_console_line(app::Runtime& rt, const std::string& line, bool& spoke_audio) {
  if (line.empty()) return true;
  if (line[0] != '!') {
    rt.submit(session::TextCommandInput{line});
    return true;
  }
  std::istringstream in(line.substr(1));
  std::string verb;
  in >> verb;
  if (verb == "quit") return false;
  if (verb == "stop" || verb == "pause" || verb == "resume") {
    rt.submit(session::InterruptInput{verb});
  } else if (verb == "ptt") {
    rt.speak(speech::PushToTalkItem{});
  } else if (verb == "say") {
    std::string rest;
    std::getline(in >> std::ws, rest);
    rt.speak(speech::TextItem{rest});
  } else if (verb == "audio") {
    std::string path;
    std::int64_t duration = 2000;
    in >> path >> duration;
    try {
      rt.speak(speech::AudioItem{read_bytes(path), duration});
      spoke_audio = true;
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << '\n';
    }
  } else if (verb == "delay") {
    double value = 0;
    if (in >> value) rt.submit(session::ConfigSetInput{"inter_bite_delay_s", value});
  } else {
    std::cerr << "unknown console command '!" << verb << "'\n";
  }
  return true;
}

int cmd_run(const std::string& config_path, bool force_mock, std::optional<int> port, bool virtual_clock,
            const std::string& static_dir, const std::string& event_log) {
  app::RuntimeOptions options;
  options.force_mock = force_mock;
  options.virtual_clock = virtual_clock;
  if (port) options.port = static_cast<std::uint16_t>(*port);
  options.static_dir = static_dir;
  options.event_log = event_log;

  auto cfg = session::load_config(config_path);
  const auto settle_delay = std::chrono::milliseconds(cfg.speech.endpoint.silence_cutoff_ms + 100);
  std::mutex out_mu;
  app::Runtime rt(std::move(cfg), options, [&](const nlohmann::json& m) {
    std::lock_guard lock(out_mu);
    std::cout << session::wire::serialize(m) << '\n' << std::flush;
  });
  rt.start();
  if (auto p = rt.port()) std::cerr << "listening on ws://" << options.host << ':' << *p << "/\n";

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  // stdin is read on its own thread so a signal can end the session.
  std::atomic<bool> console_done{false};
  std::atomic<bool> quit{false};
  bool spoke_audio = false;
  std::thread console([&] {
    std::string line;
    while (!quit && std::getline(std::cin, line)) {
      if (!handle_console_line(rt, line, spoke_audio)) {
        quit = true;
        break;
      }
    }
    console_done = true;
  });
  console.detach();

  using namespace std::chrono_literals;
  while (!g_interrupted && !quit) {
    std::this_thread::sleep_for(10ms);
    if (console_done && !port) {
      // End of input: give the listener time to close an open utterance,
      // then wait for the robot to finish.
      std::this_thread::sleep_for(spoke_audio ? settle_delay : std::chrono::milliseconds(50));
      while (!g_interrupted && !rt.settled()) std::this_thread::sleep_for(10ms);
      break;
    }
  }
  quit = true;
  rt.stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Voice-driven feeding robot session"};
  cli.require_subcommand(1);

  std::string config_path = "config/voicepilot.json";

  auto* run = cli.add_subcommand("run", "Run a live session reading commands from stdin");
  bool mock = false;
  bool virtual_clock = false;
  std::optional<int> port;
  std::string static_dir;
  std::string event_log;
  run->add_option("--config", config_path, "Config file")->capture_default_str();
  run->add_flag("--mock", mock, "Use mock speech and LLM backends");
  run->add_option("--port", port, "Serve the wire protocol on this port (0 = any free port)")
      ->check(CLI::Range(0, 65535));
  run->add_flag("--virtual-clock", virtual_clock, "Run the robot clock unpaced");
  run->add_option("--static", static_dir, "Directory of UI assets served over HTTP");
  run->add_option("--event-log", event_log, "Append every outbound message to this JSONL file");

  auto* validate = cli.add_subcommand("validate", "Parse and validate robot code, print the safety report");
  std::string code_file;
  std::string validate_config;
  validate->add_option("FILE", code_file, "Code file, or - for stdin")->required();
  validate->add_option("--config", validate_config, "Config file for variable ranges and pause settings");

  auto* replay = cli.add_subcommand("replay", "Play a scripted session on the virtual clock");
  std::string script;
  std::string out_path;
  bool replay_mock = false;
  replay->add_option("TRANSCRIPT", script, "Script file, or - for stdin")->required();
  replay->add_option("--config", config_path, "Config file")->capture_default_str();
  replay->add_option("--out", out_path, "Write messages here instead of stdout");
  replay->add_flag("--mock", replay_mock, "Force mock backends");

  CLI11_PARSE(cli, argc, argv);

  try {
    if (*run) return cmd_run(config_path, mock, port, virtual_clock, static_dir, event_log);
    if (*validate) return cmd_validate(code_file, validate_config);
    if (*replay) return cmd_replay(script, config_path, out_path, replay_mock);
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return 1;
  }
  return 1;
}
