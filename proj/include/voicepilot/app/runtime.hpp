#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "voicepilot/net/websocket.hpp"
#include "voicepilot/session/config.hpp"
#include "voicepilot/session/session.hpp"

namespace voicepilot::app {

struct RuntimeOptions {
  bool force_mock = false;
  bool virtual_clock = false;           // tick as fast as possible instead of wall-clock pacing
  std::optional<std::uint16_t> port;    // serve the wire protocol when set; 0 picks a free port
  std::string host = "127.0.0.1";
  std::filesystem::path static_dir;     // optional assets served over plain HTTP
  std::filesystem::path event_log;      // optional append-only JSONL log
};

// Live session: one loop thread owns the Session, a listener thread turns
// speech input into wake/utterance inputs, a tick thread drives the executor,
// and the optional wire server submits inputs through the same queue.
class Runtime {
 public:
  using Reply = std::function<void(const std::optional<std::string>& error_reason)>;

  // `output` receives every outbound message on the loop thread.
  Runtime(session::AppConfig config, RuntimeOptions options, session::Session::Observer output = {});
  ~Runtime();
  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  // Starts all threads. Throws BindError or ConfigError.
  void start();
  void stop();

  void submit(session::SessionInput input, Reply reply = {});
  // Raw speech input for the listener.
  void speak(std::variant<speech::TextItem, speech::PushToTalkItem, speech::AudioItem> item);

  std::optional<std::uint16_t> port() const;
  nlohmann::json latest_snapshot() const;
  // True when no input is queued and the robot is not running.
  bool settled() const;
  std::uint64_t completion_calls() const;

 private:
  struct Pending {
    session::SessionInput input;
    Reply reply;
  };

  void loop();
  void publish(const nlohmann::json& message);
  void on_wire_message(net::WsServer::ConnectionId id, const std::string& text);

  session::AppConfig config_;
  RuntimeOptions options_;
  session::Session::Observer output_;

  std::unique_ptr<speech::Transcriber> transcriber_;
  std::unique_ptr<llm::CompletionBackend> completion_;
  session::NullCueSink cues_;
  std::unique_ptr<sim::Executor> executor_;
  std::unique_ptr<session::Session> session_;
  std::unique_ptr<sim::TickDriver> ticker_;
  std::unique_ptr<net::WsServer> server_;
  speech::ChannelInputStream speech_;
  std::unique_ptr<speech::WakeDetector> detector_;
  std::ofstream event_log_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Pending> queue_;
  bool busy_ = false;
  bool running_ = false;
  std::thread loop_thread_;
  std::thread listener_thread_;
};

}  // namespace voicepilot::app
