#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

// Minimal RFC 6455 WebSocket transport: one JSON message per text frame.
namespace voicepilot::net {

enum class Opcode : std::uint8_t { continuation = 0, text = 1, binary = 2, close = 8, ping = 9, pong = 10 };

struct Frame {
  bool fin = true;
  Opcode opcode = Opcode::text;
  std::string payload;
};

// Sec-WebSocket-Accept value for a client key.
std::string websocket_accept(std::string_view client_key);

std::string encode_frame(Opcode opcode, std::string_view payload,
                         std::optional<std::array<std::uint8_t, 4>> mask = std::nullopt);

// Incremental frame parser; unmasks client frames.
class FrameDecoder {
 public:
  static constexpr std::size_t kMaxPayload = 4u << 20;

  void feed(std::string_view bytes);
  std::optional<Frame> next();
  bool failed() const { return failed_; }

 private:
  std::string buffer_;
  bool failed_ = false;
};

class WsServer {
 public:
  using ConnectionId = std::uint64_t;
  struct Handlers {
    std::function<void(ConnectionId)> on_open;
    std::function<void(ConnectionId, const std::string&)> on_message;
    std::function<void(ConnectionId)> on_close;
  };

  // Plain HTTP GETs are answered from `static_dir` when it is set.
  explicit WsServer(Handlers handlers, std::filesystem::path static_dir = {});
  ~WsServer();
  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;

  // Binds and starts accepting. Port 0 picks a free port. Throws BindError.
  void listen(const std::string& host, std::uint16_t port);
  std::uint16_t port() const { return port_; }
  void stop();

  bool send(ConnectionId id, std::string_view text);
  void broadcast(std::string_view text);
  std::size_t connection_count() const;

 private:
  struct Connection {
    int fd = -1;
    std::mutex write_mu;
    std::atomic<bool> open{true};
  };

  void accept_loop();
  void serve(ConnectionId id, std::shared_ptr<Connection> conn);
  void serve_static(Connection& conn, const std::string& target);

  Handlers handlers_;
  std::filesystem::path static_dir_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  mutable std::mutex mu_;
  std::map<ConnectionId, std::shared_ptr<Connection>> connections_;
  std::vector<std::thread> workers_;
  ConnectionId next_id_ = 1;
};

// Blocking client, used by tests and tooling.
class WsClient {
 public:
  WsClient() = default;
  ~WsClient();
  WsClient(const WsClient&) = delete;
  WsClient& operator=(const WsClient&) = delete;

  // Throws std::runtime_error on failure.
  void connect(const std::string& host, std::uint16_t port, const std::string& path = "/");
  void send_text(std::string_view text);
  void send_raw(std::string_view bytes);
  // Next text message, or nullopt on timeout or close.
  std::optional<std::string> receive(int timeout_ms);
  void close();

 private:
  int fd_ = -1;
  FrameDecoder decoder_;
};

}  // namespace voicepilot::net
