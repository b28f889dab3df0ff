#include "voicepilot/net/websocket.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <openssl/evp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <stdexcept>

#include "voicepilot/error.hpp"

namespace voicepilot::net {

namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
constexpr std::size_t kMaxHeaderBytes = 16 * 1024;

std::string base64(const unsigned char* data, std::size_t len) {
  std::string out(4 * ((len + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data, static_cast<int>(len));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

bool write_all(int fd, std::string_view bytes) {
  while (!bytes.empty()) {
    const ssize_t n = ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL);
    if (n <= 0) return false;
    bytes.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct HttpRequest {
  std::string method;
  std::string target;
  std::map<std::string, std::string> headers;  // lower-cased names
};

// Reads until the blank line ending the header block. Bytes past it are
// returned in `rest`.
std::optional<HttpRequest> read_request(int fd, std::string& rest) {
  std::string buf;
  char chunk[2048];
  std::size_t end = std::string::npos;
  while ((end = buf.find("\r\n\r\n")) == std::string::npos) {
    if (buf.size() > kMaxHeaderBytes) return std::nullopt;
    const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
    if (n <= 0) return std::nullopt;
    buf.append(chunk, static_cast<std::size_t>(n));
  }
  rest = buf.substr(end + 4);
  std::istringstream in(buf.substr(0, end));
  HttpRequest req;
  std::string line;
  if (!std::getline(in, line)) return std::nullopt;
  std::istringstream first(line);
  first >> req.method >> req.target;
  if (req.method.empty() || req.target.empty()) return std::nullopt;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    req.headers[lower(trim(line.substr(0, colon)))] = trim(line.substr(colon + 1));
  }
  return req;
}

bool header_has_token(const HttpRequest& req, const std::string& name, const std::string& token) {
  const auto it = req.headers.find(name);
  if (it == req.headers.end()) return false;
  std::istringstream in(lower(it->second));
  std::string part;
  while (std::getline(in, part, ',')) {
    if (trim(part) == token) return true;
  }
  return false;
}

std::string content_type_for(const std::filesystem::path& p) {
  const std::string ext = lower(p.extension().string());
  if (ext == ".html" || ext == ".htm") return "text/html; charset=utf-8";
  if (ext == ".js") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

std::string http_response(int status, const std::string& reason, const std::string& type, const std::string& body) {
  std::ostringstream out;
  out << "HTTP/1.1 " << status << ' ' << reason << "\r\n"
      << "Content-Type: " << type << "\r\n"
      << "Content-Length: " << body.size() << "\r\n"
      << "Connection: close\r\n\r\n"
      << body;
  return out.str();
}

}  // namespace

std::string websocket_accept(std::string_view client_key) {
  std::string input(client_key);
  input += kGuid;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(input.data(), input.size(), digest, &len, EVP_sha1(), nullptr) != 1) {
    throw InternalAssert("SHA-1 digest failed");
  }
  return base64(digest, len);
}

std::string encode_frame(Opcode opcode, std::string_view payload,
                         std::optional<std::array<std::uint8_t, 4>> mask) {
  std::string out;
  out.reserve(payload.size() + 14);
  out.push_back(static_cast<char>(0x80 | static_cast<std::uint8_t>(opcode)));
  const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
  const std::uint64_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<char>(mask_bit | n));
  } else if (n <= 0xFFFF) {
    out.push_back(static_cast<char>(mask_bit | 126));
    out.push_back(static_cast<char>((n >> 8) & 0xFF));
    out.push_back(static_cast<char>(n & 0xFF));
  } else {
    out.push_back(static_cast<char>(mask_bit | 127));
    for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<char>((n >> shift) & 0xFF));
  }
  if (mask) {
    for (std::uint8_t b : *mask) out.push_back(static_cast<char>(b));
    for (std::size_t i = 0; i < payload.size(); ++i) {
      out.push_back(static_cast<char>(static_cast<std::uint8_t>(payload[i]) ^ (*mask)[i % 4]));
    }
  } else {
    out.append(payload);
  }
  return out;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<Frame> FrameDecoder::next() {
  if (failed_ || buffer_.size() < 2) return std::nullopt;
  const auto byte = [&](std::size_t i) { return static_cast<std::uint8_t>(buffer_[i]); };
  const std::uint8_t b0 = byte(0);
  const std::uint8_t b1 = byte(1);
  if ((b0 & 0x70) != 0) {
    failed_ = true;  // reserved bits without a negotiated extension
    return std::nullopt;
  }
  std::size_t pos = 2;
  std::uint64_t len = b1 & 0x7F;
  if (len == 126) {
    if (buffer_.size() < 4) return std::nullopt;
    len = (std::uint64_t{byte(2)} << 8) | byte(3);
    pos = 4;
  } else if (len == 127) {
    if (buffer_.size() < 10) return std::nullopt;
    len = 0;
    for (std::size_t i = 2; i < 10; ++i) len = (len << 8) | byte(i);
    pos = 10;
  }
  if (len > kMaxPayload) {
    failed_ = true;
    return std::nullopt;
  }
  const bool masked = (b1 & 0x80) != 0;
  std::array<std::uint8_t, 4> mask{};
  if (masked) {
    if (buffer_.size() < pos + 4) return std::nullopt;
    for (std::size_t i = 0; i < 4; ++i) mask[i] = byte(pos + i);
    pos += 4;
  }
  if (buffer_.size() < pos + len) return std::nullopt;

  Frame frame;
  frame.fin = (b0 & 0x80) != 0;
  frame.opcode = static_cast<Opcode>(b0 & 0x0F);
  frame.payload = buffer_.substr(pos, static_cast<std::size_t>(len));
  if (masked) {
    for (std::size_t i = 0; i < frame.payload.size(); ++i) {
      frame.payload[i] = static_cast<char>(static_cast<std::uint8_t>(frame.payload[i]) ^ mask[i % 4]);
    }
  }
  buffer_.erase(0, pos + static_cast<std::size_t>(len));
  return frame;
}

WsServer::WsServer(Handlers handlers, std::filesystem::path static_dir)
    : handlers_(std::move(handlers)), static_dir_(std::move(static_dir)) {}

WsServer::~WsServer() { stop(); }

void WsServer::listen(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints, &res) != 0 || !res) {
    throw BindError("cannot resolve listen address '" + host + "'");
  }
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 16) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0) throw BindError("cannot bind " + host + ":" + service + ": " + std::strerror(errno));

  sockaddr_storage addr{};
  socklen_t addr_len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &addr_len);
  if (addr.ss_family == AF_INET) {
    port_ = ntohs(reinterpret_cast<sockaddr_in*>(&addr)->sin_port);
  } else {
    port_ = ntohs(reinterpret_cast<sockaddr_in6*>(&addr)->sin6_port);
  }
  listen_fd_ = fd;
  running_ = true;
  accept_thread_ = std::thread([this] { accept_loop(); });
}

void WsServer::stop() {
  if (!running_.exchange(false)) return;
  if (accept_thread_.joinable()) accept_thread_.join();
  ::close(listen_fd_);
  listen_fd_ = -1;
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, conn] : connections_) {
      conn->open = false;
      ::shutdown(conn->fd, SHUT_RDWR);
    }
    workers.swap(workers_);
  }
  for (auto& t : workers) {
    if (t.joinable()) t.join();
  }
}

void WsServer::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    if (::poll(&p, 1, 50) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    auto conn = std::make_shared<Connection>();
    conn->fd = fd;
    std::lock_guard lock(mu_);
    const ConnectionId id = next_id_++;
    workers_.emplace_back([this, id, conn] { serve(id, conn); });
  }
}

void WsServer::serve_static(Connection& conn, const std::string& target) {
  std::string path = target.substr(0, target.find('?'));
  if (path == "/") path = "/index.html";
  const auto rel = std::filesystem::path(path.substr(1)).lexically_normal();
  std::string response;
  if (static_dir_.empty() || rel.empty() || *rel.begin() == "..") {
    response = http_response(404, "Not Found", "text/plain", "not found\n");
  } else {
    std::ifstream in(static_dir_ / rel, std::ios::binary);
    if (!in) {
      response = http_response(404, "Not Found", "text/plain", "not found\n");
    } else {
      std::string body{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
      response = http_response(200, "OK", content_type_for(rel), body);
    }
  }
  write_all(conn.fd, response);
}

void WsServer::serve(ConnectionId id, std::shared_ptr<Connection> conn) {
  std::string rest;
  const auto req = read_request(conn->fd, rest);
  const auto finish = [&] {
    ::shutdown(conn->fd, SHUT_RDWR);
    ::close(conn->fd);
  };
  if (!req) {
    finish();
    return;
  }
  const bool upgrade = header_has_token(*req, "upgrade", "websocket") &&
                       header_has_token(*req, "connection", "upgrade") &&
                       req->headers.count("sec-websocket-key") != 0;
  if (!upgrade) {
    if (req->method == "GET") {
      serve_static(*conn, req->target);
    } else {
      write_all(conn->fd, http_response(405, "Method Not Allowed", "text/plain", "method not allowed\n"));
    }
    finish();
    return;
  }

  const std::string handshake = "HTTP/1.1 101 Switching Protocols\r\n"
                                "Upgrade: websocket\r\n"
                                "Connection: Upgrade\r\n"
                                "Sec-WebSocket-Accept: " +
                                websocket_accept(req->headers.at("sec-websocket-key")) + "\r\n\r\n";
  if (!write_all(conn->fd, handshake)) {
    finish();
    return;
  }
  {
    std::lock_guard lock(mu_);
    connections_[id] = conn;
  }
  if (handlers_.on_open) handlers_.on_open(id);

  FrameDecoder decoder;
  decoder.feed(rest);
  std::string message;
  bool in_message = false;
  char chunk[4096];
  bool closing = false;
  while (conn->open && !closing) {
    while (auto frame = decoder.next()) {
      switch (frame->opcode) {
        case Opcode::text:
        case Opcode::binary:
          message = std::move(frame->payload);
          in_message = !frame->fin;
          break;
        case Opcode::continuation:
          if (!in_message) {
            closing = true;
            break;
          }
          message += frame->payload;
          in_message = !frame->fin;
          break;
        case Opcode::ping: {
          std::lock_guard lock(conn->write_mu);
          write_all(conn->fd, encode_frame(Opcode::pong, frame->payload));
          continue;
        }
        case Opcode::pong:
          continue;
        case Opcode::close: {
          std::lock_guard lock(conn->write_mu);
          write_all(conn->fd, encode_frame(Opcode::close, frame->payload.substr(0, 2)));
          closing = true;
          break;
        }
        default:
          closing = true;
          break;
      }
      if (closing) break;
      if (!in_message && (frame->opcode == Opcode::text || frame->opcode == Opcode::binary ||
                          frame->opcode == Opcode::continuation)) {
        if (handlers_.on_message) handlers_.on_message(id, message);
        message.clear();
      }
    }
    if (closing || decoder.failed()) break;
    const ssize_t n = ::recv(conn->fd, chunk, sizeof(chunk), 0);
    if (n <= 0) break;
    decoder.feed(std::string_view(chunk, static_cast<std::size_t>(n)));
  }

  conn->open = false;
  {
    std::lock_guard lock(mu_);
    connections_.erase(id);
  }
  if (handlers_.on_close) handlers_.on_close(id);
  std::lock_guard lock(conn->write_mu);
  finish();
}

bool WsServer::send(ConnectionId id, std::string_view text) {
  std::shared_ptr<Connection> conn;
  {
    std::lock_guard lock(mu_);
    const auto it = connections_.find(id);
    if (it == connections_.end()) return false;
    conn = it->second;
  }
  std::lock_guard lock(conn->write_mu);
  if (!conn->open) return false;
  return write_all(conn->fd, encode_frame(Opcode::text, text));
}

void WsServer::broadcast(std::string_view text) {
  std::vector<std::shared_ptr<Connection>> targets;
  {
    std::lock_guard lock(mu_);
    for (auto& [id, conn] : connections_) targets.push_back(conn);
  }
  const std::string frame = encode_frame(Opcode::text, text);
  for (auto& conn : targets) {
    std::lock_guard lock(conn->write_mu);
    if (conn->open) write_all(conn->fd, frame);
  }
}

std::size_t WsServer::connection_count() const {
  std::lock_guard lock(mu_);
  return connections_.size();
}

WsClient::~WsClient() { close(); }

void WsClient::connect(const std::string& host, std::uint16_t port, const std::string& path) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0 || !res) {
    throw std::runtime_error("cannot resolve " + host);
  }
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  ::freeaddrinfo(res);
  if (fd_ < 0) throw std::runtime_error("cannot connect to " + host + ":" + std::to_string(port));

  std::random_device rd;
  unsigned char nonce[16];
  for (auto& b : nonce) b = static_cast<unsigned char>(rd());
  const std::string key = base64(nonce, sizeof(nonce));
  const std::string request = "GET " + path + " HTTP/1.1\r\nHost: " + host + ":" + std::to_string(port) +
                              "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                              "Sec-WebSocket-Key: " + key + "\r\nSec-WebSocket-Version: 13\r\n\r\n";
  if (!write_all(fd_, request)) throw std::runtime_error("handshake write failed");

  std::string buf;
  char chunk[1024];
  std::size_t end;
  while ((end = buf.find("\r\n\r\n")) == std::string::npos) {
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) throw std::runtime_error("handshake read failed");
    buf.append(chunk, static_cast<std::size_t>(n));
  }
  const std::string head = buf.substr(0, end);
  if (head.rfind("HTTP/1.1 101", 0) != 0) throw std::runtime_error("handshake refused: " + head);
  if (head.find(websocket_accept(key)) == std::string::npos) {
    throw std::runtime_error("handshake accept key mismatch");
  }
  decoder_.feed(std::string_view(buf).substr(end + 4));
}

void WsClient::send_text(std::string_view text) {
  std::random_device rd;
  std::array<std::uint8_t, 4> mask{};
  for (auto& b : mask) b = static_cast<std::uint8_t>(rd());
  send_raw(encode_frame(Opcode::text, text, mask));
}

void WsClient::send_raw(std::string_view bytes) {
  if (fd_ < 0 || !write_all(fd_, bytes)) throw std::runtime_error("send failed");
}

std::optional<std::string> WsClient::receive(int timeout_ms) {
  if (fd_ < 0) return std::nullopt;
  char chunk[4096];
  std::string message;
  bool in_message = false;
  for (;;) {
    while (auto frame = decoder_.next()) {
      if (frame->opcode == Opcode::close) return std::nullopt;
      if (frame->opcode == Opcode::ping || frame->opcode == Opcode::pong) continue;
      if (frame->opcode == Opcode::continuation) {
        message += frame->payload;
      } else {
        message = std::move(frame->payload);
      }
      in_message = !frame->fin;
      if (!in_message) return message;
    }
    pollfd p{fd_, POLLIN, 0};
    if (::poll(&p, 1, timeout_ms) <= 0) return std::nullopt;
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0) return std::nullopt;
    decoder_.feed(std::string_view(chunk, static_cast<std::size_t>(n)));
  }
}

void WsClient::close() {
  if (fd_ < 0) return;
  std::array<std::uint8_t, 4> mask{1, 2, 3, 4};
  write_all(fd_, encode_frame(Opcode::close, std::string("\x03\xe8", 2), mask));
  ::shutdown(fd_, SHUT_RDWR);
  ::close(fd_);
  fd_ = -1;
}

}  // namespace voicepilot::net
