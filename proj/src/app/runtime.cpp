#include "voicepilot/app/runtime.hpp"

#include <chrono>

#include "voicepilot/error.hpp"
#include "voicepilot/session/replay.hpp"
#include "voicepilot/session/wire.hpp"

namespace voicepilot::app {

Runtime::Runtime(session::AppConfig config, RuntimeOptions options, session::Session::Observer output)
    : config_(std::move(config)), options_(std::move(options)), output_(std::move(output)) {
  transcriber_ = session::make_transcriber(config_, options_.force_mock);
  completion_ = session::make_completion_backend(config_, options_.force_mock);
  executor_ = std::make_unique<sim::Executor>(config_.robot);
  session_ = std::make_unique<session::Session>(config_, *executor_,
                                                session::Backends{*transcriber_, *completion_, cues_});
  session_->add_observer([this](const nlohmann::json& m) { publish(m); });
  detector_ = speech::make_wake_detector(config_.speech.wake_backend, config_.speech.wake_phrase);
  if (!options_.event_log.empty()) {
    event_log_.open(options_.event_log, std::ios::app);
    if (!event_log_) throw ConfigError("cannot open event log " + options_.event_log.string());
  }
}

Runtime::~Runtime() { stop(); }

void Runtime::start() {
  if (options_.port) {
    net::WsServer::Handlers handlers;
    handlers.on_open = [this](net::WsServer::ConnectionId id) {
      server_->send(id, session::wire::serialize(session_->latest_snapshot()));
    };
    handlers.on_message = [this](net::WsServer::ConnectionId id, const std::string& text) {
      on_wire_message(id, text);
    };
    server_ = std::make_unique<net::WsServer>(std::move(handlers), options_.static_dir);
    server_->listen(options_.host, *options_.port);
  }

  {
    std::lock_guard lock(mu_);
    running_ = true;
  }
  session_->start();
  ticker_ = std::make_unique<sim::TickDriver>(*executor_, !options_.virtual_clock);
  loop_thread_ = std::thread([this] { loop(); });
  listener_thread_ = std::thread([this] {
    speech::run_listener(speech_, *detector_, config_.speech.endpoint, [this](speech::ListenerOutput out) {
      std::visit(
          [this](auto&& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, speech::WakeEvent>) {
              submit(session::WakeInput{v});
            } else if constexpr (std::is_same_v<T, speech::Utterance>) {
              submit(session::UtteranceInput{std::move(v)});
            } else {
              submit(session::ListenerErrorInput{std::move(v)});
            }
          },
          std::move(out.value));
    });
  });
}

void Runtime::stop() {
  {
    std::lock_guard lock(mu_);
    if (!running_) return;
    running_ = false;
  }
  cv_.notify_all();
  speech_.close();
  if (listener_thread_.joinable()) listener_thread_.join();
  if (loop_thread_.joinable()) loop_thread_.join();
  if (ticker_) ticker_->stop();
  if (server_) server_->stop();
}

void Runtime::submit(session::SessionInput input, Reply reply) {
  {
    std::lock_guard lock(mu_);
    queue_.push_back({std::move(input), std::move(reply)});
  }
  cv_.notify_all();
}

void Runtime::speak(std::variant<speech::TextItem, speech::PushToTalkItem, speech::AudioItem> item) {
  speech_.push(std::move(item));
}

std::optional<std::uint16_t> Runtime::port() const {
  if (!server_) return std::nullopt;
  return server_->port();
}

nlohmann::json Runtime::latest_snapshot() const { return session_->latest_snapshot(); }

bool Runtime::settled() const {
  std::lock_guard lock(mu_);
  return queue_.empty() && !busy_ && executor_->state().exec_status != sim::ExecStatus::running &&
         executor_->state().exec_status != sim::ExecStatus::paused;
}

std::uint64_t Runtime::completion_calls() const { return completion_->calls(); }

void Runtime::loop() {
  for (;;) {
    std::optional<Pending> next;
    {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, std::chrono::milliseconds(2), [this] { return !queue_.empty() || !running_; });
      if (!running_) return;
      if (!queue_.empty()) {
        next = std::move(queue_.front());
        queue_.pop_front();
      }
      busy_ = true;
    }
    if (next) {
      std::optional<std::string> reason;
      try {
        reason = session_->handle(next->input);
      } catch (const Error& e) {
        reason = e.code();
      }
      if (next->reply) {
        next->reply(reason);
      } else if (reason) {
        publish(session::wire::error_message(*reason));
      }
    }
    session_->pump();
    std::lock_guard lock(mu_);
    busy_ = false;
  }
}

void Runtime::publish(const nlohmann::json& message) {
  const std::string line = session::wire::serialize(message);
  if (output_) output_(message);
  if (event_log_.is_open()) {
    event_log_ << line << '\n';
    event_log_.flush();
  }
  if (server_) server_->broadcast(line);
}

void Runtime::on_wire_message(net::WsServer::ConnectionId id, const std::string& text) {
  auto parsed = session::wire::parse_client_message(text);
  if (auto* err = std::get_if<session::wire::SchemaError>(&parsed)) {
    server_->send(id, session::wire::serialize(session::wire::error_message("schema", err->detail)));
    return;
  }
  submit(std::get<session::SessionInput>(std::move(parsed)),
         [this, id](const std::optional<std::string>& reason) {
           if (reason) server_->send(id, session::wire::serialize(session::wire::error_message(*reason)));
         });
}

}  // namespace voicepilot::app
