#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace voicepilot {

// Root of every error raised by the runtime. `code()` is the stable
// identifier used on the wire and in the CLI output.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

#define VOICEPILOT_DEFINE_ERROR(Name, Code)                               \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& what) : Error(Code, what) {}         \
  };

// speech frontend
VOICEPILOT_DEFINE_ERROR(StreamClosed, "stream_closed")
VOICEPILOT_DEFINE_ERROR(Timeout, "timeout")
VOICEPILOT_DEFINE_ERROR(UnrecognizedAudio, "unrecognized_audio")

// shared by speech + llm backends
VOICEPILOT_DEFINE_ERROR(BackendUnavailable, "backend_unavailable")

// llm gateway
VOICEPILOT_DEFINE_ERROR(EmptyCompletion, "empty_completion")
VOICEPILOT_DEFINE_ERROR(NoCode, "no_code")

// robot sim
VOICEPILOT_DEFINE_ERROR(AlreadyRunning, "already_running")
VOICEPILOT_DEFINE_ERROR(NotRunning, "not_running")
VOICEPILOT_DEFINE_ERROR(NotPaused, "not_paused")
VOICEPILOT_DEFINE_ERROR(InternalAssert, "internal_assert")

// configuration and service
VOICEPILOT_DEFINE_ERROR(ConfigError, "config")
VOICEPILOT_DEFINE_ERROR(BindError, "bind")

#undef VOICEPILOT_DEFINE_ERROR

// Raised by the command-language parser. Lines are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, std::string token, std::string reason)
      : Error("parse", "line " + std::to_string(line) + ": " + reason +
                           " near '" + token + "'"),
        line_(line),
        token_(std::move(token)),
        reason_(std::move(reason)) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& token() const noexcept { return token_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string token_;
  std::string reason_;
};

// Raised by the validator for violations that cannot be clipped.
class ValidationError : public Error {
 public:
  ValidationError(std::size_t stmt_index, std::string reason)
      : Error("validation", "statement " + std::to_string(stmt_index) + ": " +
                                reason),
        stmt_index_(stmt_index),
        reason_(std::move(reason)) {}

  std::size_t stmt_index() const noexcept { return stmt_index_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t stmt_index_;
  std::string reason_;
};

}  // namespace voicepilot
