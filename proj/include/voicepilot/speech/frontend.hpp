#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace voicepilot::speech {

// ---------------------------------------------------------------------------
// Input stream
// ---------------------------------------------------------------------------

struct TextItem {
  std::string text;
};
struct PushToTalkItem {};
struct AudioItem {
  std::vector<std::uint8_t> bytes;
  std::int64_t duration_ms = 0;
};

// One unit of listener input stamped with a monotonic arrival time.
struct InputItem {
  std::int64_t t_ms = 0;
  std::variant<TextItem, PushToTalkItem, AudioItem> payload;
};

struct StreamTimedOut {};
struct StreamEnded {};
using StreamRead = std::variant<InputItem, StreamTimedOut, StreamEnded>;

class InputStream {
 public:
  virtual ~InputStream() = default;
  // Next item arriving no later than `deadline_ms`; pass nullopt to wait
  // without a deadline.
  virtual StreamRead next(std::optional<std::int64_t> deadline_ms) = 0;
  // Pushes an item back so the next read returns it again.
  virtual void unread(InputItem item) = 0;
};

// Pre-recorded items; deadlines are judged against the item timestamps.
class ScriptedInputStream : public InputStream {
 public:
  explicit ScriptedInputStream(std::vector<InputItem> items);
  StreamRead next(std::optional<std::int64_t> deadline_ms) override;
  void unread(InputItem item) override;

 private:
  std::deque<InputItem> items_;
};

// Thread-safe live feed; deadlines are judged against a steady clock in
// milliseconds since the stream was created.
class ChannelInputStream : public InputStream {
 public:
  ChannelInputStream();
  void push(std::variant<TextItem, PushToTalkItem, AudioItem> payload);
  void close();
  std::int64_t now_ms() const;

  StreamRead next(std::optional<std::int64_t> deadline_ms) override;
  void unread(InputItem item) override;

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<InputItem> items_;
  bool closed_ = false;
  std::int64_t epoch_ns_;
};

// ---------------------------------------------------------------------------
// Wake detection
// ---------------------------------------------------------------------------

enum class WakeSource { keyword, push_to_talk, text_injection };
std::string to_string(WakeSource s);

struct WakeEvent {
  std::int64_t timestamp_ms = 0;
  WakeSource source = WakeSource::keyword;
};

struct WakeMatch {
  WakeSource source = WakeSource::keyword;
  // Part of the triggering item that belongs to the command, if any; it is
  // pushed back onto the stream for capture.
  std::optional<InputItem> leftover;
};

class WakeDetector {
 public:
  virtual ~WakeDetector() = default;
  virtual std::string id() const = 0;
  virtual std::optional<WakeMatch> offer(const InputItem& item) = 0;
};

// Matches the wake phrase at the start of injected text, ignoring case and
// punctuation. Words after the phrase are kept as the command. A push-to-talk
// signal also wakes.
class KeywordWakeDetector : public WakeDetector {
 public:
  explicit KeywordWakeDetector(std::string phrase = "hey obi");
  std::string id() const override { return "keyword"; }
  std::optional<WakeMatch> offer(const InputItem& item) override;

 private:
  std::string phrase_;
};

class PushToTalkWakeDetector : public WakeDetector {
 public:
  std::string id() const override { return "push_to_talk"; }
  std::optional<WakeMatch> offer(const InputItem& item) override;
};

// Every item opens a command window; for tests and text consoles.
class AlwaysOnWakeDetector : public WakeDetector {
 public:
  std::string id() const override { return "always_on"; }
  std::optional<WakeMatch> offer(const InputItem& item) override;
};

std::unique_ptr<WakeDetector> make_wake_detector(const std::string& backend,
                                                 const std::string& phrase);

// Reads until the detector triggers. Timestamps never go backwards: an item
// older than `not_before_ms` is stamped with `not_before_ms`.
// Throws StreamClosed when the stream ends first.
WakeEvent detect_wake(InputStream& stream, WakeDetector& detector, std::int64_t not_before_ms = 0);

// ---------------------------------------------------------------------------
// Utterance capture
// ---------------------------------------------------------------------------

enum class OverlongPolicy { truncate, timeout };

struct EndpointConfig {
  std::int64_t max_duration_ms = 15'000;
  std::int64_t silence_cutoff_ms = 1'500;
  OverlongPolicy overlong = OverlongPolicy::truncate;
};

struct Utterance {
  std::optional<std::vector<std::uint8_t>> audio;
  std::optional<std::string> text_hint;
  std::int64_t duration_ms = 0;
  std::int64_t captured_at_ms = 0;  // arrival time of the last item consumed
};

// Captures the command following `wake`. Text is passed through unchanged;
// audio chunks are joined until a gap of at least the silence cutoff.
// Throws Timeout when nothing usable arrives within the max duration.
Utterance capture_utterance(InputStream& stream, const EndpointConfig& config, const WakeEvent& wake);

// ---------------------------------------------------------------------------
// Transcription
// ---------------------------------------------------------------------------

struct Transcript {
  std::string text;
  double confidence = 1.0;
  std::string backend_id;
};

class Transcriber {
 public:
  virtual ~Transcriber() = default;
  virtual std::string id() const = 0;
  virtual Transcript transcribe_audio(const std::vector<std::uint8_t>& audio) = 0;
};

// 64-bit FNV-1a of the payload, as 16 lowercase hex digits.
std::string fingerprint(const std::vector<std::uint8_t>& bytes);

// Fixed table from payload fingerprint to transcript text.
class MockTranscriber : public Transcriber {
 public:
  explicit MockTranscriber(std::map<std::string, std::string> corpus);
  // Loads a JSON object of fingerprint -> text. Throws ConfigError.
  static MockTranscriber from_file(const std::string& path);

  std::string id() const override { return "mock"; }
  Transcript transcribe_audio(const std::vector<std::uint8_t>& audio) override;

 private:
  std::map<std::string, std::string> corpus_;
};

// Posts the payload to an HTTP transcription endpoint. The response is
// either JSON with a "text" field or a plain-text body.
class RemoteTranscriber : public Transcriber {
 public:
  RemoteTranscriber(std::string url, std::string token);
  // Reads VP_STT_URL / VP_STT_TOKEN. Throws ConfigError when the URL is unset.
  static RemoteTranscriber from_env();

  std::string id() const override { return "remote"; }
  Transcript transcribe_audio(const std::vector<std::uint8_t>& audio) override;

 private:
  std::string url_;
  std::string token_;
};

// Text-injected utterances bypass the backend entirely.
Transcript transcribe(const Utterance& utterance, Transcriber& backend);

// ---------------------------------------------------------------------------
// Listener loop
// ---------------------------------------------------------------------------

struct ListenerOutput {
  std::variant<WakeEvent, Utterance, std::string /* error code */> value;
  std::int64_t t_ms = 0;
};

// Alternates detect_wake and capture_utterance until the stream closes,
// handing every result to `sink`. Capture never starts before a wake.
void run_listener(InputStream& stream, WakeDetector& detector, const EndpointConfig& endpoint,
                  const std::function<void(ListenerOutput)>& sink);

}  // namespace voicepilot::speech
