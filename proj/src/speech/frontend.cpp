#include "voicepilot/speech/frontend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>

#include <nlohmann/json.hpp>

#include "../common/http_post.hpp"
#include "voicepilot/error.hpp"

namespace voicepilot::speech {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct Word {
  std::string lower;
  std::size_t end = 0;  // offset just past the word in the source text
};

std::vector<Word> words_of(std::string_view s) {
  std::vector<Word> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isalnum(static_cast<unsigned char>(s[i])) == 0) ++i;
    std::size_t j = i;
    std::string w;
    while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j])) != 0) {
      w += static_cast<char>(std::tolower(static_cast<unsigned char>(s[j])));
      ++j;
    }
    if (!w.empty()) out.push_back({std::move(w), j});
    i = j;
  }
  return out;
}

}  // namespace

ScriptedInputStream::ScriptedInputStream(std::vector<InputItem> items)
    : items_(std::make_move_iterator(items.begin()), std::make_move_iterator(items.end())) {}

StreamRead ScriptedInputStream::next(std::optional<std::int64_t> deadline_ms) {
  if (items_.empty()) return StreamEnded{};
  if (deadline_ms && items_.front().t_ms > *deadline_ms) return StreamTimedOut{};
  InputItem item = std::move(items_.front());
  items_.pop_front();
  return item;
}

void ScriptedInputStream::unread(InputItem item) { items_.push_front(std::move(item)); }

ChannelInputStream::ChannelInputStream()
    : epoch_ns_(std::chrono::steady_clock::now().time_since_epoch().count()) {}

std::int64_t ChannelInputStream::now_ms() const {
  const auto ns = std::chrono::steady_clock::now().time_since_epoch().count() - epoch_ns_;
  return ns / 1'000'000;
}

void ChannelInputStream::push(std::variant<TextItem, PushToTalkItem, AudioItem> payload) {
  {
    std::lock_guard lock(mu_);
    items_.push_back(InputItem{now_ms(), std::move(payload)});
  }
  cv_.notify_all();
}

void ChannelInputStream::close() {
  {
    std::lock_guard lock(mu_);
    closed_ = true;
  }
  cv_.notify_all();
}

StreamRead ChannelInputStream::next(std::optional<std::int64_t> deadline_ms) {
  std::unique_lock lock(mu_);
  const auto ready = [&] { return !items_.empty() || closed_; };
  if (deadline_ms) {
    const auto wait_ms = std::max<std::int64_t>(0, *deadline_ms - now_ms());
    if (!cv_.wait_for(lock, std::chrono::milliseconds(wait_ms), ready)) return StreamTimedOut{};
  } else {
    cv_.wait(lock, ready);
  }
  if (items_.empty()) return StreamEnded{};
  InputItem item = std::move(items_.front());
  items_.pop_front();
  return item;
}

void ChannelInputStream::unread(InputItem item) {
  std::lock_guard lock(mu_);
  items_.push_front(std::move(item));
}

std::string to_string(WakeSource s) {
  switch (s) {
    case WakeSource::keyword:
      return "keyword";
    case WakeSource::push_to_talk:
      return "push_to_talk";
    case WakeSource::text_injection:
      return "text_injection";
  }
  return "unknown";
}

KeywordWakeDetector::KeywordWakeDetector(std::string phrase) : phrase_(std::move(phrase)) {}

std::optional<WakeMatch> KeywordWakeDetector::offer(const InputItem& item) {
  // An explicit button press always wakes.
  if (std::holds_alternative<PushToTalkItem>(item.payload)) {
    return WakeMatch{WakeSource::push_to_talk, std::nullopt};
  }
  const auto* text = std::get_if<TextItem>(&item.payload);
  if (text == nullptr) return std::nullopt;
  const auto phrase = words_of(phrase_);
  const auto words = words_of(text->text);
  if (phrase.empty() || words.size() < phrase.size()) return std::nullopt;
  for (std::size_t i = 0; i < phrase.size(); ++i) {
    if (words[i].lower != phrase[i].lower) return std::nullopt;
  }
  WakeMatch match{WakeSource::text_injection, std::nullopt};
  std::string rest = trim(std::string_view(text->text).substr(phrase.back().end));
  rest.erase(0, std::min(rest.find_first_not_of(",.!?;: "), rest.size()));
  if (!rest.empty()) match.leftover = InputItem{item.t_ms, TextItem{rest}};
  return match;
}

std::optional<WakeMatch> PushToTalkWakeDetector::offer(const InputItem& item) {
  if (!std::holds_alternative<PushToTalkItem>(item.payload)) return std::nullopt;
  return WakeMatch{WakeSource::push_to_talk, std::nullopt};
}

std::optional<WakeMatch> AlwaysOnWakeDetector::offer(const InputItem& item) {
  if (std::holds_alternative<PushToTalkItem>(item.payload)) {
    return WakeMatch{WakeSource::push_to_talk, std::nullopt};
  }
  const WakeSource source = std::holds_alternative<TextItem>(item.payload) ? WakeSource::text_injection
                                                                           : WakeSource::keyword;
  return WakeMatch{source, item};
}

std::unique_ptr<WakeDetector> make_wake_detector(const std::string& backend,
                                                 const std::string& phrase) {
  if (backend == "keyword") return std::make_unique<KeywordWakeDetector>(phrase);
  if (backend == "push_to_talk") return std::make_unique<PushToTalkWakeDetector>();
  if (backend == "always_on") return std::make_unique<AlwaysOnWakeDetector>();
  throw ConfigError("unknown wake backend '" + backend + "'");
}

WakeEvent detect_wake(InputStream& stream, WakeDetector& detector, std::int64_t not_before_ms) {
  for (;;) {
    StreamRead read = stream.next(std::nullopt);
    auto* item = std::get_if<InputItem>(&read);
    if (item == nullptr) throw StreamClosed("input ended before a wake trigger");
    if (auto match = detector.offer(*item)) {
      if (match->leftover) stream.unread(std::move(*match->leftover));
      return WakeEvent{std::max(item->t_ms, not_before_ms), match->source};
    }
  }
}

Utterance capture_utterance(InputStream& stream, const EndpointConfig& config, const WakeEvent& wake) {
  const std::int64_t deadline = wake.timestamp_ms + config.max_duration_ms;
  for (;;) {
    StreamRead read = stream.next(deadline);
    if (std::holds_alternative<StreamTimedOut>(read)) throw Timeout("no speech within the capture window");
    if (std::holds_alternative<StreamEnded>(read)) throw StreamClosed("input ended during capture");
    InputItem item = std::get<InputItem>(std::move(read));

    if (auto* text = std::get_if<TextItem>(&item.payload)) {
      if (trim(text->text).empty()) throw Timeout("empty utterance");
      Utterance u;
      u.text_hint = text->text;
      u.captured_at_ms = item.t_ms;
      return u;
    }
    if (std::holds_alternative<PushToTalkItem>(item.payload)) continue;

    auto& first = std::get<AudioItem>(item.payload);
    std::vector<std::uint8_t> bytes = std::move(first.bytes);
    std::int64_t duration = first.duration_ms;
    std::int64_t end = item.t_ms + first.duration_ms;
    std::int64_t last_t = item.t_ms;
    for (;;) {
      StreamRead more = stream.next(end + config.silence_cutoff_ms - 1);
      auto* next_item = std::get_if<InputItem>(&more);
      if (next_item == nullptr) break;
      auto* chunk = std::get_if<AudioItem>(&next_item->payload);
      if (chunk == nullptr) {
        stream.unread(std::move(*next_item));
        break;
      }
      bytes.insert(bytes.end(), chunk->bytes.begin(), chunk->bytes.end());
      duration += chunk->duration_ms;
      end = std::max(end, next_item->t_ms + chunk->duration_ms);
      last_t = next_item->t_ms;
    }

    if (duration > config.max_duration_ms) {
      if (config.overlong == OverlongPolicy::timeout) {
        throw Timeout("utterance exceeds " + std::to_string(config.max_duration_ms) + " ms");
      }
      const auto keep = static_cast<std::size_t>(
          static_cast<long double>(bytes.size()) * config.max_duration_ms / duration);
      bytes.resize(keep);
      duration = config.max_duration_ms;
    }
    Utterance u;
    u.audio = std::move(bytes);
    u.duration_ms = duration;
    u.captured_at_ms = last_t;
    return u;
  }
}

std::string fingerprint(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

MockTranscriber::MockTranscriber(std::map<std::string, std::string> corpus)
    : corpus_(std::move(corpus)) {}

MockTranscriber MockTranscriber::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock transcription corpus " + path);
  try {
    const auto j = nlohmann::json::parse(in);
    return MockTranscriber(j.get<std::map<std::string, std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad mock transcription corpus " + path + ": " + e.what());
  }
}

Transcript MockTranscriber::transcribe_audio(const std::vector<std::uint8_t>& audio) {
  const auto it = corpus_.find(fingerprint(audio));
  if (it == corpus_.end() || trim(it->second).empty()) {
    throw UnrecognizedAudio("no transcript for payload " + fingerprint(audio));
  }
  return Transcript{it->second, 1.0, id()};
}

RemoteTranscriber::RemoteTranscriber(std::string url, std::string token)
    : url_(std::move(url)), token_(std::move(token)) {}

RemoteTranscriber RemoteTranscriber::from_env() {
  const char* url = std::getenv("VP_STT_URL");
  if (url == nullptr || *url == '\0') throw ConfigError("VP_STT_URL is not set");
  const char* token = std::getenv("VP_STT_TOKEN");
  return RemoteTranscriber(url, token != nullptr ? token : "");
}

Transcript RemoteTranscriber::transcribe_audio(const std::vector<std::uint8_t>& audio) {
  const auto reply = detail::http_post(url_, token_, std::string(audio.begin(), audio.end()),
                                       "application/octet-stream");
  Transcript t{reply.body, 1.0, id()};
  const auto j = nlohmann::json::parse(reply.body, nullptr, false);
  if (j.is_object() && j.contains("text") && j["text"].is_string()) {
    t.text = j["text"].get<std::string>();
    if (j.contains("confidence") && j["confidence"].is_number()) {
      t.confidence = std::clamp(j["confidence"].get<double>(), 0.0, 1.0);
    }
  }
  t.text = trim(t.text);
  if (t.text.empty()) throw UnrecognizedAudio("transcription backend returned no text");
  return t;
}

Transcript transcribe(const Utterance& utterance, Transcriber& backend) {
  if (utterance.text_hint) return Transcript{*utterance.text_hint, 1.0, "text"};
  if (!utterance.audio || utterance.audio->empty()) throw UnrecognizedAudio("empty audio payload");
  return backend.transcribe_audio(*utterance.audio);
}

void run_listener(InputStream& stream, WakeDetector& detector, const EndpointConfig& endpoint,
                  const std::function<void(ListenerOutput)>& sink) {
  std::int64_t last = 0;
  for (;;) {
    WakeEvent wake;
    try {
      wake = detect_wake(stream, detector, last);
    } catch (const StreamClosed&) {
      return;
    }
    last = wake.timestamp_ms;
    sink({wake, wake.timestamp_ms});
    try {
      Utterance u = capture_utterance(stream, endpoint, wake);
      last = std::max(last, u.captured_at_ms);
      const auto t = last;
      sink({std::move(u), t});
    } catch (const Timeout& e) {
      sink({std::string(e.code()), last});
    } catch (const StreamClosed&) {
      return;
    }
  }
}

}  // namespace voicepilot::speech
