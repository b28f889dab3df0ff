#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "voicepilot/dsl/validator.hpp"

namespace voicepilot::llm {

struct EnvironmentDescription {
  std::array<std::string, 4> bowl_contents;
  std::string task_summary;
  std::string robot_physical_summary;
};

struct Exchange {
  std::string user_command;
  std::string generated_code;
  bool operator==(const Exchange&) const = default;
};

// Ordered record of prior (command, validated code) pairs. Entries are
// never modified once appended; appending past the cap evicts the oldest.
class ExchangeHistory {
 public:
  static constexpr std::size_t kDefaultCap = 20;

  explicit ExchangeHistory(std::size_t cap = kDefaultCap) : cap_(cap) {}

  const std::vector<Exchange>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t cap() const { return cap_; }

  friend ExchangeHistory append_exchange(const ExchangeHistory& history, std::string command,
                                         std::string code);

 private:
  std::size_t cap_;
  std::vector<Exchange> entries_;
};

ExchangeHistory append_exchange(const ExchangeHistory& history, std::string command, std::string code);

// Prompt wording lives in a template file of ordered, named blocks:
//
//   @@ environment
//   ...text with {placeholders}...
//   @@ functions
//   ...
//
// Required blocks: environment, functions, variables, user_control,
// history_entry, command. `history_header` is optional.
class PromptTemplate {
 public:
  static const std::vector<std::string>& required_blocks();

  // Throws ConfigError when a required block is missing or duplicated.
  static PromptTemplate parse(std::string_view text);
  static PromptTemplate from_file(const std::string& path);

  bool has(const std::string& name) const { return blocks_.count(name) != 0; }
  const std::string& block(const std::string& name) const;

 private:
  std::map<std::string, std::string> blocks_;
};

// Replaces every `{key}` in `text` that appears in `values`; other braces
// are left untouched.
std::string substitute(std::string_view text, const std::map<std::string, std::string>& values);

// Function block text with the inter-bite delay filled in.
std::string render_api_spec(const PromptTemplate& tmpl, const dsl::PauseConfig& pause);
// Variable block text with ranges and defaults on the grounded scale.
std::string render_var_spec(const PromptTemplate& tmpl, const dsl::VariableSpec& spec,
                            const dsl::PauseConfig& pause);

// Assembles environment, functions, variables, user-control, history and the
// new command (always the last line). Pure: identical inputs give identical
// bytes.
std::string build_prompt(const PromptTemplate& tmpl, const EnvironmentDescription& env,
                         std::string_view api_spec, std::string_view var_spec,
                         const ExchangeHistory& history, std::string_view command);

struct RawCompletion {
  std::string text;
  std::string backend_id;
  std::int64_t latency_ms = 0;
};

class CompletionBackend {
 public:
  CompletionBackend() = default;
  CompletionBackend(CompletionBackend&& other) noexcept : calls_(other.calls_.load()) {}
  virtual ~CompletionBackend() = default;
  virtual std::string id() const = 0;

  // Counts every invocation, successful or not.
  RawCompletion complete(const std::string& prompt);
  std::uint64_t calls() const { return calls_.load(); }

 protected:
  virtual std::string do_complete(const std::string& prompt) = 0;

 private:
  std::atomic<std::uint64_t> calls_{0};
};

// One row of the mock rule table. `template_text` may reference capture
// groups as $1..$9. When `repeat_group` is set, the body is emitted N times
// joined by `separator`, where N is that capture read as a count ("a",
// "two", "3", ...).
struct MockRule {
  std::string pattern;
  std::string template_text;
  int repeat_group = 0;
  std::string separator;
  bool fenced = false;
};

// Deterministic backend: matches the final prompt line against the rules in
// order and renders the first hit; a miss yields a prose refusal.
class MockCompletionBackend : public CompletionBackend {
 public:
  explicit MockCompletionBackend(std::vector<MockRule> rules, std::string command_prefix = "User: ");
  static MockCompletionBackend from_file(const std::string& path, std::string command_prefix = "User: ");

  std::string id() const override { return "mock"; }

  static constexpr std::string_view kRefusal = "Sorry, I can't help with that request.";

 protected:
  std::string do_complete(const std::string& prompt) override;

 private:
  std::vector<MockRule> rules_;
  std::vector<std::regex> compiled_;
  std::string command_prefix_;
};

// Parses a count word or numeral; returns 0 when unrecognized.
int parse_count(std::string_view word);

// OpenAI-style chat-completions client.
class RemoteCompletionBackend : public CompletionBackend {
 public:
  RemoteCompletionBackend(std::string url, std::string token, std::string model);
  // Reads VP_LLM_URL / VP_LLM_TOKEN / VP_LLM_MODEL. Throws ConfigError.
  static RemoteCompletionBackend from_env();

  std::string id() const override { return "remote"; }

 protected:
  std::string do_complete(const std::string& prompt) override;

 private:
  std::string url_;
  std::string token_;
  std::string model_;
};

// First fenced block if the text contains a fence, else the trimmed text.
// Never interprets the code. Throws NoCode when nothing code-like remains.
std::string extract_code(const RawCompletion& completion);

}  // namespace voicepilot::llm
