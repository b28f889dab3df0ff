#include "voicepilot/llm/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "../common/http_post.hpp"
#include "voicepilot/error.hpp"

namespace voicepilot::llm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string single_line(std::string_view s) {
  std::string out = trim(s);
  std::replace(out.begin(), out.end(), '\n', ' ');
  std::replace(out.begin(), out.end(), '\r', ' ');
  return out;
}

// Strips one trailing newline so blocks can be joined predictably.
std::string chomp(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

std::string read_file(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool looks_like_statement(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i >= line.size()) return false;
  const auto c0 = static_cast<unsigned char>(line[i]);
  if (std::isalpha(c0) == 0 && c0 != '_') return false;
  while (i < line.size()) {
    const auto c = static_cast<unsigned char>(line[i]);
    if (std::isalnum(c) == 0 && c != '_' && c != '.') break;
    ++i;
  }
  while (i < line.size() && line[i] == ' ') ++i;
  return i < line.size() && (line[i] == '(' || line[i] == '=');
}

}  // namespace

ExchangeHistory append_exchange(const ExchangeHistory& history, std::string command, std::string code) {
  ExchangeHistory next = history;
  next.entries_.push_back(Exchange{std::move(command), std::move(code)});
  if (next.cap_ > 0 && next.entries_.size() > next.cap_) {
    next.entries_.erase(next.entries_.begin(),
                        next.entries_.begin() + static_cast<std::ptrdiff_t>(next.entries_.size() - next.cap_));
  }
  return next;
}

const std::vector<std::string>& PromptTemplate::required_blocks() {
  static const std::vector<std::string> kRequired = {
      "environment", "functions", "variables", "user_control", "history_entry", "command"};
  return kRequired;
}

PromptTemplate PromptTemplate::parse(std::string_view text) {
  PromptTemplate tmpl;
  std::string current;
  std::string body;
  bool in_block = false;
  const auto flush = [&] {
    if (!in_block) return;
    if (!tmpl.blocks_.emplace(current, chomp(body)).second) {
      throw ConfigError("prompt template: duplicate block '" + current + "'");
    }
  };

  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(start, end - start);
    if (line.rfind("@@", 0) == 0) {
      flush();
      current = trim(line.substr(2));
      if (current.empty()) throw ConfigError("prompt template: unnamed block");
      body.clear();
      in_block = true;
    } else if (in_block) {
      body.append(line);
      body.push_back('\n');
    } else if (!trim(line).empty()) {
      throw ConfigError("prompt template: text before the first block");
    }
    start = end + 1;
  }
  flush();

  for (const auto& name : required_blocks()) {
    if (!tmpl.has(name)) throw ConfigError("prompt template: missing block '" + name + "'");
  }
  const std::string& cmd = tmpl.blocks_.at("command");
  if (cmd.find('\n') != std::string::npos || cmd.size() < 9 ||
      cmd.compare(cmd.size() - 9, 9, "{command}") != 0) {
    throw ConfigError("prompt template: 'command' must be one line ending in {command}");
  }
  return tmpl;
}

PromptTemplate PromptTemplate::from_file(const std::string& path) {
  return parse(read_file(path, "prompt template"));
}

const std::string& PromptTemplate::block(const std::string& name) const {
  const auto it = blocks_.find(name);
  if (it == blocks_.end()) throw ConfigError("prompt template: missing block '" + name + "'");
  return it->second;
}

std::string substitute(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto it = values.find(std::string(text.substr(i + 1, close - i - 1)));
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i++]);
  }
  return out;
}

std::string render_api_spec(const PromptTemplate& tmpl, const dsl::PauseConfig& pause) {
  return substitute(tmpl.block("functions"),
                    {{"inter_bite_delay_s", dsl::format_number(pause.inter_bite_delay_s)},
                     {"max_sleep_s", dsl::format_number(pause.max_sleep_s)}});
}

std::string render_var_spec(const PromptTemplate& tmpl, const dsl::VariableSpec& spec,
                            const dsl::PauseConfig& pause) {
  std::map<std::string, std::string> values;
  for (dsl::Variable v : dsl::kAllVariables) {
    const std::string name(dsl::to_string(v));
    values[name + "_lo"] = dsl::format_number(spec[v].grounded_lo);
    values[name + "_hi"] = dsl::format_number(spec[v].grounded_hi);
    values[name + "_default"] = dsl::format_number(spec[v].default_grounded);
  }
  values["max_sleep_s"] = dsl::format_number(pause.max_sleep_s);
  return substitute(tmpl.block("variables"), values);
}

std::string build_prompt(const PromptTemplate& tmpl, const EnvironmentDescription& env,
                         std::string_view api_spec, std::string_view var_spec,
                         const ExchangeHistory& history, std::string_view command) {
  std::map<std::string, std::string> env_values = {
      {"task_summary", env.task_summary},
      {"robot_physical_summary", env.robot_physical_summary},
  };
  for (std::size_t i = 0; i < env.bowl_contents.size(); ++i) {
    env_values["bowl_" + std::to_string(i)] = env.bowl_contents[i];
  }

  std::string out;
  out += substitute(tmpl.block("environment"), env_values);
  out += "\n\n";
  out += api_spec;
  out += "\n\n";
  out += var_spec;
  out += "\n\n";
  out += tmpl.block("user_control");
  out += "\n\n";
  if (history.size() > 0) {
    if (tmpl.has("history_header")) {
      out += tmpl.block("history_header");
      out += "\n";
    }
    for (const Exchange& e : history.entries()) {
      out += substitute(tmpl.block("history_entry"),
                        {{"command", single_line(e.user_command)}, {"code", e.generated_code}});
      out += "\n";
    }
    out += "\n";
  }
  out += substitute(tmpl.block("command"), {{"command", single_line(command)}});
  return out;
}

RawCompletion CompletionBackend::complete(const std::string& prompt) {
  ++calls_;
  const auto start = std::chrono::steady_clock::now();
  std::string text = do_complete(prompt);
  const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);
  if (trim(text).empty()) throw EmptyCompletion(id() + " backend returned an empty completion");
  return RawCompletion{std::move(text), id(), std::max<std::int64_t>(0, latency.count())};
}

int parse_count(std::string_view word) {
  static const std::map<std::string, int, std::less<>> kWords = {
      {"a", 1},     {"an", 1},    {"one", 1},  {"single", 1}, {"two", 2},   {"couple", 2},
      {"three", 3}, {"four", 4},  {"five", 5}, {"six", 6},    {"seven", 7}, {"eight", 8},
      {"nine", 9},  {"ten", 10},
  };
  std::string lower;
  for (char c : word) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (auto it = kWords.find(lower); it != kWords.end()) return it->second;
  if (!lower.empty() && lower.size() <= 3 &&
      std::all_of(lower.begin(), lower.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::stoi(lower);
  }
  return 0;
}

MockCompletionBackend::MockCompletionBackend(std::vector<MockRule> rules, std::string command_prefix)
    : rules_(std::move(rules)), command_prefix_(std::move(command_prefix)) {
  compiled_.reserve(rules_.size());
  for (const MockRule& r : rules_) {
    try {
      compiled_.emplace_back(r.pattern, std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
      throw ConfigError("mock rule pattern '" + r.pattern + "': " + e.what());
    }
  }
}

MockCompletionBackend MockCompletionBackend::from_file(const std::string& path, std::string command_prefix) {
  const std::string text = read_file(path, "mock rule table");
  std::vector<MockRule> rules;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& row : j.at("rules")) {
      MockRule r;
      r.pattern = row.at("pattern").get<std::string>();
      r.template_text = row.at("template").get<std::string>();
      r.repeat_group = row.value("repeat_group", 0);
      r.separator = row.value("separator", std::string("\n"));
      r.fenced = row.value("fenced", false);
      rules.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("bad mock rule table " + path + ": " + e.what());
  }
  return MockCompletionBackend(std::move(rules), std::move(command_prefix));
}

std::string MockCompletionBackend::do_complete(const std::string& prompt) {
  std::string_view last = prompt;
  if (auto nl = last.rfind('\n'); nl != std::string_view::npos) last.remove_prefix(nl + 1);
  if (!command_prefix_.empty() && last.rfind(command_prefix_, 0) == 0) {
    last.remove_prefix(command_prefix_.size());
  }
  const std::string command(last);

  for (std::size_t i = 0; i < rules_.size(); ++i) {
    std::smatch m;
    if (!std::regex_search(command, m, compiled_[i])) continue;
    const MockRule& rule = rules_[i];

    std::string body;
    for (std::size_t k = 0; k < rule.template_text.size(); ++k) {
      const char c = rule.template_text[k];
      if (c == '$' && k + 1 < rule.template_text.size() && rule.template_text[k + 1] >= '1' &&
          rule.template_text[k + 1] <= '9') {
        const auto group = static_cast<std::size_t>(rule.template_text[k + 1] - '0');
        if (group < m.size()) body += m[group].str();
        ++k;
        continue;
      }
      body.push_back(c);
    }

    int count = 1;
    if (rule.repeat_group > 0 && static_cast<std::size_t>(rule.repeat_group) < m.size()) {
      count = std::max(1, parse_count(m[static_cast<std::size_t>(rule.repeat_group)].str()));
    }
    std::string code;
    for (int n = 0; n < count; ++n) {
      if (n > 0) code += rule.separator;
      code += body;
    }
    if (rule.fenced) return "Here is the code:\n```python\n" + code + "\n```";
    return code;
  }
  return std::string(kRefusal);
}

RemoteCompletionBackend::RemoteCompletionBackend(std::string url, std::string token, std::string model)
    : url_(std::move(url)), token_(std::move(token)), model_(std::move(model)) {}

RemoteCompletionBackend RemoteCompletionBackend::from_env() {
  const auto env = [](const char* name) {
    const char* v = std::getenv(name);
    return std::string(v != nullptr ? v : "");
  };
  std::string url = env("VP_LLM_URL");
  if (url.empty()) throw ConfigError("VP_LLM_URL is not set");
  std::string model = env("VP_LLM_MODEL");
  if (model.empty()) model = "gpt-3.5-turbo";
  return RemoteCompletionBackend(std::move(url), env("VP_LLM_TOKEN"), std::move(model));
}

std::string RemoteCompletionBackend::do_complete(const std::string& prompt) {
  const nlohmann::json request = {
      {"model", model_},
      {"temperature", 0},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
  };
  const auto reply = detail::http_post(url_, token_, request.dump(), "application/json");
  const auto j = nlohmann::json::parse(reply.body, nullptr, false);
  if (j.is_discarded()) throw BackendUnavailable("completion endpoint returned malformed JSON");
  try {
    const auto& content = j.at("choices").at(0).at("message").at("content");
    return content.is_string() ? content.get<std::string>() : std::string();
  } catch (const nlohmann::json::exception&) {
    throw BackendUnavailable("completion endpoint response has no choices[0].message.content");
  }
}

std::string extract_code(const RawCompletion& completion) {
  const std::string_view text = completion.text;
  if (const auto fence = text.find("```"); fence != std::string_view::npos) {
    const auto line_end = text.find('\n', fence);
    if (line_end == std::string_view::npos) throw NoCode("fenced block is empty");
    const auto close = text.find("```", line_end + 1);
    std::string body = trim(text.substr(line_end + 1, close == std::string_view::npos
                                                          ? std::string_view::npos
                                                          : close - line_end - 1));
    if (body.empty()) throw NoCode("fenced block is empty");
    return body;
  }
  std::string body = trim(text);
  if (body.empty()) throw NoCode("completion is blank");
  std::istringstream lines(body);
  std::string line;
  while (std::getline(lines, line)) {
    if (looks_like_statement(line)) return body;
  }
  throw NoCode("completion contains no code");
}

}  // namespace voicepilot::llm
