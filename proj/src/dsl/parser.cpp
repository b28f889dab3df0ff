#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "voicepilot/dsl/program.hpp"
#include "voicepilot/error.hpp"

namespace voicepilot::dsl {

std::string_view to_string(Variable v) {
  switch (v) {
    case Variable::speed:
      return "speed";
    case Variable::acceleration:
      return "acceleration";
    case Variable::scoop_depth:
      return "scoop_depth";
  }
  return "unknown";
}

std::optional<Variable> variable_from_string(std::string_view name) {
  for (Variable v : kAllVariables) {
    if (to_string(v) == name) return v;
  }
  return std::nullopt;
}

namespace {

enum class TokenKind { identifier, number, dot, lparen, rparen, assign, other };

struct Token {
  TokenKind kind;
  std::string text;
};

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_';
}
bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}
bool is_digit(char c) { return c >= '0' && c <= '9'; }

// Length of a numeric literal starting at `pos`, or 0 when there is none.
std::size_t scan_number(std::string_view s, std::size_t pos) {
  std::size_t i = pos;
  if (i < s.size() && (s[i] == '+' || s[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < s.size() && is_digit(s[i])) ++i, ++digits;
  if (i < s.size() && s[i] == '.') {
    ++i;
    while (i < s.size() && is_digit(s[i])) ++i, ++digits;
  }
  if (digits == 0) return 0;
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    std::size_t j = i + 1;
    if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
    std::size_t exp_digits = 0;
    while (j < s.size() && is_digit(s[j])) ++j, ++exp_digits;
    if (exp_digits > 0) i = j;
  }
  return i - pos;
}

std::vector<Token> tokenize(std::string_view line) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (c == ' ' || c == '\t' || c == '\r') {
      ++i;
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < line.size() && is_ident_char(line[j])) ++j;
      out.push_back({TokenKind::identifier, std::string(line.substr(i, j - i))});
      i = j;
      continue;
    }
    if (std::size_t n = scan_number(line, i); n > 0) {
      // Identifier characters glued to a number ("3abc") are not a literal.
      if (i + n < line.size() && is_ident_char(line[i + n])) {
        std::size_t j = i + n;
        while (j < line.size() && is_ident_char(line[j])) ++j;
        out.push_back({TokenKind::other, std::string(line.substr(i, j - i))});
        i = j;
        continue;
      }
      out.push_back({TokenKind::number, std::string(line.substr(i, n))});
      i += n;
      continue;
    }
    TokenKind kind = TokenKind::other;
    switch (c) {
      case '.':
        kind = TokenKind::dot;
        break;
      case '(':
        kind = TokenKind::lparen;
        break;
      case ')':
        kind = TokenKind::rparen;
        break;
      case '=':
        kind = TokenKind::assign;
        break;
      default:
        break;
    }
    // '==' is a comparison, never an assignment.
    if (kind == TokenKind::assign && i + 1 < line.size() && line[i + 1] == '=') {
      out.push_back({TokenKind::other, "=="});
      i += 2;
      continue;
    }
    out.push_back({kind, std::string(1, c)});
    ++i;
  }
  return out;
}

class LineParser {
 public:
  LineParser(std::size_t line_no, std::vector<Token> tokens)
      : line_(line_no), tokens_(std::move(tokens)) {}

  Stmt parse_statement() {
    const Token& head = peek("statement");
    if (head.kind != TokenKind::identifier) fail(head.text, "unsupported statement");

    if (head.text == "obi") {
      ++pos_;
      expect(TokenKind::dot, "expected '.' after 'obi'");
      const Token& member = peek("member name");
      if (member.kind != TokenKind::identifier) fail(member.text, "expected member name");
      ++pos_;
      if (auto var = variable_from_string(member.text)) {
        const Token& next = peek("'='");
        if (next.kind != TokenKind::assign) fail(next.text, "expected '=' after variable");
        ++pos_;
        SetVar set{*var, number_argument()};
        finish();
        return set;
      }
      return parse_call(member.text);
    }
    if (head.text == "time") {
      ++pos_;
      expect(TokenKind::dot, "expected '.' after 'time'");
      const Token& member = peek("member name");
      if (member.kind != TokenKind::identifier || member.text != "sleep") {
        fail(member.text, "unknown function");
      }
      ++pos_;
      return parse_sleep();
    }
    if (head.text == "sleep") {
      ++pos_;
      return parse_sleep();
    }
    fail(head.text, "unsupported statement");
  }

 private:
  Stmt parse_call(const std::string& name) {
    if (name == "scoop_from_bowlno" || name == "scrape_then_scoop_bowlno") {
      expect(TokenKind::lparen, "expected '('");
      const int bowl = integer_argument();
      expect(TokenKind::rparen, "expected ')'");
      finish();
      if (name == "scoop_from_bowlno") return Scoop{bowl};
      return ScrapeThenScoop{bowl};
    }
    Stmt stmt;
    if (name == "move_to_mouth") {
      stmt = MoveToMouth{};
    } else if (name == "start") {
      stmt = Start{};
    } else if (name == "stop") {
      stmt = Stop{};
    } else if (name == "pause_indefinitely") {
      stmt = PauseIndefinitely{};
    } else {
      fail(name, "unknown function");
    }
    expect(TokenKind::lparen, "expected '('");
    const Token& close = peek("')'");
    if (close.kind != TokenKind::rparen) fail(close.text, "function takes no arguments");
    ++pos_;
    finish();
    return stmt;
  }

  Stmt parse_sleep() {
    expect(TokenKind::lparen, "expected '('");
    Sleep s{number_argument()};
    expect(TokenKind::rparen, "expected ')'");
    finish();
    return s;
  }

  const Token& literal(const char* what) {
    const Token& tok = peek(what);
    if (tok.kind != TokenKind::number) fail(tok.text, "non-literal argument");
    ++pos_;
    return tok;
  }

  double number_argument() {
    const Token& tok = literal("number");
    std::string_view text = tok.text;
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value)) {
      fail(tok.text, "number out of range");
    }
    return value;
  }

  int integer_argument() {
    const Token& tok = literal("bowl index");
    std::string_view text = tok.text;
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
      fail(tok.text, "bowl index must be an integer literal");
    }
    return value;
  }

  const Token& peek(const char* expected) {
    if (pos_ >= tokens_.size()) fail("<end of line>", std::string("expected ") + expected);
    return tokens_[pos_];
  }

  void expect(TokenKind kind, const char* reason) {
    if (pos_ >= tokens_.size()) fail("<end of line>", reason);
    if (tokens_[pos_].kind != kind) fail(tokens_[pos_].text, reason);
    ++pos_;
  }

  void finish() {
    if (pos_ < tokens_.size()) fail(tokens_[pos_].text, "unexpected trailing token");
  }

  [[noreturn]] void fail(const std::string& token, const std::string& reason) const {
    throw ParseError(line_, token, reason);
  }

  std::size_t line_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

}  // namespace

Program parse(std::string_view code) {
  if (code.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ParseError(1, "<empty>", "empty program text");
  }
  Program program;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= code.size()) {
    std::size_t end = code.find('\n', start);
    if (end == std::string_view::npos) end = code.size();
    std::string_view line = code.substr(start, end - start);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto tokens = tokenize(line);
    if (!tokens.empty()) {
      program.stmts.push_back(LineParser(line_no, std::move(tokens)).parse_statement());
    }
    start = end + 1;
  }
  return program;
}

std::string format_number(double value) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%.3f", value);
  std::string s(buf);
  if (auto dot = s.find('.'); dot != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

namespace {

struct Printer {
  std::string operator()(const Scoop& s) const {
    return "obi.scoop_from_bowlno(" + std::to_string(s.bowl) + ")";
  }
  std::string operator()(const ScrapeThenScoop& s) const {
    return "obi.scrape_then_scoop_bowlno(" + std::to_string(s.bowl) + ")";
  }
  std::string operator()(const MoveToMouth&) const { return "obi.move_to_mouth()"; }
  std::string operator()(const Start&) const { return "obi.start()"; }
  std::string operator()(const Stop&) const { return "obi.stop()"; }
  std::string operator()(const PauseIndefinitely&) const { return "obi.pause_indefinitely()"; }
  std::string operator()(const SetVar& s) const {
    return "obi." + std::string(to_string(s.var)) + " = " + format_number(s.value);
  }
  std::string operator()(const Sleep& s) const {
    return "time.sleep(" + format_number(s.seconds) + ")";
  }
};

}  // namespace

std::string pretty_print(const Stmt& stmt) { return std::visit(Printer{}, stmt); }

std::string pretty_print(const Program& program) {
  std::string out;
  for (std::size_t i = 0; i < program.stmts.size(); ++i) {
    if (i > 0) out += '\n';
    out += pretty_print(program.stmts[i]);
  }
  return out;
}

}  // namespace voicepilot::dsl
