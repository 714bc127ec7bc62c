#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <string>

#include "magicitem/dsl/token.hpp"

namespace magicitem::dsl {

namespace {

constexpr std::array<std::string_view, 11> kKeywords = {
    "const", "else", "false", "for", "if", "let", "null", "return", "true", "while", "undefined",
};

// Lexed as keywords so the parser can say exactly what is unsupported.
constexpr std::array<std::string_view, 23> kUnsupported = {
    "async",  "await",  "break", "case",   "catch",      "class", "continue", "delete",
    "do",     "export", "function", "import", "in",      "instanceof", "new", "of",
    "switch", "this",   "throw", "try",    "typeof",     "var",   "yield",
};

// Longest first so that maximal munch falls out of a linear scan.
constexpr std::array<std::string_view, 41> kPunctuators = {
    "===", "!==", "...", "=>", "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=",
    "++",  "--",  "(",   ")",  "{",  "}",  "[",  "]",  ",",  ";",  ".",  ":",  "?",  "=",
    "<",   ">",   "+",   "-",  "*",  "/",  "%",  "!",  "&",  "|",  "^",  "~",  "@",
};

bool isIdentStart(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
}

bool isIdentPart(char c) { return isIdentStart(c) || (c >= '0' && c <= '9'); }

bool isDigit(char c) { return c >= '0' && c <= '9'; }

// Length of the valid UTF-8 sequence starting at s[i], or 0 if invalid.
std::size_t utf8SequenceLength(std::string_view s, std::size_t i) {
  auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    return 1;
  }
  std::size_t len = 0;
  std::uint32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return 0;
  }
  if (i + len > s.size()) {
    return 0;
  }
  for (std::size_t k = 1; k < len; ++k) {
    auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      return 0;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
  if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    return 0;
  }
  return len;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    if (src_.size() > kMaxScriptBytes) {
      fail(0, "script exceeds the " + std::to_string(kMaxScriptBytes) + "-byte size limit");
    }
    std::vector<Token> out;
    while (true) {
      skipTrivia();
      if (pos_ >= src_.size()) {
        out.push_back(Token{TokenKind::EndOfInput, src_.substr(src_.size()), src_.size(), line_,
                            column_});
        return out;
      }
      out.push_back(next());
    }
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& message) {
    // Re-derive line/column of `at` so errors always address a real byte.
    if (!src_.empty() && at >= src_.size()) {
      at = src_.size() - 1;
    }
    std::uint32_t line = 1;
    std::uint32_t col = 1;
    for (std::size_t i = 0; i < at && i < src_.size(); ++i) {
      if (src_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::size_t end = at;
    while (end < src_.size() && end - at < 24 && src_[end] != '\n') {
      ++end;
    }
    throw ParseError(message, line, col, std::string(src_.substr(std::min(at, src_.size()), end - std::min(at, src_.size()))));
  }

  void advance(std::size_t n) {
    for (std::size_t k = 0; k < n && pos_ < src_.size(); ++k, ++pos_) {
      if (src_[pos_] == '\n') {
        ++line_;
        column_ = 1;
      } else {
        ++column_;
      }
    }
  }

  void skipTrivia() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance(1);
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') {
          skipUtf8();
        }
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        std::size_t start = pos_;
        advance(2);
        while (true) {
          if (pos_ >= src_.size()) {
            fail(start, "unterminated block comment");
          }
          if (src_[pos_] == '*' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
            advance(2);
            break;
          }
          skipUtf8();
        }
      } else {
        return;
      }
    }
  }

  void skipUtf8() {
    std::size_t n = utf8SequenceLength(src_, pos_);
    if (n == 0) {
      fail(pos_, "invalid UTF-8 byte");
    }
    advance(n);
  }

  Token make(TokenKind kind, std::size_t start, std::uint32_t line, std::uint32_t col) {
    return Token{kind, src_.substr(start, pos_ - start), start, line, col};
  }

  Token next() {
    std::size_t start = pos_;
    std::uint32_t line = line_;
    std::uint32_t col = column_;
    char c = src_[pos_];

    if (isIdentStart(c)) {
      while (pos_ < src_.size() && isIdentPart(src_[pos_])) {
        advance(1);
      }
      auto text = src_.substr(start, pos_ - start);
      return make(isKeyword(text) ? TokenKind::Keyword : TokenKind::Identifier, start, line, col);
    }
    if (isDigit(c) || (c == '.' && pos_ + 1 < src_.size() && isDigit(src_[pos_ + 1]))) {
      lexNumber(start);
      return make(TokenKind::Number, start, line, col);
    }
    if (c == '"' || c == '\'') {
      lexString(start, c);
      return make(TokenKind::String, start, line, col);
    }
    if (c == '`') {
      fail(start, "template strings are not supported");
    }
    for (auto p : kPunctuators) {
      if (src_.substr(pos_, p.size()) == p) {
        advance(p.size());
        return make(TokenKind::Punct, start, line, col);
      }
    }
    if (static_cast<unsigned char>(c) >= 0x80) {
      fail(start, utf8SequenceLength(src_, pos_) == 0 ? "invalid UTF-8 byte"
                                                      : "illegal character outside string");
    }
    fail(start, std::string("illegal character '") + c + "'");
  }

  void lexNumber(std::size_t start) {
    while (pos_ < src_.size() && isDigit(src_[pos_])) {
      advance(1);
    }
    if (pos_ < src_.size() && src_[pos_] == '.' && pos_ + 1 < src_.size() &&
        isDigit(src_[pos_ + 1])) {
      advance(1);
      while (pos_ < src_.size() && isDigit(src_[pos_])) {
        advance(1);
      }
    } else if (pos_ < src_.size() && src_[pos_] == '.' &&
               !(pos_ + 1 < src_.size() && isIdentStart(src_[pos_ + 1]))) {
      // "1." is a complete literal; "1.foo" is member access on 1.
      advance(1);
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_;
      advance(1);
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) {
        advance(1);
      }
      if (pos_ >= src_.size() || !isDigit(src_[pos_])) {
        fail(save, "malformed exponent in number literal");
      }
      while (pos_ < src_.size() && isDigit(src_[pos_])) {
        advance(1);
      }
    }
    if (pos_ < src_.size() && isIdentStart(src_[pos_])) {
      fail(pos_, "identifier directly after number literal");
    }
    double v = 0;
    auto text = src_.substr(start, pos_ - start);
    std::string buf(text);
    if (!buf.empty() && buf.back() == '.') {
      buf.pop_back();
    }
    auto [p, ec] = std::from_chars(buf.data(), buf.data() + buf.size(), v);
    if (ec != std::errc{} || std::isinf(v)) {
      fail(start, "number literal out of range");
    }
  }

  void lexString(std::size_t start, char quote) {
    advance(1);
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n') {
        fail(start, "unterminated string literal");
      }
      char c = src_[pos_];
      if (c == quote) {
        advance(1);
        return;
      }
      if (c == '\\') {
        advance(1);
        if (pos_ >= src_.size()) {
          fail(start, "unterminated string literal");
        }
        if (src_[pos_] == 'u') {
          for (int k = 1; k <= 4; ++k) {
            if (pos_ + k >= src_.size() || !std::isxdigit(static_cast<unsigned char>(src_[pos_ + k]))) {
              fail(pos_, "malformed \\u escape");
            }
          }
          advance(5);
          continue;
        }
        if (src_[pos_] == 'x') {
          for (int k = 1; k <= 2; ++k) {
            if (pos_ + k >= src_.size() || !std::isxdigit(static_cast<unsigned char>(src_[pos_ + k]))) {
              fail(pos_, "malformed \\x escape");
            }
          }
          advance(3);
          continue;
        }
        if (src_[pos_] == '\n') {
          fail(start, "unterminated string literal");
        }
        skipUtf8();
        continue;
      }
      skipUtf8();
    }
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  std::uint32_t line_ = 1;
  std::uint32_t column_ = 1;
};

void appendUtf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    if (cp >= 0xD800 && cp <= 0xDFFF) {
      cp = 0xFFFD;  // lone surrogate
    }
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace

std::string_view toString(TokenKind kind) {
  switch (kind) {
    case TokenKind::Identifier: return "identifier";
    case TokenKind::Number: return "number";
    case TokenKind::String: return "string";
    case TokenKind::Punct: return "punctuation";
    case TokenKind::Keyword: return "keyword";
    case TokenKind::EndOfInput: return "end of input";
  }
  return "?";
}

ParseError::ParseError(std::string message, std::uint32_t line, std::uint32_t column,
                       std::string excerpt)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
      message_(std::move(message)),
      line_(line),
      column_(column),
      excerpt_(std::move(excerpt)) {}

bool isKeyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end() ||
         isReservedUnsupported(word);
}

bool isReservedUnsupported(std::string_view word) {
  return std::find(kUnsupported.begin(), kUnsupported.end(), word) != kUnsupported.end();
}

std::vector<Token> tokenize(std::string_view source) { return Lexer(source).run(); }

std::string decodeStringLiteral(std::string_view text) {
  std::string out;
  if (text.size() < 2) {
    return out;
  }
  auto body = text.substr(1, text.size() - 2);
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (c != '\\' || i + 1 >= body.size()) {
      out.push_back(c);
      continue;
    }
    char e = body[++i];
    switch (e) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case 'r': out.push_back('\r'); break;
      case 'b': out.push_back('\b'); break;
      case 'f': out.push_back('\f'); break;
      case 'v': out.push_back('\v'); break;
      case '0': out.push_back('\0'); break;
      case 'u': {
        std::uint32_t cp = 0;
        std::from_chars(body.data() + i + 1, body.data() + i + 5, cp, 16);
        appendUtf8(out, cp);
        i += 4;
        break;
      }
      case 'x': {
        std::uint32_t cp = 0;
        std::from_chars(body.data() + i + 1, body.data() + i + 3, cp, 16);
        appendUtf8(out, cp);
        i += 2;
        break;
      }
      default: out.push_back(e); break;
    }
  }
  return out;
}

}  // namespace magicitem::dsl
