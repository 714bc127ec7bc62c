#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace magicitem::dsl {

/// Largest accepted script, in bytes.
inline constexpr std::size_t kMaxScriptBytes = 64 * 1024;

enum class TokenKind : std::uint8_t {
  Identifier,
  Number,
  String,
  Punct,
  Keyword,
  EndOfInput,
};

std::string_view toString(TokenKind kind);

struct Token {
  TokenKind kind = TokenKind::EndOfInput;
  std::string_view text;  // slice of the source buffer
  std::size_t offset = 0;
  std::uint32_t line = 1;
  std::uint32_t column = 1;

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
  bool isPunct(std::string_view t) const { return is(TokenKind::Punct, t); }
  bool isKeyword(std::string_view t) const { return is(TokenKind::Keyword, t); }
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, std::uint32_t line, std::uint32_t column, std::string excerpt);

  const std::string& message() const { return message_; }
  std::uint32_t line() const { return line_; }
  std::uint32_t column() const { return column_; }
  const std::string& excerpt() const { return excerpt_; }

 private:
  std::string message_;
  std::uint32_t line_;
  std::uint32_t column_;
  std::string excerpt_;
};

/// Splits `source` into tokens; the last token is always EndOfInput.
/// Token texts are views into `source`, which must outlive the result.
/// Throws ParseError on malformed input.
std::vector<Token> tokenize(std::string_view source);

/// Keywords the lexer recognises. Some are reserved only so the parser can
/// reject them with a precise message (e.g. `new`, `class`).
bool isKeyword(std::string_view word);
bool isReservedUnsupported(std::string_view word);

/// Decodes the escapes of a string-literal token (quotes included in `text`).
std::string decodeStringLiteral(std::string_view text);

}  // namespace magicitem::dsl
