#pragma once

#include <memory>
#include <string>
#include <string_view>

#include "magicitem/dsl/ast.hpp"
#include "magicitem/dsl/token.hpp"

namespace magicitem::dsl {

/// Maximum syntactic nesting depth (brackets, blocks, unary chains). Keeps the
/// recursive-descent parser and the tree-walker within a bounded stack.
inline constexpr std::uint32_t kMaxNestingDepth = 256;

/// Parses ItemScript. Throws ParseError on the first syntax violation.
std::shared_ptr<const Program> parse(std::string_view source);

/// Canonical pretty-printer. parse(print(p)) is structurally equal to p.
std::string print(const Program& program);
std::string print(const Expr& expr);

/// Span-free S-expression dump used for structural comparison and hashing.
std::string dumpTree(const Program& program);
std::string structuralHash(const Program& program);
bool structurallyEqual(const Program& a, const Program& b);

}  // namespace magicitem::dsl
