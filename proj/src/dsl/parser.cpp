// Recursive-descent parser for ItemScript. One token of lookahead everywhere
// except arrow-function heads, which are recognised by a bounded forward scan
// over the parameter list (no backtracking).

#include "magicitem/dsl/parser.hpp"

#include <algorithm>
#include <charconv>

#include "magicitem/common/digest.hpp"

namespace magicitem::dsl {

namespace {

std::uint32_t heightOf(const ExprPtr& e) { return e ? e->height : 0; }
std::uint32_t heightOf(const StmtPtr& s) { return s ? s->height : 0; }

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::uint32_t childHeight(const Expr& e) {
  return std::visit(
      Overloaded{
          [](const ArrayLit& n) {
            std::uint32_t h = 0;
            for (const auto& el : n.elements) h = std::max(h, heightOf(el));
            return h;
          },
          [](const ObjectLit& n) {
            std::uint32_t h = 0;
            for (const auto& [k, v] : n.properties) h = std::max(h, heightOf(v));
            return h;
          },
          [](const MemberExpr& n) { return heightOf(n.object); },
          [](const IndexExpr& n) { return std::max(heightOf(n.object), heightOf(n.index)); },
          [](const CallExpr& n) {
            std::uint32_t h = heightOf(n.callee);
            for (const auto& a : n.args) h = std::max(h, heightOf(a));
            return h;
          },
          [](const UnaryExpr& n) { return heightOf(n.operand); },
          [](const BinaryExpr& n) { return std::max(heightOf(n.lhs), heightOf(n.rhs)); },
          [](const AssignExpr& n) { return std::max(heightOf(n.target), heightOf(n.value)); },
          [](const ConditionalExpr& n) {
            return std::max({heightOf(n.test), heightOf(n.consequent), heightOf(n.alternate)});
          },
          [](const ArrowFunction& n) {
            std::uint32_t h = heightOf(n.exprBody);
            for (const auto& s : n.blockBody) h = std::max(h, heightOf(s));
            return h;
          },
          [](const auto&) { return std::uint32_t{0}; },
      },
      e.node);
}

std::uint32_t childHeight(const Stmt& s) {
  return std::visit(
      Overloaded{
          [](const VarDecl& n) { return heightOf(n.init); },
          [](const ExprStmt& n) { return heightOf(n.expr); },
          [](const IfStmt& n) {
            return std::max({heightOf(n.test), heightOf(n.consequent), heightOf(n.alternate)});
          },
          [](const WhileStmt& n) { return std::max(heightOf(n.test), heightOf(n.body)); },
          [](const ForStmt& n) {
            return std::max({heightOf(n.init), heightOf(n.test), heightOf(n.update),
                             heightOf(n.body)});
          },
          [](const BlockStmt& n) {
            std::uint32_t h = 0;
            for (const auto& st : n.body) h = std::max(h, heightOf(st));
            return h;
          },
          [](const ReturnStmt& n) { return heightOf(n.value); },
      },
      s.node);
}

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src), tokens_(tokenize(src)) {}

  std::vector<StmtPtr> parseProgram() {
    std::vector<StmtPtr> out;
    while (peek().kind != TokenKind::EndOfInput) {
      out.push_back(parseStatement());
    }
    return out;
  }

 private:
  // RAII recursion counter.
  struct Nest {
    explicit Nest(Parser& p) : p_(p) {
      if (++p_.depth_ > kMaxNestingDepth) {
        p_.failAt(p_.peek(), "nesting too deep");
      }
    }
    ~Nest() { --p_.depth_; }
    Parser& p_;
  };

  const Token& peek(std::size_t ahead = 0) const {
    return tokens_[std::min(pos_ + ahead, tokens_.size() - 1)];
  }

  const Token& take() {
    const Token& t = tokens_[pos_];
    if (pos_ + 1 < tokens_.size()) {
      ++pos_;
    }
    return t;
  }

  const Token& previous() const { return tokens_[pos_ == 0 ? 0 : pos_ - 1]; }

  [[noreturn]] void failAt(const Token& tok, const std::string& message) {
    std::size_t offset = tok.offset;
    std::uint32_t line = tok.line;
    std::uint32_t col = tok.column;
    if (tok.kind == TokenKind::EndOfInput && !src_.empty()) {
      // Point at the last real byte rather than past the end.
      offset = src_.size() - 1;
      line = 1;
      col = 1;
      for (std::size_t i = 0; i < offset; ++i) {
        if (src_[i] == '\n') {
          ++line;
          col = 1;
        } else {
          ++col;
        }
      }
    }
    std::string excerpt(tok.kind == TokenKind::EndOfInput ? src_.substr(offset, 1) : tok.text);
    throw ParseError(message, line, col, excerpt);
  }

  std::string describe(const Token& t) const {
    if (t.kind == TokenKind::EndOfInput) {
      return "end of input";
    }
    return "'" + std::string(t.text) + "'";
  }

  [[noreturn]] void unexpected(const Token& t, std::string_view expected) {
    if (t.kind == TokenKind::Keyword && isReservedUnsupported(t.text)) {
      failAt(t, "'" + std::string(t.text) + "' is not supported in ItemScript");
    }
    if (t.isPunct("++") || t.isPunct("--")) {
      failAt(t, "'" + std::string(t.text) + "' is not supported; use += 1 or -= 1");
    }
    if (t.isPunct("...")) {
      failAt(t, "spread syntax is not supported");
    }
    if (t.isPunct("&") || t.isPunct("|") || t.isPunct("^") || t.isPunct("~")) {
      failAt(t, "bitwise operators are not supported");
    }
    if (t.isPunct("@")) {
      failAt(t, "decorators are not supported");
    }
    failAt(t, "expected " + std::string(expected) + " but found " + describe(t));
  }

  const Token& expectPunct(std::string_view p) {
    if (!peek().isPunct(p)) {
      unexpected(peek(), "'" + std::string(p) + "'");
    }
    return take();
  }

  bool acceptPunct(std::string_view p) {
    if (peek().isPunct(p)) {
      take();
      return true;
    }
    return false;
  }

  Span spanFrom(const Token& start) const {
    const Token& end = previous();
    std::size_t endOffset = end.offset + end.text.size();
    if (endOffset < start.offset) {
      endOffset = start.offset;
    }
    return Span{static_cast<std::uint32_t>(start.offset),
                static_cast<std::uint32_t>(endOffset - start.offset), start.line, start.column};
  }

  template <typename Node>
  ExprPtr makeExpr(const Token& start, Node node) {
    auto e = std::make_unique<Expr>();
    e->node = std::move(node);
    e->span = spanFrom(start);
    e->height = childHeight(*e) + 1;
    if (e->height > kMaxNestingDepth) {
      failAt(start, "expression nested too deeply");
    }
    return e;
  }

  template <typename Node>
  StmtPtr makeStmt(const Token& start, Node node) {
    auto s = std::make_unique<Stmt>();
    s->node = std::move(node);
    s->span = spanFrom(start);
    s->height = childHeight(*s) + 1;
    if (s->height > kMaxNestingDepth) {
      failAt(start, "statement nested too deeply");
    }
    return s;
  }

  // ---- statements -------------------------------------------------------

  StmtPtr parseStatement() {
    Nest nest(*this);
    const Token& start = peek();
    if (start.isKeyword("let") || start.isKeyword("const")) {
      auto decl = parseVarDecl();
      expectPunct(";");
      decl->span = spanFrom(start);
      return decl;
    }
    if (start.isKeyword("if")) {
      take();
      expectPunct("(");
      IfStmt node;
      node.test = parseExpression();
      expectPunct(")");
      node.consequent = parseStatement();
      if (peek().isKeyword("else")) {
        take();
        node.alternate = parseStatement();
      }
      return makeStmt(start, std::move(node));
    }
    if (start.isKeyword("while")) {
      take();
      expectPunct("(");
      WhileStmt node;
      node.test = parseExpression();
      expectPunct(")");
      node.body = parseStatement();
      return makeStmt(start, std::move(node));
    }
    if (start.isKeyword("for")) {
      return parseFor();
    }
    if (start.isKeyword("return")) {
      take();
      ReturnStmt node;
      if (!peek().isPunct(";")) {
        node.value = parseExpression();
      }
      expectPunct(";");
      return makeStmt(start, std::move(node));
    }
    if (start.isPunct("{")) {
      return parseBlock();
    }
    if (start.isPunct(";")) {
      // Stray semicolon: an empty block has the same meaning.
      take();
      return makeStmt(start, BlockStmt{});
    }
    ExprStmt node;
    node.expr = parseExpression();
    expectPunct(";");
    return makeStmt(start, std::move(node));
  }

  StmtPtr parseVarDecl() {
    const Token& start = take();
    VarDecl node;
    node.isConst = start.isKeyword("const");
    if (peek().kind != TokenKind::Identifier) {
      unexpected(peek(), "a variable name");
    }
    node.name = std::string(take().text);
    if (acceptPunct("=")) {
      node.init = parseAssignment();
    } else if (node.isConst) {
      unexpected(peek(), "'=' (const declarations need an initializer)");
    }
    if (peek().isPunct(",")) {
      failAt(peek(), "multiple declarators are not supported; declare one variable per statement");
    }
    return makeStmt(start, std::move(node));
  }

  StmtPtr parseBlock() {
    const Token& start = expectPunct("{");
    BlockStmt node;
    while (!peek().isPunct("}")) {
      if (peek().kind == TokenKind::EndOfInput) {
        unexpected(peek(), "'}'");
      }
      node.body.push_back(parseStatement());
    }
    take();
    return makeStmt(start, std::move(node));
  }

  StmtPtr parseFor() {
    const Token& start = take();
    expectPunct("(");
    ForStmt node;
    if (!peek().isPunct(";")) {
      const Token& initStart = peek();
      if (initStart.isKeyword("let") || initStart.isKeyword("const")) {
        node.init = parseVarDecl();
      } else {
        ExprStmt es;
        es.expr = parseExpression();
        node.init = makeStmt(initStart, std::move(es));
      }
    }
    if (peek().isKeyword("of") || peek().isKeyword("in")) {
      failAt(peek(), "for-" + std::string(peek().text) + " loops are not supported");
    }
    expectPunct(";");
    if (!peek().isPunct(";")) {
      node.test = parseExpression();
    }
    expectPunct(";");
    if (!peek().isPunct(")")) {
      node.update = parseExpression();
    }
    expectPunct(")");
    node.body = parseStatement();
    return makeStmt(start, std::move(node));
  }

  // ---- expressions ------------------------------------------------------

  ExprPtr parseExpression() {
    auto e = parseAssignment();
    if (peek().isPunct(",")) {
      failAt(peek(), "comma expressions are not supported");
    }
    return e;
  }

  static bool assignOpFor(const Token& t, AssignOp& op) {
    if (t.kind != TokenKind::Punct) return false;
    if (t.text == "=") op = AssignOp::Assign;
    else if (t.text == "+=") op = AssignOp::AddAssign;
    else if (t.text == "-=") op = AssignOp::SubAssign;
    else if (t.text == "*=") op = AssignOp::MulAssign;
    else if (t.text == "/=") op = AssignOp::DivAssign;
    else return false;
    return true;
  }

  ExprPtr parseAssignment() {
    Nest nest(*this);
    const Token& start = peek();
    if (isArrowHead()) {
      return parseArrow();
    }
    auto lhs = parseConditional();
    AssignOp op{};
    if (assignOpFor(peek(), op)) {
      const Token& opTok = take();
      bool assignable = std::holds_alternative<Identifier>(lhs->node) ||
                        std::holds_alternative<MemberExpr>(lhs->node) ||
                        std::holds_alternative<IndexExpr>(lhs->node);
      if (!assignable) {
        failAt(opTok, "invalid assignment target");
      }
      auto rhs = parseAssignment();
      return makeExpr(start, AssignExpr{op, std::move(lhs), std::move(rhs)});
    }
    return lhs;
  }

  // `x =>`, `() =>`, `(a, b) =>`. Scans ahead over identifiers and commas.
  bool isArrowHead() const {
    const Token& t0 = peek();
    if (t0.kind == TokenKind::Identifier) {
      return peek(1).isPunct("=>");
    }
    if (!t0.isPunct("(")) {
      return false;
    }
    std::size_t i = 1;
    if (peek(i).isPunct(")")) {
      return peek(i + 1).isPunct("=>");
    }
    while (true) {
      if (peek(i).kind != TokenKind::Identifier) {
        return false;
      }
      ++i;
      if (peek(i).isPunct(")")) {
        return peek(i + 1).isPunct("=>");
      }
      if (!peek(i).isPunct(",")) {
        return false;
      }
      ++i;
    }
  }

  ExprPtr parseArrow() {
    const Token& start = peek();
    ArrowFunction fn;
    if (start.kind == TokenKind::Identifier) {
      fn.params.emplace_back(take().text);
    } else {
      take();  // (
      while (!peek().isPunct(")")) {
        const Token& name = take();
        if (std::find(fn.params.begin(), fn.params.end(), name.text) != fn.params.end()) {
          failAt(name, "duplicate parameter name '" + std::string(name.text) + "'");
        }
        fn.params.emplace_back(name.text);
        acceptPunct(",");
      }
      take();  // )
    }
    expectPunct("=>");
    if (peek().isPunct("{")) {
      take();
      while (!peek().isPunct("}")) {
        if (peek().kind == TokenKind::EndOfInput) {
          unexpected(peek(), "'}'");
        }
        fn.blockBody.push_back(parseStatement());
      }
      take();
    } else {
      fn.exprBody = parseAssignment();
    }
    return makeExpr(start, std::move(fn));
  }

  ExprPtr parseConditional() {
    const Token& start = peek();
    auto test = parseBinary(0);
    if (!peek().isPunct("?")) {
      return test;
    }
    take();
    Nest nest(*this);
    auto consequent = parseAssignment();
    expectPunct(":");
    auto alternate = parseAssignment();
    return makeExpr(start,
                    ConditionalExpr{std::move(test), std::move(consequent), std::move(alternate)});
  }

  struct BinaryLevel {
    std::string_view text;
    BinaryOp op;
  };

  // Precedence climbing over levels 0 (||) .. 5 (* / %).
  static bool binaryOpAt(int level, const Token& t, BinaryOp& op) {
    if (t.kind != TokenKind::Punct) return false;
    const std::string_view s = t.text;
    switch (level) {
      case 0: if (s == "||") { op = BinaryOp::Or; return true; } return false;
      case 1: if (s == "&&") { op = BinaryOp::And; return true; } return false;
      case 2:
        if (s == "==" || s == "===") { op = BinaryOp::Eq; return true; }
        if (s == "!=" || s == "!==") { op = BinaryOp::Ne; return true; }
        return false;
      case 3:
        if (s == "<") { op = BinaryOp::Lt; return true; }
        if (s == "<=") { op = BinaryOp::Le; return true; }
        if (s == ">") { op = BinaryOp::Gt; return true; }
        if (s == ">=") { op = BinaryOp::Ge; return true; }
        return false;
      case 4:
        if (s == "+") { op = BinaryOp::Add; return true; }
        if (s == "-") { op = BinaryOp::Sub; return true; }
        return false;
      case 5:
        if (s == "*") { op = BinaryOp::Mul; return true; }
        if (s == "/") { op = BinaryOp::Div; return true; }
        if (s == "%") { op = BinaryOp::Mod; return true; }
        return false;
      default: return false;
    }
  }

  ExprPtr parseBinary(int level) {
    if (level > 5) {
      return parseUnary();
    }
    const Token& start = peek();
    auto lhs = parseBinary(level + 1);
    BinaryOp op{};
    while (binaryOpAt(level, peek(), op)) {
      take();
      auto rhs = parseBinary(level + 1);
      lhs = makeExpr(start, BinaryExpr{op, std::move(lhs), std::move(rhs)});
    }
    return lhs;
  }

  ExprPtr parseUnary() {
    const Token& start = peek();
    if (start.isPunct("-") || start.isPunct("!")) {
      Nest nest(*this);
      take();
      auto operand = parseUnary();
      return makeExpr(start, UnaryExpr{start.text == "-" ? UnaryOp::Negate : UnaryOp::Not,
                                       std::move(operand)});
    }
    if (start.isPunct("+")) {
      failAt(start, "unary '+' is not supported");
    }
    return parsePostfix();
  }

  ExprPtr parsePostfix() {
    const Token& start = peek();
    auto expr = parsePrimary();
    while (true) {
      if (peek().isPunct(".")) {
        take();
        const Token& name = peek();
        if (name.kind != TokenKind::Identifier && name.kind != TokenKind::Keyword) {
          unexpected(name, "a property name");
        }
        take();
        expr = makeExpr(start, MemberExpr{std::move(expr), std::string(name.text)});
      } else if (peek().isPunct("[")) {
        take();
        Nest nest(*this);
        auto index = parseExpression();
        expectPunct("]");
        expr = makeExpr(start, IndexExpr{std::move(expr), std::move(index)});
      } else if (peek().isPunct("(")) {
        take();
        Nest nest(*this);
        CallExpr call;
        call.callee = std::move(expr);
        while (!peek().isPunct(")")) {
          call.args.push_back(parseAssignment());
          if (!acceptPunct(",")) {
            break;
          }
        }
        expectPunct(")");
        expr = makeExpr(start, std::move(call));
      } else if (peek().isPunct("++") || peek().isPunct("--")) {
        unexpected(peek(), "");
      } else {
        return expr;
      }
    }
  }

  ExprPtr parsePrimary() {
    const Token& t = peek();
    switch (t.kind) {
      case TokenKind::Number: {
        take();
        std::string buf(t.text);
        if (!buf.empty() && buf.back() == '.') {
          buf.pop_back();
        }
        double v = 0;
        std::from_chars(buf.data(), buf.data() + buf.size(), v);
        return makeExpr(t, NumberLit{v});
      }
      case TokenKind::String:
        take();
        return makeExpr(t, StringLit{decodeStringLiteral(t.text)});
      case TokenKind::Identifier:
        take();
        return makeExpr(t, Identifier{std::string(t.text)});
      case TokenKind::Keyword:
        if (t.text == "true" || t.text == "false") {
          take();
          return makeExpr(t, BoolLit{t.text == "true"});
        }
        if (t.text == "null" || t.text == "undefined") {
          take();
          return makeExpr(t, NullLit{});
        }
        unexpected(t, "an expression");
      case TokenKind::Punct:
        if (t.isPunct("(")) {
          take();
          Nest nest(*this);
          auto inner = parseExpression();
          expectPunct(")");
          return inner;
        }
        if (t.isPunct("[")) {
          return parseArrayLiteral();
        }
        if (t.isPunct("{")) {
          return parseObjectLiteral();
        }
        unexpected(t, "an expression");
      case TokenKind::EndOfInput:
        unexpected(t, "an expression");
    }
    unexpected(t, "an expression");
  }

  ExprPtr parseArrayLiteral() {
    const Token& start = take();
    Nest nest(*this);
    ArrayLit node;
    while (!peek().isPunct("]")) {
      node.elements.push_back(parseAssignment());
      if (!acceptPunct(",")) {
        break;
      }
    }
    expectPunct("]");
    return makeExpr(start, std::move(node));
  }

  ExprPtr parseObjectLiteral() {
    const Token& start = take();
    Nest nest(*this);
    ObjectLit node;
    while (!peek().isPunct("}")) {
      const Token& key = peek();
      std::string name;
      if (key.kind == TokenKind::Identifier || key.kind == TokenKind::Keyword) {
        name = std::string(key.text);
      } else if (key.kind == TokenKind::String) {
        name = decodeStringLiteral(key.text);
      } else if (key.kind == TokenKind::Number) {
        name = std::string(key.text);
      } else {
        unexpected(key, "a property name");
      }
      take();
      expectPunct(":");
      auto value = parseAssignment();
      auto dup = std::find_if(node.properties.begin(), node.properties.end(),
                              [&](const auto& p) { return p.first == name; });
      if (dup != node.properties.end()) {
        failAt(key, "duplicate property '" + name + "'");
      }
      node.properties.emplace_back(std::move(name), std::move(value));
      if (!acceptPunct(",")) {
        break;
      }
    }
    expectPunct("}");
    return makeExpr(start, std::move(node));
  }

  std::string_view src_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  std::uint32_t depth_ = 0;
};

}  // namespace

std::shared_ptr<const Program> parse(std::string_view source) {
  auto program = std::make_shared<Program>();
  program->source = std::string(source);
  Parser parser(program->source);
  program->statements = parser.parseProgram();
  program->sourceHash = sha256Hex(program->source);
  return program;
}

}  // namespace magicitem::dsl
