#include <string>

#include "magicitem/common/digest.hpp"
#include "magicitem/common/format.hpp"
#include "magicitem/dsl/parser.hpp"

namespace magicitem::dsl {

std::string_view toString(UnaryOp op) {
  switch (op) {
    case UnaryOp::Negate: return "-";
    case UnaryOp::Not: return "!";
  }
  return "?";
}

std::string_view toString(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Mod: return "%";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::And: return "&&";
    case BinaryOp::Or: return "||";
  }
  return "?";
}

std::string_view toString(AssignOp op) {
  switch (op) {
    case AssignOp::Assign: return "=";
    case AssignOp::AddAssign: return "+=";
    case AssignOp::SubAssign: return "-=";
    case AssignOp::MulAssign: return "*=";
    case AssignOp::DivAssign: return "/=";
  }
  return "?";
}

namespace {

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Binding strength, loosest first.
enum Prec : int {
  kAssign = 1,
  kConditional,
  kOr,
  kAnd,
  kEquality,
  kRelational,
  kAdditive,
  kMultiplicative,
  kUnary,
  kPostfix,
  kPrimary,
};

int precOf(BinaryOp op) {
  switch (op) {
    case BinaryOp::Or: return kOr;
    case BinaryOp::And: return kAnd;
    case BinaryOp::Eq:
    case BinaryOp::Ne: return kEquality;
    case BinaryOp::Lt:
    case BinaryOp::Le:
    case BinaryOp::Gt:
    case BinaryOp::Ge: return kRelational;
    case BinaryOp::Add:
    case BinaryOp::Sub: return kAdditive;
    default: return kMultiplicative;
  }
}

int precOf(const Expr& e) {
  return std::visit(Overloaded{
                        [](const AssignExpr&) { return int{kAssign}; },
                        [](const ArrowFunction&) { return int{kAssign}; },
                        [](const ConditionalExpr&) { return int{kConditional}; },
                        [](const BinaryExpr& b) { return precOf(b.op); },
                        [](const UnaryExpr&) { return int{kUnary}; },
                        [](const MemberExpr&) { return int{kPostfix}; },
                        [](const IndexExpr&) { return int{kPostfix}; },
                        [](const CallExpr&) { return int{kPostfix}; },
                        [](const auto&) { return int{kPrimary}; },
                    },
                    e.node);
}

bool isIdentifierName(const std::string& s) {
  if (s.empty()) return false;
  auto start = [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '$';
  };
  if (!start(s[0])) return false;
  for (char c : s) {
    if (!start(c) && !(c >= '0' && c <= '9')) return false;
  }
  return true;
}

class Printer {
 public:
  std::string out;

  void program(const Program& p) {
    for (const auto& s : p.statements) {
      stmt(*s, 0);
    }
  }

  void stmt(const Stmt& s, int indent) {
    pad(indent);
    stmtInline(s, indent);
    out += '\n';
  }

  std::string expr(const Expr& e, int minPrec, int indent) {
    std::string text = exprText(e, indent);
    if (precOf(e) < minPrec) {
      return "(" + text + ")";
    }
    return text;
  }

 private:
  void pad(int indent) { out.append(static_cast<std::size_t>(indent) * 2, ' '); }

  // Prints a statement starting at the current column, without the newline.
  void stmtInline(const Stmt& s, int indent) {
    std::visit(Overloaded{
                   [&](const VarDecl& n) {
                     out += n.isConst ? "const " : "let ";
                     out += n.name;
                     if (n.init) {
                       out += " = " + expr(*n.init, kAssign, indent);
                     }
                     out += ';';
                   },
                   [&](const ExprStmt& n) {
                     std::string text = expr(*n.expr, kAssign, indent);
                     if (!text.empty() && text[0] == '{') {
                       text = "(" + text + ")";
                     }
                     out += text + ';';
                   },
                   [&](const IfStmt& n) {
                     out += "if (" + expr(*n.test, kAssign, indent) + ") ";
                     body(*n.consequent, indent);
                     if (n.alternate) {
                       out += std::holds_alternative<BlockStmt>(n.consequent->node) ? " else "
                                                                                    : "\n";
                       if (!std::holds_alternative<BlockStmt>(n.consequent->node)) {
                         pad(indent);
                         out += "else ";
                       }
                       if (std::holds_alternative<IfStmt>(n.alternate->node)) {
                         stmtInline(*n.alternate, indent);  // else-if chain
                       } else {
                         body(*n.alternate, indent);
                       }
                     }
                   },
                   [&](const WhileStmt& n) {
                     out += "while (" + expr(*n.test, kAssign, indent) + ") ";
                     body(*n.body, indent);
                   },
                   [&](const ForStmt& n) {
                     out += "for (";
                     if (n.init) {
                       stmtInline(*n.init, indent);  // emits its own ';'
                     } else {
                       out += ';';
                     }
                     if (n.test) {
                       out += ' ' + expr(*n.test, kAssign, indent);
                     }
                     out += ';';
                     if (n.update) {
                       out += ' ' + expr(*n.update, kAssign, indent);
                     }
                     out += ") ";
                     body(*n.body, indent);
                   },
                   [&](const BlockStmt& n) { block(n.body, indent); },
                   [&](const ReturnStmt& n) {
                     out += "return";
                     if (n.value) {
                       out += ' ' + expr(*n.value, kAssign, indent);
                     }
                     out += ';';
                   },
               },
               s.node);
  }

  // Body of a compound statement. Blocks stay on the header line.
  void body(const Stmt& s, int indent) {
    if (std::holds_alternative<BlockStmt>(s.node)) {
      stmtInline(s, indent);
      return;
    }
    out += '\n';
    pad(indent + 1);
    stmtInline(s, indent + 1);
  }

  void block(const std::vector<StmtPtr>& body, int indent) {
    if (body.empty()) {
      out += "{}";
      return;
    }
    out += "{\n";
    for (const auto& s : body) {
      stmt(*s, indent + 1);
    }
    pad(indent);
    out += '}';
  }

  std::string exprText(const Expr& e, int indent) {
    return std::visit(
        Overloaded{
            [&](const NumberLit& n) { return formatNumber(n.value); },
            [&](const StringLit& n) { return quoteJson(n.value); },
            [&](const BoolLit& n) { return std::string(n.value ? "true" : "false"); },
            [&](const NullLit&) { return std::string("null"); },
            [&](const ArrayLit& n) {
              std::string s = "[";
              for (std::size_t i = 0; i < n.elements.size(); ++i) {
                if (i) s += ", ";
                s += expr(*n.elements[i], kAssign, indent);
              }
              return s + "]";
            },
            [&](const ObjectLit& n) {
              if (n.properties.empty()) return std::string("{}");
              std::string s = "{ ";
              for (std::size_t i = 0; i < n.properties.size(); ++i) {
                if (i) s += ", ";
                const auto& [key, value] = n.properties[i];
                s += isIdentifierName(key) ? key : quoteJson(key);
                s += ": " + expr(*value, kAssign, indent);
              }
              return s + " }";
            },
            [&](const Identifier& n) { return n.name; },
            [&](const MemberExpr& n) {
              std::string obj = expr(*n.object, kPostfix, indent);
              if (std::holds_alternative<NumberLit>(n.object->node)) {
                obj = "(" + obj + ")";
              }
              return obj + "." + n.property;
            },
            [&](const IndexExpr& n) {
              return expr(*n.object, kPostfix, indent) + "[" + expr(*n.index, kAssign, indent) +
                     "]";
            },
            [&](const CallExpr& n) {
              std::string s = expr(*n.callee, kPostfix, indent) + "(";
              for (std::size_t i = 0; i < n.args.size(); ++i) {
                if (i) s += ", ";
                s += expr(*n.args[i], kAssign, indent);
              }
              return s + ")";
            },
            [&](const UnaryExpr& n) {
              std::string operand = expr(*n.operand, kUnary, indent);
              std::string op(toString(n.op));
              if (n.op == UnaryOp::Negate && !operand.empty() && operand[0] == '-') {
                op += ' ';
              }
              return op + operand;
            },
            [&](const BinaryExpr& n) {
              int p = precOf(n.op);
              return expr(*n.lhs, p, indent) + " " + std::string(toString(n.op)) + " " +
                     expr(*n.rhs, p + 1, indent);
            },
            [&](const AssignExpr& n) {
              return expr(*n.target, kPostfix, indent) + " " + std::string(toString(n.op)) + " " +
                     expr(*n.value, kAssign, indent);
            },
            [&](const ConditionalExpr& n) {
              return expr(*n.test, kOr, indent) + " ? " + expr(*n.consequent, kAssign, indent) +
                     " : " + expr(*n.alternate, kAssign, indent);
            },
            [&](const ArrowFunction& n) {
              std::string s;
              if (n.params.size() == 1) {
                s = n.params[0];
              } else {
                s = "(";
                for (std::size_t i = 0; i < n.params.size(); ++i) {
                  if (i) s += ", ";
                  s += n.params[i];
                }
                s += ")";
              }
              s += " => ";
              if (n.exprBody) {
                std::string b = expr(*n.exprBody, kAssign, indent);
                if (!b.empty() && b[0] == '{') {
                  b = "(" + b + ")";
                }
                return s + b;
              }
              Printer inner;
              inner.block(n.blockBody, indent);
              return s + inner.out;
            },
        },
        e.node);
  }
};

class Dumper {
 public:
  std::string out;

  void stmt(const Stmt& s) {
    std::visit(Overloaded{
                   [&](const VarDecl& n) {
                     out += n.isConst ? "(const " : "(let ";
                     out += n.name;
                     if (n.init) {
                       out += ' ';
                       expr(*n.init);
                     }
                     out += ')';
                   },
                   [&](const ExprStmt& n) {
                     out += "(expr ";
                     expr(*n.expr);
                     out += ')';
                   },
                   [&](const IfStmt& n) {
                     out += "(if ";
                     expr(*n.test);
                     out += ' ';
                     stmt(*n.consequent);
                     if (n.alternate) {
                       out += ' ';
                       stmt(*n.alternate);
                     }
                     out += ')';
                   },
                   [&](const WhileStmt& n) {
                     out += "(while ";
                     expr(*n.test);
                     out += ' ';
                     stmt(*n.body);
                     out += ')';
                   },
                   [&](const ForStmt& n) {
                     out += "(for ";
                     if (n.init) stmt(*n.init); else out += '_';
                     out += ' ';
                     if (n.test) expr(*n.test); else out += '_';
                     out += ' ';
                     if (n.update) expr(*n.update); else out += '_';
                     out += ' ';
                     stmt(*n.body);
                     out += ')';
                   },
                   [&](const BlockStmt& n) {
                     out += "(block";
                     for (const auto& st : n.body) {
                       out += ' ';
                       stmt(*st);
                     }
                     out += ')';
                   },
                   [&](const ReturnStmt& n) {
                     out += "(return";
                     if (n.value) {
                       out += ' ';
                       expr(*n.value);
                     }
                     out += ')';
                   },
               },
               s.node);
  }

  void expr(const Expr& e) {
    std::visit(Overloaded{
                   [&](const NumberLit& n) { out += "(num " + formatNumber(n.value) + ")"; },
                   [&](const StringLit& n) { out += "(str " + quoteJson(n.value) + ")"; },
                   [&](const BoolLit& n) { out += n.value ? "(true)" : "(false)"; },
                   [&](const NullLit&) { out += "(null)"; },
                   [&](const ArrayLit& n) {
                     out += "(array";
                     for (const auto& el : n.elements) {
                       out += ' ';
                       expr(*el);
                     }
                     out += ')';
                   },
                   [&](const ObjectLit& n) {
                     out += "(object";
                     for (const auto& [k, v] : n.properties) {
                       out += " " + quoteJson(k) + " ";
                       expr(*v);
                     }
                     out += ')';
                   },
                   [&](const Identifier& n) { out += "(id " + n.name + ")"; },
                   [&](const MemberExpr& n) {
                     out += "(member ";
                     expr(*n.object);
                     out += " " + n.property + ")";
                   },
                   [&](const IndexExpr& n) {
                     out += "(index ";
                     expr(*n.object);
                     out += ' ';
                     expr(*n.index);
                     out += ')';
                   },
                   [&](const CallExpr& n) {
                     out += "(call ";
                     expr(*n.callee);
                     for (const auto& a : n.args) {
                       out += ' ';
                       expr(*a);
                     }
                     out += ')';
                   },
                   [&](const UnaryExpr& n) {
                     out += "(unary " + std::string(toString(n.op)) + " ";
                     expr(*n.operand);
                     out += ')';
                   },
                   [&](const BinaryExpr& n) {
                     out += "(binary " + std::string(toString(n.op)) + " ";
                     expr(*n.lhs);
                     out += ' ';
                     expr(*n.rhs);
                     out += ')';
                   },
                   [&](const AssignExpr& n) {
                     out += "(assign " + std::string(toString(n.op)) + " ";
                     expr(*n.target);
                     out += ' ';
                     expr(*n.value);
                     out += ')';
                   },
                   [&](const ConditionalExpr& n) {
                     out += "(cond ";
                     expr(*n.test);
                     out += ' ';
                     expr(*n.consequent);
                     out += ' ';
                     expr(*n.alternate);
                     out += ')';
                   },
                   [&](const ArrowFunction& n) {
                     out += "(arrow (";
                     for (std::size_t i = 0; i < n.params.size(); ++i) {
                       if (i) out += ' ';
                       out += n.params[i];
                     }
                     out += ") ";
                     if (n.exprBody) {
                       expr(*n.exprBody);
                     } else {
                       out += "(block";
                       for (const auto& st : n.blockBody) {
                         out += ' ';
                         stmt(*st);
                       }
                       out += ')';
                     }
                     out += ')';
                   },
               },
               e.node);
  }
};

}  // namespace

std::string print(const Program& program) {
  Printer p;
  p.program(program);
  return p.out;
}

std::string print(const Expr& expr) {
  Printer p;
  return p.expr(expr, kAssign, 0);
}

std::string dumpTree(const Program& program) {
  Dumper d;
  d.out = "(program";
  for (const auto& s : program.statements) {
    d.out += ' ';
    d.stmt(*s);
  }
  d.out += ')';
  return d.out;
}

std::string structuralHash(const Program& program) { return sha256Hex(dumpTree(program)); }

bool structurallyEqual(const Program& a, const Program& b) { return dumpTree(a) == dumpTree(b); }

}  // namespace magicitem::dsl
