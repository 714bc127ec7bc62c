#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace magicitem::dsl {

struct Span {
  std::uint32_t offset = 0;
  std::uint32_t length = 0;
  std::uint32_t line = 1;
  std::uint32_t column = 1;
};

struct Expr;
struct Stmt;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;

enum class UnaryOp : std::uint8_t { Negate, Not };
enum class BinaryOp : std::uint8_t {
  Add, Sub, Mul, Div, Mod,
  Eq, Ne, Lt, Le, Gt, Ge,
  And, Or,
};
enum class AssignOp : std::uint8_t { Assign, AddAssign, SubAssign, MulAssign, DivAssign };

std::string_view toString(UnaryOp op);
std::string_view toString(BinaryOp op);
std::string_view toString(AssignOp op);

struct NumberLit { double value = 0; };
struct StringLit { std::string value; };
struct BoolLit { bool value = false; };
struct NullLit {};
struct ArrayLit { std::vector<ExprPtr> elements; };
struct ObjectLit { std::vector<std::pair<std::string, ExprPtr>> properties; };
struct Identifier { std::string name; };
struct MemberExpr { ExprPtr object; std::string property; };
struct IndexExpr { ExprPtr object; ExprPtr index; };
struct CallExpr { ExprPtr callee; std::vector<ExprPtr> args; };
struct UnaryExpr { UnaryOp op; ExprPtr operand; };
struct BinaryExpr { BinaryOp op; ExprPtr lhs; ExprPtr rhs; };
struct AssignExpr { AssignOp op; ExprPtr target; ExprPtr value; };
struct ConditionalExpr { ExprPtr test; ExprPtr consequent; ExprPtr alternate; };
struct ArrowFunction {
  std::vector<std::string> params;
  ExprPtr exprBody;                // set for `x => expr`
  std::vector<StmtPtr> blockBody;  // used when exprBody is null
};

struct Expr {
  Span span;
  std::uint32_t height = 1;  // longest path to a leaf, counting this node
  std::variant<NumberLit, StringLit, BoolLit, NullLit, ArrayLit, ObjectLit, Identifier, MemberExpr,
               IndexExpr, CallExpr, UnaryExpr, BinaryExpr, AssignExpr, ConditionalExpr,
               ArrowFunction>
      node;
};

struct VarDecl { bool isConst = false; std::string name; ExprPtr init; };
struct ExprStmt { ExprPtr expr; };
struct IfStmt { ExprPtr test; StmtPtr consequent; StmtPtr alternate; };
struct WhileStmt { ExprPtr test; StmtPtr body; };
struct ForStmt { StmtPtr init; ExprPtr test; ExprPtr update; StmtPtr body; };
struct BlockStmt { std::vector<StmtPtr> body; };
struct ReturnStmt { ExprPtr value; };

struct Stmt {
  Span span;
  std::uint32_t height = 1;
  std::variant<VarDecl, ExprStmt, IfStmt, WhileStmt, ForStmt, BlockStmt, ReturnStmt> node;
};

/// A parsed script. Owns its source text so spans and closures stay valid for
/// the lifetime of any instance built from it.
struct Program {
  std::string source;
  std::string sourceHash;  // sha256 of source
  std::vector<StmtPtr> statements;
};

}  // namespace magicitem::dsl
