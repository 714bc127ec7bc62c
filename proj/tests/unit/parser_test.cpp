#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <string>
#include <vector>

#include "magicitem/dsl/parser.hpp"

using namespace magicitem::dsl;

namespace {

const std::vector<std::string>& corpus() {
  static const std::vector<std::string> scripts = {
      "$.onUpdate(dt => { });",
      "$.onUpdate(dt => { let p = $.getPosition(); p.y += 1 * dt; $.setPosition(p); });",
      "$.onInteract(p => p.setJumpSpeedRate(3));",
      "$.onStart(() => { $.state.t = 0; });\n"
      "$.onUpdate(dt => {\n"
      "  $.state.t += dt;\n"
      "  const r = $.getRotation();\n"
      "  r.y = ($.state.t * 90) % 360;\n"
      "  $.setRotation(r);\n"
      "});",
      "let speeds = [1, 2, 3];\nlet cfg = { rate: 0.165, \"on\": true, nothing: null };\n"
      "if (cfg.on && speeds[1] >= 2) { $.log(\"ok\"); } else if (!cfg.on) { $.log(1); } else "
      "$.log(2);",
      "for (let i = 0; i < 3; i += 1) { $.log(i); }\nfor (;;) { return; }",
      "while (false) $.log(0);\nlet f = (a, b) => { return a > b ? a : b; };\nlet g = x => ({ v: x "
      "});",
      "let x = -(-1); let y = - -2; let z = !(1 == 2) != true;",
      "let a = 1 - (2 - 3); let b = (1 - 2) - 3; let c = 2 * (3 + 4) % 5;",
      "let o = {}; o.k = o.k || 5; o[\"m\"] = [[], {}]; let q = (1).x;",
      "$.onGrab(p => { $.setGravityScale(0.165); });\n$.onRelease(p => $.setGravityScale(1));",
      "let v = Vector3(0, 5, 0).add(Vector3(1, 0, 0)).scale(2); $.setPosition(v);",
      "if (a) if (b) x = 1; else x = 2;",
      "let n = 1e21 + 5e-324 + 0.1 + 123456789012;",
  };
  return scripts;
}

const Expr& onlyExpr(const Program& p) {
  EXPECT_EQ(p.statements.size(), 1u);
  return *std::get<ExprStmt>(p.statements.at(0)->node).expr;
}

}  // namespace

TEST(Parser, CallbackRegistration) {
  auto p = parse("$.onUpdate(dt => { });");
  const auto& call = std::get<CallExpr>(onlyExpr(*p).node);
  const auto& member = std::get<MemberExpr>(call.callee->node);
  EXPECT_EQ(member.property, "onUpdate");
  EXPECT_EQ(std::get<Identifier>(member.object->node).name, "$");
  ASSERT_EQ(call.args.size(), 1u);
  const auto& fn = std::get<ArrowFunction>(call.args[0]->node);
  EXPECT_EQ(fn.params, std::vector<std::string>{"dt"});
  EXPECT_EQ(fn.exprBody, nullptr);
  EXPECT_TRUE(fn.blockBody.empty());
}

TEST(Parser, PrecedenceIdentity) {
  auto p = parse("1 + 2 * 3;");
  EXPECT_EQ(dumpTree(*p),
            "(program (expr (binary + (num 1) (binary * (num 2) (num 3)))))");
}

TEST(Parser, ConventionalPrecedenceLadder) {
  auto p = parse("a = b ? c || d && e == f < g + h * -i.j() : k;");
  EXPECT_EQ(dumpTree(*p),
            "(program (expr (assign = (id a) (cond (id b) (binary || (id c) (binary && (id d) "
            "(binary == (id e) (binary < (id f) (binary + (id g) (binary * (id h) (unary - (call "
            "(member (id i) j))))))))) (id k)))))");
  EXPECT_EQ(dumpTree(*parse("a = b = 1;")),
            "(program (expr (assign = (id a) (assign = (id b) (num 1)))))");
  EXPECT_EQ(dumpTree(*parse("1 - 2 - 3;")),
            "(program (expr (binary - (binary - (num 1) (num 2)) (num 3))))");
}

TEST(Parser, NewIsNotInTheGrammar) {
  try {
    parse("let v = new Thing();");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_EQ(e.column(), 9u);
    EXPECT_NE(e.message().find("new"), std::string::npos);
  }
}

TEST(Parser, ExcludedConstructs) {
  for (const char* src : {"class A {}", "let t = this;", "try { } catch (e) { }", "throw 1;",
                          "async () => 1;", "let f = function () {};", "i++;", "var x = 1;",
                          "let a = [...b];", "let a = 1 & 2;", "let a = 1, b = 2;",
                          "for (const x of xs) {}", "let a = +1;", "let x = 1", "x = 1"}) {
    EXPECT_THROW(parse(src), ParseError) << src;
  }
}

TEST(Parser, ArrowFunctionForms) {
  EXPECT_EQ(dumpTree(*parse("let f = () => 1;")), "(program (let f (arrow () (num 1))))");
  EXPECT_EQ(dumpTree(*parse("let f = (a, b) => a;")), "(program (let f (arrow (a b) (id a))))");
  EXPECT_EQ(dumpTree(*parse("let f = (a) => { return a; };")),
            "(program (let f (arrow (a) (block (return (id a))))))");
  EXPECT_EQ(dumpTree(*parse("let f = (a);")), "(program (let f (id a)))");
  EXPECT_THROW(parse("let f = (a, a) => 1;"), ParseError);
}

TEST(Parser, EveryNodeCarriesSpan) {
  auto p = parse("let a = 1;\n  $.log(a + 2);");
  const auto& stmt = *p->statements.at(1);
  EXPECT_EQ(stmt.span.line, 2u);
  EXPECT_EQ(stmt.span.column, 3u);
  const auto& e = *std::get<ExprStmt>(stmt.node).expr;
  EXPECT_EQ(p->source.substr(e.span.offset, e.span.length), "$.log(a + 2)");
}

TEST(Parser, RoundTripThroughPrinter) {
  for (const auto& src : corpus()) {
    auto first = parse(src);
    std::string printed = print(*first);
    std::shared_ptr<const Program> second;
    ASSERT_NO_THROW(second = parse(printed)) << printed;
    EXPECT_TRUE(structurallyEqual(*first, *second)) << src << "\n---\n" << printed;
    // Printing is a fixed point after one pass.
    EXPECT_EQ(print(*second), printed);
  }
}

TEST(Parser, PureAndDeterministic) {
  for (const auto& src : corpus()) {
    EXPECT_EQ(structuralHash(*parse(src)), structuralHash(*parse(src)));
    EXPECT_EQ(parse(src)->sourceHash, parse(src)->sourceHash);
  }
}

TEST(Parser, ErrorAtEndOfInputAddressesRealByte) {
  const std::string src = "let x = (1 + 2";
  try {
    parse(src);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
    EXPECT_EQ(e.column(), src.size());
  }
}

TEST(Parser, DeepNestingIsRejectedNotCrashing) {
  std::string deep(5000, '(');
  deep += "1";
  deep += std::string(5000, ')');
  deep += ';';
  EXPECT_THROW(parse(deep), ParseError);

  std::string chain = "let a = 1";
  for (int i = 0; i < 3000; ++i) chain += " + 1";
  chain += ';';
  EXPECT_THROW(parse(chain), ParseError);

  std::string members = "a";
  for (int i = 0; i < 3000; ++i) members += ".b";
  members += ';';
  EXPECT_THROW(parse(members), ParseError);
}

// Property: arbitrary byte strings either parse or raise ParseError with a
// position inside the input, and never hang.
TEST(Parser, FuzzArbitraryBytes) {
  std::mt19937_64 rng(1234);
  const std::string alphabet = "abc$xyz019 .,;:(){}[]=+-*/%!<>&|?\"'\n\t_\\/#`@";
  const std::vector<std::string> words = {"let ", "const ", "if", "else", "while", "for",
                                          "return", "=>", "$.onUpdate", "Vector3", "(", ")",
                                          "{", "}", "new ", "true", "null"};
  auto start = std::chrono::steady_clock::now();
  for (int iter = 0; iter < 3000; ++iter) {
    std::string src;
    std::size_t len = rng() % 200;
    for (std::size_t i = 0; i < len; ++i) {
      auto r = rng() % 10;
      if (r < 2) {
        src += words[rng() % words.size()];
      } else if (r < 3) {
        src += static_cast<char>(rng() % 256);
      } else {
        src += alphabet[rng() % alphabet.size()];
      }
    }
    try {
      auto p = parse(src);
      auto again = parse(print(*p));
      EXPECT_TRUE(structurallyEqual(*p, *again)) << src;
    } catch (const ParseError& e) {
      ASSERT_FALSE(src.empty());
      std::uint32_t lines = 1;
      for (char c : src) lines += c == '\n';
      EXPECT_GE(e.line(), 1u);
      EXPECT_LE(e.line(), lines);
      EXPECT_FALSE(e.message().empty());
    }
  }
  auto elapsed = std::chrono::steady_clock::now() - start;
  EXPECT_LT(std::chrono::duration_cast<std::chrono::seconds>(elapsed).count(), 20);
}

TEST(Parser, FullSizeInputParsesInBoundedTime) {
  std::string src;
  while (src.size() + 32 < kMaxScriptBytes) {
    src += "$.log(1 + 2 * (3 - 4));\n";
  }
  auto start = std::chrono::steady_clock::now();
  auto p = parse(src);
  auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start)
                .count();
  EXPECT_GT(p->statements.size(), 2000u);
  EXPECT_LT(ms, 2000);
}
