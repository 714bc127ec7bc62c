#include <gtest/gtest.h>

#include <random>
#include <string>

#include "magicitem/dsl/parser.hpp"
#include "magicitem/runtime/catalog.hpp"
#include "magicitem/runtime/instance.hpp"
#include "magicitem/runtime/state_codec.hpp"
#include "magicitem/runtime/value.hpp"

using namespace magicitem;
using namespace magicitem::runtime;

namespace {

WorldView baseView() {
  WorldView v;
  v.itemId = 1;
  v.players[0] = PlayerView{};
  v.rngState = 42;
  return v;
}

std::unique_ptr<ScriptInstance> install(const std::string& src, const WorldView& view = baseView()) {
  auto r = instantiate(dsl::parse(src), BudgetConfig{}, view);
  EXPECT_FALSE(r.error) << (r.error ? r.error->consoleLine() : "");
  return std::move(r.instance);
}

DispatchResult update(ScriptInstance& inst, const WorldView& view = baseView()) {
  return dispatch(inst, Event{EventKind::Update, 1.0 / 60.0, 0}, view);
}

DispatchResult interact(ScriptInstance& inst, const WorldView& view = baseView()) {
  return dispatch(inst, Event{EventKind::Interact, 0, 0}, view);
}

std::vector<std::string> described(const std::vector<Effect>& effects) {
  std::vector<std::string> out;
  for (const auto& e : effects) out.push_back(describe(e));
  return out;
}

}  // namespace

TEST(Runtime, EmptyProgramHasNoCallbacksOrEffects) {
  auto r = instantiate(dsl::parse(""), BudgetConfig{}, baseView());
  ASSERT_TRUE(r.instance);
  EXPECT_EQ(r.instance->callbackCount(), 0u);
  EXPECT_TRUE(r.effects.empty());
  EXPECT_EQ(r.instance->stateBlob(), "{}");
}

TEST(Runtime, ReplacedCallbackWarns) {
  auto r = instantiate(dsl::parse("$.onUpdate(dt => {}); $.onUpdate(dt => {});"), BudgetConfig{},
                       baseView());
  ASSERT_TRUE(r.instance);
  EXPECT_EQ(r.instance->callbackCount(), 1u);
  EXPECT_EQ(r.instance->replacedCallbacks(), 1u);
  ASSERT_EQ(r.console.size(), 1u);
  EXPECT_NE(r.console[0].find("callback replaced"), std::string::npos);
}

TEST(Runtime, UnsupportedApiAtTopLevel) {
  auto r = instantiate(dsl::parse("$.setPostProcessing(1);"), BudgetConfig{}, baseView());
  EXPECT_FALSE(r.instance);
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.error->errorClass(), ErrorClass::UnsupportedApi);
  EXPECT_EQ(r.error->memberPath(), "$.setPostProcessing");
  EXPECT_NE(r.error->message().find("$.setPostProcessing"), std::string::npos);
  EXPECT_EQ(r.error->span().line, 1u);
}

TEST(Runtime, UpdateMovesItemByDt) {
  auto inst = install(
      "$.onUpdate(dt => { let p=$.getPosition(); p.y += 1*dt; $.setPosition(p); });");
  auto r = update(*inst);
  ASSERT_FALSE(r.error);
  ASSERT_EQ(r.effects.size(), 1u);
  const auto& e = std::get<SetItemPosition>(r.effects[0]);
  EXPECT_NEAR(e.value.x, 0, 1e-12);
  EXPECT_NEAR(e.value.y, 1.0 / 60.0, 1e-12);
  EXPECT_NEAR(e.value.z, 0, 1e-12);
}

TEST(Runtime, InfiniteLoopHitsBudget) {
  auto inst = install("$.onUpdate(dt => { $.log(1); while (true) {} });");
  auto r = update(*inst);
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.error->errorClass(), ErrorClass::BudgetExceeded);
  EXPECT_TRUE(r.effects.empty());
  // The instance stays usable.
  auto again = update(*inst);
  EXPECT_EQ(again.error->errorClass(), ErrorClass::BudgetExceeded);
  EXPECT_TRUE(inst->hasCallback(EventKind::Update));
}

TEST(Runtime, JumpSpeedRateOnInteract) {
  auto inst = install("$.onInteract(p => { p.setJumpSpeedRate(3); });");
  auto r = interact(*inst);
  ASSERT_FALSE(r.error);
  EXPECT_EQ(described(r.effects), std::vector<std::string>{"SetPlayerJumpSpeedRate(0, 3)"});
}

TEST(Runtime, RecursionDepthLimited) {
  auto inst = install("const f = n => f(n + 1); $.onUpdate(dt => { f(0); });");
  auto r = update(*inst);
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.error->errorClass(), ErrorClass::BudgetExceeded);

  auto ok = install(
      "const fib = n => n < 2 ? n : fib(n - 1) + fib(n - 2);"
      "$.onUpdate(dt => { $.log(fib(15)); });");
  auto r2 = update(*ok);
  ASSERT_FALSE(r2.error) << r2.error->consoleLine();
  EXPECT_EQ(r2.console, std::vector<std::string>{"610"});
}

TEST(Runtime, TypeRules) {
  struct Case {
    const char* body;
    ErrorClass cls;
  };
  for (const auto& c : std::vector<Case>{
           {"let a = 1 + \"x\";", ErrorClass::TypeMismatch},
           {"let a = null * 2;", ErrorClass::TypeMismatch},
           {"let a = -\"s\";", ErrorClass::TypeMismatch},
           {"const a = 1; a = 2;", ErrorClass::TypeMismatch},
           {"let a = 1; let a = 2;", ErrorClass::TypeMismatch},
           {"let a = null; a.b;", ErrorClass::TypeMismatch},
           {"let a = 3; a();", ErrorClass::TypeMismatch},
           {"$.setPosition(1);", ErrorClass::TypeMismatch},
           {"$.setPosition(Vector3(1 / 0, 0, 0));", ErrorClass::TypeMismatch},
           {"$.setUseGravity(1);", ErrorClass::TypeMismatch},
           {"$.setPosition();", ErrorClass::ArityMismatch},
           {"Vector3(1, 2);", ErrorClass::ArityMismatch},
           {"$.getPosition(1);", ErrorClass::ArityMismatch},
           {"undeclared = 1;", ErrorClass::UnsupportedApi},
           {"let a = [1].length;", ErrorClass::UnsupportedApi},
           {"let a = \"s\".length;", ErrorClass::UnsupportedApi},
           {"$.state = 5;", ErrorClass::TypeMismatch},
           {"$.getPosition = 5;", ErrorClass::TypeMismatch},
       }) {
    auto inst = install(std::string("$.onUpdate(dt => { ") + c.body + " });");
    auto r = update(*inst);
    ASSERT_TRUE(r.error) << c.body;
    EXPECT_EQ(r.error->errorClass(), c.cls) << c.body << " -> " << r.error->consoleLine();
    EXPECT_TRUE(r.effects.empty());
  }
}

TEST(Runtime, NegativeRateRejected) {
  auto inst = install("$.onInteract(p => { p.setGravityRate(-1); });");
  auto r = interact(*inst);
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.error->errorClass(), ErrorClass::TypeMismatch);
}

TEST(Runtime, ConventionalSemantics) {
  auto inst = install(R"(
    $.onUpdate(dt => {
      let out = [];
      out[0] = 7 % 3;
      out[1] = "a" + "b";
      out[2] = 1 == 1 && "x" != "y";
      out[3] = null || "fallback";
      out[4] = 0 && boom();
      let o = { k: 1 };
      o.k += 2;
      o["z"] = [1, 2];
      out[5] = o;
      let s = 0;
      for (let i = 0; i < 5; i += 1) { s += i; }
      out[6] = s;
      let n = 3;
      while (n > 0) { n -= 1; }
      out[7] = n;
      const add = (a, b) => a + b;
      out[8] = add(2, 3);
      out[9] = ((x) => { if (x > 1) { return "big"; } return "small"; })(2);
      out[10] = Math.max(1, 5, 2) + Math.min() - Math.min();
      out[11] = Vector3(1, 2, 3).add(Vector3(1, 1, 1)).scale(2);
      out[12] = Vector3(3, 4, 0).length();
      out[13] = Math.floor(-1.5);
      out[14] = missingKey === undefined;
      $.log(out);
    });
  )");
  auto r = update(*inst);
  // `boom` never evaluates thanks to short circuit; `missingKey` is unknown.
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.error->memberPath(), "missingKey");

  auto ok = install(R"(
    $.onUpdate(dt => {
      let o = { k: 1 };
      o.k += 2;
      let s = 0;
      for (let i = 0; i < 5; i += 1) { s += i; }
      const add = (a, b) => a + b;
      $.log([7 % 3, "a" + "b", 1 == 1 && "x" != "y", null || "f", 0 && boom(), o, s, add(2, 3),
             Vector3(1, 2, 3).add(Vector3(1, 1, 1)).scale(2), Vector3(3, 4, 0).length(),
             Math.floor(-1.5), o.missing == null, 1 === 1.0, "b" > "a"]);
    });
  )");
  auto r2 = update(*ok);
  ASSERT_FALSE(r2.error) << r2.error->consoleLine();
  ASSERT_EQ(r2.console.size(), 1u);
  EXPECT_EQ(r2.console[0],
            "[1,\"ab\",true,\"f\",0,{\"k\":3},10,5,(4, 6, 8),5,-2,true,true,true]");
}

TEST(Runtime, TopLevelVariablesResetButStatePersists) {
  // A failing dispatch rolls back its state writes.
  auto inst = install("$.onUpdate(dt => { $.state.n = 1; $.log(1 + \"x\"); });");
  ASSERT_TRUE(update(*inst).error);
  EXPECT_EQ(inst->stateBlob(), "{}");

  auto good = install(R"(
    let counter = 0;
    $.onUpdate(dt => {
      counter += 1;
      $.state.n = ($.state.n || 0) + 1;
      $.log(counter);
      $.log($.state.n);
    });
  )");
  for (int i = 1; i <= 3; ++i) {
    auto step = update(*good);
    ASSERT_FALSE(step.error);
    EXPECT_EQ(step.console, (std::vector<std::string>{"1", std::to_string(i)}));
  }
  EXPECT_EQ(good->stateBlob(), "{\"n\":3}");
}

TEST(Runtime, ReadsSeeSnapshotNotOwnEffects) {
  auto inst = install(R"(
    $.onUpdate(dt => {
      $.setPosition(Vector3(5, 5, 5));
      $.log($.getPosition());
    });
  )");
  auto r = update(*inst);
  ASSERT_FALSE(r.error);
  EXPECT_EQ(r.console, std::vector<std::string>{"(0, 0, 0)"});
  EXPECT_EQ(r.effects.size(), 2u);  // SetItemPosition then Log
}

TEST(Runtime, StateRoundTrip) {
  auto inst = install("");
  EXPECT_EQ(snapshotState(*inst), "{}");
  restoreState(*inst, "{}");
  EXPECT_EQ(snapshotState(*inst), "{}");

  restoreState(*inst, R"({"n": 3.5, "v": [1, 2]})");
  auto blob = snapshotState(*inst);
  EXPECT_EQ(blob, R"({"n":3.5,"v":[1,2]})");
  auto a = decodeState(blob);
  auto b = decodeState(R"({"n":3.5,"v":[1,2]})");
  EXPECT_TRUE(deepEquals(a, b));

  EXPECT_THROW(restoreState(*inst, "[1]"), std::invalid_argument);
  EXPECT_THROW(restoreState(*inst, "{"), std::invalid_argument);
  std::string big = "{\"s\":\"" + std::string(kMaxStateBytes, 'x') + "\"}";
  try {
    restoreState(*inst, big);
    FAIL();
  } catch (const RuntimeError& e) {
    EXPECT_EQ(e.errorClass(), ErrorClass::StateOverflow);
  }
  EXPECT_EQ(snapshotState(*inst), R"({"n":3.5,"v":[1,2]})");
}

TEST(Runtime, StateRejectsFunctionsAndOversize) {
  auto fn = install("$.onUpdate(dt => { $.state.f = x => x; });");
  auto r = update(*fn);
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.error->errorClass(), ErrorClass::TypeMismatch);
  EXPECT_EQ(fn->stateBlob(), "{}");

  auto over = install(R"(
    $.onUpdate(dt => {
      let s = "xxxxxxxxxxxxxxxx";
      let i = 0;
      while (i < 10) { s = s + s; i += 1; }
      $.state.s = s;
    });
  )");
  auto r2 = update(*over);
  ASSERT_TRUE(r2.error);
  EXPECT_EQ(r2.error->errorClass(), ErrorClass::StateOverflow);
}

TEST(Runtime, StringGrowthBounded) {
  auto inst = install(R"(
    $.onUpdate(dt => { let s = "x"; while (true) { s = s + s; } });
  )");
  auto r = update(*inst);
  ASSERT_TRUE(r.error);
  EXPECT_EQ(r.error->errorClass(), ErrorClass::BudgetExceeded);
}

TEST(Runtime, RandomIsSeededAndAdvancesCursor) {
  const char* src = "$.onUpdate(dt => { $.log(Math.random()); $.log(Math.random()); });";
  auto a = install(src);
  auto b = install(src);
  auto ra = update(*a);
  auto rb = update(*b);
  EXPECT_EQ(ra.console, rb.console);
  EXPECT_NE(ra.console[0], ra.console[1]);
  EXPECT_NE(ra.rngState, baseView().rngState);
  EXPECT_EQ(ra.rngState, rb.rngState);

  auto view = baseView();
  view.rngState = ra.rngState;
  auto next = update(*a, view);
  EXPECT_NE(next.console, ra.console);
}

TEST(Runtime, DeterministicOutput) {
  const char* src = R"(
    $.onStart(() => { $.state.t = 0; });
    $.onUpdate(dt => {
      $.state.t += dt;
      const r = $.getRotation();
      r.y = ($.state.t * 90) % 360;
      $.setRotation(r);
      $.addImpulse(Vector3(Math.random(), 0, Math.sin($.state.t)));
      $.log($.state);
    });
  )";
  auto run = [&] {
    auto inst = install(src);
    std::vector<std::string> out;
    auto view = baseView();
    dispatch(*inst, Event{EventKind::Start, 0, 0}, view);
    for (int i = 0; i < 50; ++i) {
      auto r = update(*inst, view);
      view.rngState = r.rngState;
      for (const auto& d : described(r.effects)) out.push_back(d);
      for (const auto& c : r.console) out.push_back(c);
    }
    return out;
  };
  EXPECT_EQ(run(), run());
}

TEST(Runtime, ClosuresCaptureAcrossDispatchWithoutLeaking) {
  auto inst2 = install(R"(
    const box = { hits: 0 };
    const hit = () => { box.hits += 1; return box.hits; };
    $.onUpdate(dt => { $.log(hit()); });
    $.onInteract(p => { $.log(hit()); });
  )");
  EXPECT_EQ(update(*inst2).console, std::vector<std::string>{"1"});
  EXPECT_EQ(update(*inst2).console, std::vector<std::string>{"1"});
  EXPECT_EQ(interact(*inst2).console, std::vector<std::string>{"1"});
}

TEST(Runtime, CallbackRegisteredInsideDispatchIsCommitted) {
  auto inst = install("$.onStart(() => { $.onUpdate(dt => { $.log(\"tick\"); }); });");
  EXPECT_FALSE(inst->hasCallback(EventKind::Update));
  dispatch(*inst, Event{EventKind::Start, 0, 0}, baseView());
  EXPECT_TRUE(inst->hasCallback(EventKind::Update));
  EXPECT_EQ(update(*inst).console, std::vector<std::string>{"tick"});
}

TEST(Runtime, EveryCatalogEntryResolves) {
  for (const auto& e : defaultCatalog().entries) {
    EXPECT_FALSE(e.doc.empty()) << e.path;
    EXPECT_FALSE(e.sample.empty()) << e.path;
  }
  auto inst = install(R"(
    $.onInteract(p => {
      const v = Vector3(1, 2, 3);
      v.x = 4; v.y = v.y + 1; v.z -= 1;
      $.setPosition(v); $.setRotation(v); $.setVelocity(v); $.addImpulse(v);
      $.setUseGravity(true); $.setGravityScale(0.165);
      $.log([$.getPosition(), $.getRotation(), $.getVelocity(), p.getPosition(), $.state]);
      p.setPosition(v); p.setJumpSpeedRate(1); p.setMoveSpeedRate(1); p.setGravityRate(1);
      p.respawn();
      $.log([v.sub(v).length(), Math.sin(0), Math.cos(0), Math.abs(-1), Math.sqrt(4),
             Math.min(1, 2), Math.max(1, 2), Math.floor(1.5), Math.PI > 3, Math.random() < 1]);
    });
  )");
  auto r = interact(*inst);
  ASSERT_FALSE(r.error) << r.error->consoleLine();
  EXPECT_EQ(r.effects.size(), 13u);
  EXPECT_EQ(r.console[1], "[0,0,1,1,2,1,2,1,true,true]");
}

// Property: any name path outside the catalog raises UnsupportedApi naming
// that path, on every handle kind, for reads, writes and calls.
TEST(Runtime, UnsupportedApiTotality) {
  std::mt19937_64 rng(99);
  const std::string letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ";
  const std::vector<std::pair<std::string, std::string>> receivers = {
      {"$", "$"}, {"p", "PlayerHandle"}, {"Vector3(0, 0, 0)", "Vector3"}, {"Math", "Math"}};
  const std::vector<std::string> shapes = {"let r = %s.%n;", "%s.%n(1);", "%s.%n = 1;"};
  int checked = 0;
  for (int i = 0; i < 400; ++i) {
    std::string name;
    std::size_t len = 1 + rng() % 12;
    for (std::size_t k = 0; k < len; ++k) name += letters[rng() % letters.size()];
    const auto& [recv, type] = receivers[rng() % receivers.size()];
    if (defaultCatalog().find(type + "." + name)) continue;
    std::string stmt = shapes[rng() % shapes.size()];
    stmt.replace(stmt.find("%s"), 2, recv);
    stmt.replace(stmt.find("%n"), 2, name);
    std::shared_ptr<const dsl::Program> prog;
    try {
      prog = dsl::parse("$.onInteract(p => { " + stmt + " });");
    } catch (const dsl::ParseError&) {
      continue;  // generated a keyword
    }
    auto r = instantiate(prog, BudgetConfig{}, baseView());
    ASSERT_TRUE(r.instance);
    auto d = interact(*r.instance);
    ASSERT_TRUE(d.error) << stmt;
    EXPECT_EQ(d.error->errorClass(), ErrorClass::UnsupportedApi) << stmt;
    EXPECT_EQ(d.error->memberPath(), type + "." + name) << stmt;
    EXPECT_TRUE(d.effects.empty());
    ++checked;
  }
  EXPECT_GT(checked, 300);

  // Unknown globals as well.
  for (const char* src : {"document.write(1);", "let a = window;", "setTimeout(1);"}) {
    auto r = instantiate(dsl::parse(src), BudgetConfig{}, baseView());
    ASSERT_TRUE(r.error) << src;
    EXPECT_EQ(r.error->errorClass(), ErrorClass::UnsupportedApi);
    EXPECT_FALSE(r.error->memberPath().empty());
  }
}

TEST(Runtime, ConsoleBufferIsBounded) {
  BudgetConfig limits;
  limits.maxConsoleLines = 4;
  auto r = instantiate(dsl::parse("$.onUpdate(dt => { for (let i = 0; i < 10; i += 1) { $.log(i); } });"),
                       limits, baseView());
  update(*r.instance);
  ASSERT_EQ(r.instance->console().size(), 4u);
  EXPECT_EQ(r.instance->console().back(), "9");
}
