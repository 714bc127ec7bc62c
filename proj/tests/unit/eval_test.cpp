#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "magicitem/eval/scenario.hpp"

using namespace magicitem;
using namespace magicitem::eval;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kRoot = MAGICITEM_SOURCE_DIR;

RunOptions bundledOptions() {
  RunOptions o;
  o.fixturesDir = kRoot / "fixtures";
  o.requireCoverage = true;
  return o;
}

fs::path scratchDir(const std::string& tag) {
  auto dir = fs::temp_directory_path() / ("magicitem-eval-test-" + tag + "-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json baseScenario() {
  return json::parse(R"({
    "name": "t", "category": "task1", "frames": 300,
    "world": {"items": [{"kind": "chair", "pos": [0, 0, 2]}], "players": [{"pos": [0, 0, 0]}]},
    "scripts": [{"item": 1, "source": "$.onInteract(p => p.setJumpSpeedRate(3));"}],
    "inputs": [{"frame": 10, "input": {"type": "interact", "item": 1}},
               {"frame": 20, "input": {"type": "jump"}}],
    "oracles": [{"type": "task1"}]
  })");
}

}  // namespace

TEST(Eval, Task1InlineFires) {
  auto r = runScenario(parseScenario(baseScenario()), bundledOptions());
  ASSERT_TRUE(r.pass) << r.failure;
  EXPECT_EQ(r.frames, 300u);
  EXPECT_EQ(r.traceDigest.size(), 64u);
}

TEST(Eval, SameSeedSameDigest) {
  auto spec = parseScenario(baseScenario());
  auto a = runScenario(spec, bundledOptions());
  auto b = runScenario(spec, bundledOptions());
  EXPECT_EQ(a.traceDigest, b.traceDigest);
  EXPECT_EQ(toJson(a, false), toJson(b, false));
}

TEST(Eval, MissingScriptFailsOracle) {
  auto j = baseScenario();
  j["scripts"] = json::array();
  auto r = runScenario(parseScenario(j), bundledOptions());
  EXPECT_FALSE(r.pass);
  ASSERT_EQ(r.oracles.size(), 1u);
  EXPECT_FALSE(r.oracles[0].observed);
}

TEST(Eval, ParseRejectsBadFields) {
  auto zero = baseScenario();
  zero["frames"] = 0;
  EXPECT_THROW(parseScenario(zero), ScenarioError);

  auto kind = baseScenario();
  kind["world"]["items"][0]["kind"] = "lamp";
  EXPECT_THROW(parseScenario(kind), ScenarioError);

  auto both = baseScenario();
  both["scripts"][0]["prompt"] = "x";
  EXPECT_THROW(parseScenario(both), ScenarioError);

  auto oracle = baseScenario();
  oracle["oracles"][0]["type"] = "task3";
  EXPECT_THROW(parseScenario(oracle), ScenarioError);
}

TEST(Eval, MissingFixtureIsSetupFailure) {
  auto j = baseScenario();
  j["scripts"][0] = {{"item", 1}, {"prompt", "no fixture was recorded for this"}};
  auto r = runScenario(parseScenario(j), bundledOptions());
  EXPECT_FALSE(r.pass);
  EXPECT_FALSE(r.failure.empty());
}

TEST(Eval, UnknownPredicateIsSetupFailure) {
  auto j = baseScenario();
  j["oracles"] = json::array({{{"type", "predicate"}, {"name", "vibes_good"}}});
  auto r = runScenario(parseScenario(j), bundledOptions());
  EXPECT_FALSE(r.pass);
  EXPECT_NE(r.failure.find("vibes_good"), std::string::npos);
}

TEST(Eval, ExpectFalseInverts) {
  auto j = baseScenario();
  j["scripts"] = json::array();
  j["oracles"][0]["expect"] = false;
  EXPECT_TRUE(runScenario(parseScenario(j), bundledOptions()).pass);
}

TEST(Eval, UnsupportedApiLeavesWorldUnchanged) {
  auto j = baseScenario();
  j["scripts"][0]["source"] = "$.setPosition(Vector3(0, 5, 0));\n$.setAmbientLight(0);";
  j["oracles"] = json::parse(R"([
    {"type": "predicate", "name": "error_class_eq", "item": 1, "value": "UnsupportedApi"},
    {"type": "predicate", "name": "world_unchanged", "item": 1},
    {"type": "predicate", "name": "item_y_le", "item": 1, "value": 0, "over": "all"}])");
  auto r = runScenario(parseScenario(j), bundledOptions());
  EXPECT_TRUE(r.pass) << toJson(r).dump(2);
}

TEST(Eval, EmptyDirectoryPasses) {
  auto dir = scratchDir("empty");
  auto r = runSuite(dir, {});
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.scenarios.empty());
  EXPECT_EQ(r.missingCategories.size(), requiredCategories().size());
  fs::remove_all(dir);
}

TEST(Eval, FailingAndUnreadableListed) {
  auto dir = scratchDir("mixed");
  auto good = baseScenario();
  auto bad = baseScenario();
  bad["name"] = "no-script";
  bad["scripts"] = json::array();
  std::ofstream(dir / "a.json") << good.dump();
  std::ofstream(dir / "b.json") << bad.dump();
  std::ofstream(dir / "c.json") << "{ not json";
  std::ofstream(dir / "notes.txt") << "ignored";
  auto r = runSuite(dir, {});
  EXPECT_FALSE(r.pass);
  ASSERT_EQ(r.scenarios.size(), 2u);
  EXPECT_TRUE(r.scenarios[0].pass);
  EXPECT_FALSE(r.scenarios[1].pass);
  ASSERT_EQ(r.unreadable.size(), 1u);
  EXPECT_EQ(r.unreadable[0].first, "c.json");
  auto table = formatTable(r);
  EXPECT_NE(table.find("no-script"), std::string::npos);
  EXPECT_NE(table.find("unreadable: c.json"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Eval, BundledSuitePassesWithCoverage) {
  auto r = runSuite(kRoot / "scenarios", bundledOptions());
  EXPECT_GE(r.scenarios.size(), 12u);
  EXPECT_TRUE(r.missingCategories.empty());
  EXPECT_TRUE(r.unreadable.empty());
  EXPECT_TRUE(r.pass) << formatTable(r);
  int cat7 = 0;
  for (const auto& s : r.scenarios) cat7 += s.category == "cat7";
  EXPECT_GE(cat7, 2);
}

TEST(Eval, BundledSuiteDigestStable) {
  auto a = runSuite(kRoot / "scenarios", bundledOptions());
  auto b = runSuite(kRoot / "scenarios", bundledOptions());
  EXPECT_EQ(a.digest, b.digest);
  EXPECT_FALSE(toJson(a, false).dump().find("wall_ms") != std::string::npos);
}

TEST(Eval, SeedChangesRandomInputs) {
  auto spec = loadScenario(kRoot / "scenarios" / "random_walk.json");
  spec.seed.reset();
  auto opts = bundledOptions();
  opts.seed = 1;
  auto a = runScenario(spec, opts);
  opts.seed = 2;
  auto b = runScenario(spec, opts);
  EXPECT_NE(a.traceDigest, b.traceDigest);
}
