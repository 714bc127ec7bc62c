#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "magicitem/world/world.hpp"

namespace magicitem::eval {

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ItemSetup {
  world::ItemKind kind = world::ItemKind::Grabbable;
  Vec3 position;
};

/// Either inline source or a prompt answered by the mock gateway.
struct ScriptSource {
  int item = 0;
  std::uint64_t atFrame = 0;
  std::optional<std::string> source;
  std::optional<std::string> prompt;
};

struct TimedInput {
  std::uint64_t frame = 0;
  int player = 0;
  world::PlayerInput input;
};

/// Seeded random input stream for one player.
struct RandomInputs {
  int player = 1;
  std::uint64_t from = 0;
  std::uint64_t to = 0;
  std::uint64_t every = 1;
};

struct OracleSpec {
  std::string type;  // task1 | task2 | predicate
  std::string name;  // predicate name
  nlohmann::json params = nlohmann::json::object();
  bool expect = true;

  std::string label() const;
};

struct ScenarioSpec {
  std::string name;
  std::string category;  // task1, task2, cat1 .. cat7, or free text
  std::string description;
  std::optional<std::uint64_t> seed;
  std::vector<ItemSetup> items;
  std::vector<Vec3> players;
  std::vector<ScriptSource> scripts;
  std::vector<TimedInput> inputs;
  std::optional<RandomInputs> randomInputs;
  std::uint64_t frames = 0;
  std::vector<OracleSpec> oracles;
};

/// Throws ScenarioError naming the offending field.
ScenarioSpec parseScenario(const nlohmann::json& j);
ScenarioSpec loadScenario(const std::filesystem::path& path);

struct OracleResult {
  std::string label;
  bool expected = true;
  bool observed = false;
  bool pass = false;
  std::string detail;
};

struct InstallOutcome {
  int item = 0;
  std::uint64_t frame = 0;
  bool ok = false;
  std::string errorKind;
  std::string member;
  std::string message;
  std::string hashBefore;
  std::string hashAfter;
};

struct ScenarioReport {
  std::string name;
  std::string category;
  bool pass = false;
  std::string failure;  // setup error, empty otherwise
  std::vector<OracleResult> oracles;
  std::vector<InstallOutcome> installs;
  std::uint64_t frames = 0;
  std::string traceDigest;
  std::vector<std::string> consoleExcerpt;
  double wallMs = 0;  // excluded from digests
};

struct RunOptions {
  std::uint64_t seed = 42;
  std::filesystem::path fixturesDir = "fixtures";
  bool requireCoverage = false;
};

ScenarioReport runScenario(const ScenarioSpec& spec, const RunOptions& options);

/// Also returns the final world, for callers that inspect state.
ScenarioReport runScenario(const ScenarioSpec& spec, const RunOptions& options,
                           std::unique_ptr<world::World>* finalWorld);

struct SuiteReport {
  std::vector<ScenarioReport> scenarios;
  std::vector<std::pair<std::string, std::string>> unreadable;  // file, reason
  std::vector<std::string> missingCategories;
  bool pass = true;
  std::string digest;
};

/// Categories the bundled suite must cover.
const std::vector<std::string>& requiredCategories();

/// Runs every *.json under `dir` in name order.
SuiteReport runSuite(const std::filesystem::path& dir, const RunOptions& options);

/// Timing fields omitted when `withTiming` is false; the digest is taken over
/// that form.
nlohmann::json toJson(const ScenarioReport& r, bool withTiming = true);
nlohmann::json toJson(const SuiteReport& r, bool withTiming = true);
std::string formatTable(const SuiteReport& r);

}  // namespace magicitem::eval
