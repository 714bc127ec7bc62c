#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "magicitem/common/vec3.hpp"
#include "magicitem/dsl/ast.hpp"
#include "magicitem/runtime/effect.hpp"
#include "magicitem/runtime/error.hpp"

namespace magicitem::runtime {

struct Closure;

enum class EventKind : std::uint8_t { Start, Update, Interact, Grab, Release, Ride, ExitRide };
inline constexpr std::size_t kEventKindCount = 7;

std::string_view toString(EventKind kind);
/// Name of the registering method, e.g. "onUpdate".
std::string_view registrationName(EventKind kind);

struct Event {
  EventKind kind = EventKind::Update;
  double dt = 0;     // Update only
  int player = 0;    // Interact/Grab/Release/Ride/ExitRide
};

struct BudgetConfig {
  std::size_t maxNodes = 100'000;       // evaluated AST nodes per dispatch
  std::size_t maxCallDepth = 64;        // nested closure calls
  std::size_t maxEvalDepth = 2048;      // nested node evaluations (guards the native stack)
  std::size_t maxStringBytes = 64 * 1024;
  std::size_t maxConsoleLines = 256;    // per-instance console buffer
};

/// Serialized `$.state` must not exceed this many bytes.
inline constexpr std::size_t kMaxStateBytes = 8 * 1024;

struct PlayerView {
  Vec3 position;
  Vec3 velocity;
};

/// Read-only world snapshot visible to a script during one dispatch.
struct WorldView {
  int itemId = 0;
  Vec3 position;
  Vec3 rotation;
  Vec3 velocity;
  std::map<int, PlayerView> players;
  std::uint64_t rngState = 0;
};

/// An installed behavior: the program plus its registered callbacks and
/// persistent state. Confined to one owner; never dispatched concurrently.
class ScriptInstance {
 public:
  ScriptInstance(std::shared_ptr<const dsl::Program> program, BudgetConfig budget);
  ~ScriptInstance();
  ScriptInstance(const ScriptInstance&) = delete;
  ScriptInstance& operator=(const ScriptInstance&) = delete;

  const dsl::Program& program() const { return *program_; }
  const BudgetConfig& budget() const { return budget_; }
  bool hasCallback(EventKind kind) const;
  std::size_t callbackCount() const;
  std::size_t replacedCallbacks() const { return replaced_; }
  const std::string& stateBlob() const { return stateBlob_; }
  const std::deque<std::string>& console() const { return console_; }

 private:
  friend class Interpreter;
  friend struct InstanceAccess;
  friend struct InstantiateResult instantiate(std::shared_ptr<const dsl::Program>,
                                              const BudgetConfig&, const struct WorldView&);
  friend struct DispatchResult dispatch(ScriptInstance&, const struct Event&,
                                        const struct WorldView&);

  void appendConsole(const std::vector<std::string>& lines);

  std::shared_ptr<const dsl::Program> program_;
  BudgetConfig budget_;
  std::array<std::shared_ptr<Closure>, kEventKindCount> callbacks_;
  std::size_t replaced_ = 0;
  std::string stateBlob_ = "{}";
  std::deque<std::string> console_;
};

struct DispatchResult {
  std::vector<Effect> effects;          // emission order; empty when error is set
  std::vector<std::string> console;     // log lines, warnings, then the error line
  std::optional<RuntimeError> error;
  std::uint64_t rngState = 0;           // cursor after the dispatch
};

struct InstantiateResult {
  std::unique_ptr<ScriptInstance> instance;  // null on error
  std::vector<Effect> effects;               // top-level effects to apply at install
  std::vector<std::string> console;
  std::optional<RuntimeError> error;
  std::uint64_t rngState = 0;
};

/// Runs the top-level statements once, capturing callback registrations.
InstantiateResult instantiate(std::shared_ptr<const dsl::Program> program, const BudgetConfig& limits,
                              const WorldView& view);

/// Runs the callback registered for `event` (no-op if none) under a fresh
/// budget. On error, effects are discarded and `$.state` is left unchanged.
DispatchResult dispatch(ScriptInstance& instance, const Event& event, const WorldView& view);

/// `$.state` as its JSON blob.
std::string snapshotState(const ScriptInstance& instance);
/// Replaces `$.state`. Throws RuntimeError(StateOverflow) when oversize and
/// std::invalid_argument on a malformed blob.
void restoreState(ScriptInstance& instance, std::string_view blob);

}  // namespace magicitem::runtime
