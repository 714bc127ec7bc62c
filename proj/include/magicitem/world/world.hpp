#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "magicitem/common/vec3.hpp"
#include "magicitem/dsl/ast.hpp"
#include "magicitem/runtime/instance.hpp"

namespace magicitem::world {

struct WorldConfig {
  Vec3 gravity{0, -9.81, 0};
  double dt = 1.0 / 60.0;
  double groundHalfExtent = 10;     // ground square x,z in [-h, h] at y = 0
  double baseJumpSpeed = 5;
  double baseMoveSpeed = 3;
  double interactRange = 2;         // grab / ride
  Vec3 seatOffset{0, 1, 0};
  Vec3 heldOffset{0, 1.2, 0.5};
  double killPlaneY = -20;
  std::size_t traceCapacity = 0;    // 0 keeps every frame
  runtime::BudgetConfig budget;
};

enum class ItemKind { Chair, Grabbable };
std::string_view toString(ItemKind kind);
bool parseItemKind(std::string_view text, ItemKind& out);

struct Item {
  int id = 0;
  ItemKind kind = ItemKind::Grabbable;
  Vec3 position;
  Vec3 rotation;
  Vec3 velocity;
  bool useGravity = false;
  double gravityScale = 1;
  std::optional<int> heldBy;
  std::optional<int> riddenBy;
  std::unique_ptr<runtime::ScriptInstance> script;
};

struct Player {
  int id = 0;
  Vec3 position;
  Vec3 velocity;
  Vec3 moveIntent;  // unit-or-shorter xz direction, persists until the next Move
  double jumpSpeedRate = 1;
  double moveSpeedRate = 1;
  double gravityRate = 1;
  bool grounded = false;
  std::optional<int> riding;
  std::optional<int> holding;
  Vec3 spawn;
};

namespace input {
struct Move { Vec3 direction; };
struct Jump {};
struct Interact { int item = 0; };
struct Grab { int item = 0; };
struct Release {};
struct Ride { int item = 0; };
struct ExitRide {};
}  // namespace input

using PlayerInput = std::variant<input::Move, input::Jump, input::Interact, input::Grab,
                                 input::Release, input::Ride, input::ExitRide>;

/// JSON form: {"type":"move","direction":[x,0,z]}, {"type":"jump"},
/// {"type":"interact","item":1}, ... Throws std::invalid_argument.
PlayerInput parseInput(const nlohmann::json& j);
nlohmann::json toJson(const PlayerInput& in);

struct InputAck {
  bool accepted = true;
  std::string reason;
};

struct Pose {
  int id = 0;
  Vec3 position;
};

struct FrameRecord {
  std::uint64_t frame = 0;
  double time = 0;
  std::vector<Pose> players;
  std::vector<Pose> items;
  std::vector<std::string> console;
  std::vector<std::string> errors;
};

/// One JSON line (no trailing newline).
std::string toJsonLine(const FrameRecord& rec);
FrameRecord frameFromJson(const nlohmann::json& j);

struct ConsoleReport {
  bool ok = true;
  std::vector<std::string> console;
  std::optional<runtime::RuntimeError> error;
};

/// Single-owner deterministic simulation. Not thread-safe; share snapshots.
class World {
 public:
  /// Throws std::invalid_argument on a non-positive dt or extent.
  explicit World(WorldConfig config = {}, std::uint64_t seed = 42);

  int spawnItem(ItemKind kind, Vec3 position);
  int spawnPlayer(Vec3 position);

  /// Replaces any prior script. On error the item is left scriptless.
  ConsoleReport installScript(int itemId, std::shared_ptr<const dsl::Program> program);
  void removeScript(int itemId);

  /// Validates and queues an input for the next step.
  InputAck applyInput(int playerId, const PlayerInput& in);

  const FrameRecord& step();

  const WorldConfig& config() const { return config_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t rngState() const { return rng_; }
  std::uint64_t frame() const { return frame_; }
  double time() const { return static_cast<double>(frame_) * config_.dt; }
  const std::map<int, Item>& items() const { return items_; }
  const std::map<int, Player>& players() const { return players_; }
  const Item* item(int id) const;
  const Player* player(int id) const;
  const std::deque<FrameRecord>& trace() const { return trace_; }
  /// Chained SHA-256 over every FrameRecord line since creation.
  const std::string& traceHash() const { return traceHash_; }

  bool insideGround(const Vec3& p) const;

  nlohmann::json snapshot() const;
  /// Digest of the full simulation state (snapshot, rng cursor, script state).
  std::string structuralHash() const;

 private:
  struct Emitted {
    int itemId;
    std::vector<runtime::Effect> effects;
  };

  runtime::WorldView viewFor(const Item& item) const;
  void dispatchTo(Item& item, const runtime::Event& ev, FrameRecord& rec,
                  std::vector<Emitted>& out);
  void consumeInput(int playerId, const PlayerInput& in, FrameRecord& rec,
                    std::vector<Emitted>& out);
  void exitRide(Player& p, FrameRecord& rec, std::vector<Emitted>& out);
  void applyEffects(int itemId, const std::vector<runtime::Effect>& effects);
  void integrate();
  void resolveGround(Vec3& pos, Vec3& vel, double prevY, bool* grounded) const;
  void lockAttachments();
  void respawnFallen();
  void resetToSpawn(Player& p);

  WorldConfig config_;
  std::uint64_t seed_;
  std::uint64_t rng_;
  std::uint64_t frame_ = 0;
  int nextItemId_ = 1;
  int nextPlayerId_ = 1;
  std::map<int, Item> items_;
  std::map<int, Player> players_;
  std::vector<std::pair<int, PlayerInput>> queued_;
  std::deque<FrameRecord> trace_;
  std::string traceHash_;
};

}  // namespace magicitem::world
